"""Exact Ornstein-Uhlenbeck integrator for the linear stochastic Stokes field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .noise import (
    STREAM_OU,
    STREAM_SUPNORM,
    NoiseModel,
    assemble,
    counter_rng,
    draw_coordinates,
)
from .spectral import AXES, SpectralField, inverse


@dataclass(frozen=True)
class OUState:
    t: float
    zhat: SpectralField
    model: NoiseModel
    step: int = 0


def initial_ou_state(model: NoiseModel) -> OUState:
    return OUState(0.0, SpectralField.zeros(model.grid, 3), model, 0)


def ou_transition_variance(model: NoiseModel, dt: float) -> np.ndarray:
    """L2-coordinate variance of the stochastic convolution over one step."""
    lam = model.lam
    return model.l2_variance_rate * (-np.expm1(-2.0 * lam * dt)) / (2.0 * lam)


def stationary_variance(model: NoiseModel) -> np.ndarray:
    return model.l2_variance_rate / (2.0 * model.lam)


def ou_step(state: OUState, dt: float, rng_state: int | None = None) -> OUState:
    """Advance z by ``dt`` exactly in law; draws are keyed on ``(seed, step)``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    model = state.model
    index = state.step if rng_state is None else rng_state
    grid = model.grid
    decay = np.exp(-grid.k2 * dt)
    coeffs = state.zhat.coeffs * decay
    if len(model.reps):
        rng = counter_rng(model.seed, STREAM_OU, index)
        eta = draw_coordinates(model, ou_transition_variance(model, dt), rng)
        coeffs = coeffs + assemble(model, eta)
    return OUState(state.t + dt, SpectralField(grid, coeffs), model, state.step + 1)


@dataclass(frozen=True)
class SupNormReport:
    paths: int
    horizon: float
    dt: float
    alpha: float
    sup_domain_sq: float
    sup_domain_sq_se: float
    sup_linf: float
    sup_linf_se: float
    terminal_domain_sq: float
    terminal_domain_sq_se: float


def _stats(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(len(x)))


def sup_norm_stats(model: NoiseModel, paths: int = 100, horizon: float = 0.2, dt: float = 0.01,
                   alpha: float = 0.5, batch: int = 25) -> SupNormReport:
    """Monte-Carlo moments of sup-in-time norms of z started from rest.

    The supremum is taken over the time grid ``dt, 2 dt, ..., horizon``; the sup-norm in
    space is the maximum over grid points.
    """
    if paths < 100:
        raise ValueError("need at least 100 paths")
    if not dt > 0 or horizon < dt:
        raise ValueError("need 0 < dt <= horizon")
    nsteps = int(np.rint(horizon / dt))
    m = len(model.reps)
    grid = model.grid
    sup_sq = np.zeros(paths)
    sup_inf = np.zeros(paths)
    term_sq = np.zeros(paths)
    if m == 0:
        return SupNormReport(paths, horizon, dt, alpha, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    lam = model.lam
    decay = np.exp(-lam * dt)[:, None, None]
    var = ou_transition_variance(model, dt)
    weight = lam ** (2.0 * alpha)
    for start in range(0, paths, batch):
        ids = range(start, min(paths, start + batch))
        noise = np.stack([
            draw_coordinates(model, var, counter_rng(model.seed, STREAM_SUPNORM, p), (nsteps,))
            for p in ids
        ])
        z = np.zeros((len(ids), m, 2, 2))
        for j in range(nsteps):
            z = decay * z + noise[:, j]
            sq = np.einsum("bmpc,m->b", z**2, weight)
            field = inverse(grid, assemble(model, z))
            linf = np.sqrt(np.max(np.sum(field**2, axis=1), axis=AXES))
            sup_sq[ids.start:ids.stop] = np.maximum(sup_sq[ids.start:ids.stop], sq)
            sup_inf[ids.start:ids.stop] = np.maximum(sup_inf[ids.start:ids.stop], linf)
        term_sq[ids.start:ids.stop] = sq
    a, sa = _stats(sup_sq)
    b, sb = _stats(sup_inf)
    c, sc = _stats(term_sq)
    return SupNormReport(paths, horizon, dt, alpha, a, sa, b, sb, c, sc)
