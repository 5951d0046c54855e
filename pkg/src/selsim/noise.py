"""Divergence-free Q-Wiener noise on the torus.

The noise is expanded in a real orthonormal L2 basis.  For each wavevector ``k`` in a
half-space representative set and each of the two unit polarizations ``e`` orthogonal to
``k`` there are two basis functions, ``sqrt(2/|T|) cos(k.x) e`` and ``sqrt(2/|T|) sin(k.x) e``.
Coordinates in this frame are arrays of shape ``(modes, 2, 2)`` indexed by
``[wavevector, polarization, cos/sin]``.

A mode with ``lam = |k|^2`` carries covariance eigenvalue ``gamma = amplitude * lam**-s``
in the D(A^delta)-orthonormal frame, which is an L2 amplitude ``lam**-delta``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product

import numpy as np

from .spectral import SpectralField, TorusGrid

STREAM_INCREMENT = 1
STREAM_OU = 2
STREAM_PATHS = 3
STREAM_SUPNORM = 4
STREAM_STATS = 5

_MASK64 = (1 << 64) - 1


def counter_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator: the draws depend only on ``(seed, stream, index)``."""
    key = (int(seed) & _MASK64) | (int(stream) << 64)
    counter = np.array([0, 0, int(index) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _half_space(k: tuple[int, int, int]) -> bool:
    kx, ky, kz = k
    return kz > 0 or (kz == 0 and (ky > 0 or (ky == 0 and kx > 0)))


def _polarizations(k: np.ndarray) -> np.ndarray:
    khat = k / np.linalg.norm(k)
    helper = np.array([0.0, 0.0, 1.0]) if abs(khat[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(khat, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    return np.stack([e1, e2])


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Spectrum and seed of the additive noise.

    ``kmax`` defaults to ``n // 3`` so every noise mode survives dealiasing.  An explicit
    ``wavevectors`` list replaces the ``|k|_inf <= kmax`` shell (each entry and its
    negative are the same real mode pair).
    """

    grid: TorusGrid
    delta: float = 1.0
    decay_s: float = 2.0
    kmax: int | None = None
    seed: int = 0
    amplitude: float = 1.0
    wavevectors: tuple[tuple[int, int, int], ...] | None = field(default=None)

    def __post_init__(self):
        if self.kmax is None:
            object.__setattr__(self, "kmax", self.grid.n // 3)
        if self.delta < 0:
            raise ValueError(f"noise delta must be >= 0, got {self.delta}")
        if self.decay_s < 0:
            raise ValueError(f"noise decay_s must be >= 0, got {self.decay_s}")
        if not 0 <= self.kmax <= self.grid.n // 3:
            raise ValueError(f"noise kmax must lie in [0, {self.grid.n // 3}], got {self.kmax}")
        if self.amplitude < 0:
            raise ValueError(f"noise amplitude must be >= 0, got {self.amplitude}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("noise seed must be a 64-bit unsigned integer")
        if self.wavevectors is not None:
            self.reps  # validates the explicit list

    @cached_property
    def reps(self) -> np.ndarray:
        """Half-space representative wavevectors, shape ``(m, 3)``."""
        if self.wavevectors is not None:
            cut = self.grid.n / 3.0
            found = set()
            for k in self.wavevectors:
                k = tuple(int(c) for c in k)
                if k == (0, 0, 0) or max(abs(c) for c in k) > cut:
                    raise ValueError(f"noise wavevector {k} is zero or outside the dealiased band")
                found.add(k if _half_space(k) else tuple(-c for c in k))
            ks = sorted(found)
        else:
            r = range(-self.kmax, self.kmax + 1)
            ks = [k for k in product(r, r, r) if _half_space(k)]
        return np.array(ks, dtype=int).reshape(-1, 3)

    @property
    def wavevector_count(self) -> int:
        """Number of wavevectors counting ``k`` and ``-k`` separately."""
        return 2 * len(self.reps)

    @property
    def mode_count(self) -> int:
        return 4 * len(self.reps)

    @cached_property
    def polarizations(self) -> np.ndarray:
        if len(self.reps) == 0:
            return np.zeros((0, 2, 3))
        return np.stack([_polarizations(k.astype(float)) for k in self.reps])

    @cached_property
    def lam(self) -> np.ndarray:
        return np.sum(self.reps.astype(float) ** 2, axis=1)

    @cached_property
    def gamma(self) -> np.ndarray:
        return self.amplitude * self.lam ** (-self.decay_s)

    @cached_property
    def l2_variance_rate(self) -> np.ndarray:
        """Per-unit-time L2-coordinate variance ``gamma * lam**(-2 delta)``."""
        return self.gamma * self.lam ** (-2.0 * self.delta)

    @property
    def trace(self) -> float:
        return float(4.0 * self.gamma.sum())

    @cached_property
    def _index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.grid.n
        k = self.reps
        return k[:, 0] % n, k[:, 1] % n, k[:, 2]


def assemble(model: NoiseModel, coords: np.ndarray) -> np.ndarray:
    """Half-spectrum coefficients of the field with the given L2 coordinates.

    ``coords`` has shape ``(..., m, 2, 2)``; leading axes are carried through.
    """
    grid = model.grid
    lead = coords.shape[:-3]
    out = np.zeros(lead + (3, *grid.spectral_shape), dtype=complex)
    if len(model.reps) == 0:
        return out
    scale = grid.n**3 / np.sqrt(2.0 * grid.volume)
    amp = (coords[..., 0] - 1j * coords[..., 1]) * scale
    vec = np.einsum("...mp,mpj->...jm", amp, model.polarizations)
    ix, iy, iz = model._index
    out[..., ix, iy, iz] = vec
    plane = iz == 0
    if plane.any():
        n = grid.n
        out[..., (-model.reps[plane, 0]) % n, (-model.reps[plane, 1]) % n, 0] = np.conj(vec[..., plane])
    return out


def l2_coordinates(f: SpectralField, model: NoiseModel) -> np.ndarray:
    """Project a field onto the model's real L2 basis; shape ``(m, 2, 2)``."""
    grid = f.grid
    if len(model.reps) == 0:
        return np.zeros((0, 2, 2))
    ix, iy, iz = model._index
    c = f.coeffs[:, ix, iy, iz] / grid.n**3
    a = np.einsum("mpj,jm->mp", model.polarizations, c) * np.sqrt(2.0 * grid.volume)
    return np.stack([a.real, -a.imag], axis=-1)


def draw_coordinates(model: NoiseModel, variance: np.ndarray, rng: np.random.Generator,
                     lead: tuple[int, ...] = ()) -> np.ndarray:
    std = np.sqrt(variance)
    xi = rng.standard_normal(lead + (len(model.reps), 2, 2))
    return xi * std[:, None, None]


def sample_increment(model: NoiseModel, dt: float, step: int = 0) -> SpectralField:
    """Wiener increment over a step of length ``dt``; reproducible from ``(seed, step)``."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    rng = counter_rng(model.seed, STREAM_INCREMENT, step)
    coords = draw_coordinates(model, dt * model.l2_variance_rate, rng)
    return SpectralField(model.grid, assemble(model, coords))


@dataclass(frozen=True)
class WienerPath:
    """Sampled path in L2 coordinates; ``values[j]`` is W at ``times[j]``."""

    times: np.ndarray
    values: np.ndarray

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)


def sample_path(model: NoiseModel, times: np.ndarray, path: int = 0) -> WienerPath:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) <= 0):
        raise ValueError("path times must be strictly increasing")
    rng = counter_rng(model.seed, STREAM_PATHS, path)
    xi = rng.standard_normal((len(times) - 1, len(model.reps), 2, 2))
    dts = np.diff(times)
    incr = xi * np.sqrt(dts[:, None, None, None] * model.l2_variance_rate[None, :, None, None])
    # W is pinned to zero at the first sample time
    values = np.concatenate([np.zeros((1, len(model.reps), 2, 2)), np.cumsum(incr, axis=0)])
    return WienerPath(times, values)


def domain_norm(model: NoiseModel, coords: np.ndarray) -> np.ndarray:
    """D(A^delta) norm of L2 coordinates over the trailing ``(m, 2, 2)`` axes."""
    w = model.lam ** (2.0 * model.delta)
    return np.sqrt(np.einsum("...mpc,m->...", coords**2, w))


@dataclass(frozen=True)
class HolderCurve:
    lags: np.ndarray
    mean_norm: np.ndarray
    rms_norm: np.ndarray
    stderr: np.ndarray
    paths: int


def holder_curve(model: NoiseModel, lags, paths: int = 200, horizon: float | None = None) -> HolderCurve:
    """Monte-Carlo first and second moments of ``||W(t+h) - W(t)||`` in D(A^delta).

    Each path is sampled on the finest lag grid; all overlapping increments at each lag
    are averaged within the path, and paths are averaged with a CLT error bar.
    """
    lags = np.sort(np.asarray(lags, dtype=float))
    if len(lags) < 4:
        raise ValueError("need at least 4 lags")
    if paths < 100:
        raise ValueError("need at least 100 paths")
    h = lags[0]
    steps = np.rint(lags / h).astype(int)
    if not np.allclose(steps * h, lags, rtol=1e-9, atol=0):
        raise ValueError("lags must be integer multiples of the smallest lag")
    if horizon is None:
        horizon = 2.0 * lags[-1]
    nsteps = int(np.rint(horizon / h))
    if nsteps < steps[-1] + 1:
        raise ValueError("horizon must exceed the largest lag")
    # the D(A^delta)-frame coordinates have variance gamma per unit time
    std = np.sqrt(h * model.gamma)
    per_path = np.zeros((paths, len(lags)))
    per_path_sq = np.zeros((paths, len(lags)))
    for m in range(paths):
        rng = counter_rng(model.seed, STREAM_PATHS, m)
        xi = rng.standard_normal((nsteps, len(model.reps) * 4))
        w = np.concatenate([np.zeros((1, xi.shape[1])), np.cumsum(xi * np.repeat(std, 4), axis=0)])
        for j, s in enumerate(steps):
            nrm = np.linalg.norm(w[s:] - w[:-s], axis=1)
            per_path[m, j] = nrm.mean()
            per_path_sq[m, j] = np.mean(nrm**2)
    mean = per_path.mean(axis=0)
    se = per_path.std(axis=0, ddof=1) / np.sqrt(paths)
    return HolderCurve(lags, mean, np.sqrt(per_path_sq.mean(axis=0)), se, paths)


def estimate_holder_exponent(model: NoiseModel, horizon: float | None = None, lags=None,
                             paths: int = 200, statistic: str = "mean") -> float:
    """Log-log slope of the increment-norm curve; NaN when the path is degenerate."""
    if lags is None:
        lags = 2.0 ** np.arange(-8, -2)
    curve = holder_curve(model, lags, paths, horizon)
    values = curve.mean_norm if statistic == "mean" else curve.rms_norm
    if not np.all(values > 0):
        warnings.warn("noise path is identically zero; Hoelder slope undefined", RuntimeWarning)
        return float("nan")
    slope, _ = np.polyfit(np.log(curve.lags), np.log(values), 1)
    return float(slope)


@dataclass(frozen=True)
class NoiseReport:
    trace: float
    mode_count: int
    wavevector_count: int
    # rows of (|k|^2, gamma, L2 amplitude lam**-delta, modes in the shell)
    table: list[tuple[float, float, float, int]]


def trace_and_norm_report(model: NoiseModel) -> NoiseReport:
    table = []
    for lam in np.unique(model.lam):
        sel = model.lam == lam
        table.append((float(lam), float(lam ** (-model.decay_s) * model.amplitude),
                      float(lam ** (-model.delta)), int(4 * sel.sum())))
    return NoiseReport(model.trace, model.mode_count, model.wavevector_count, table)
