"""Run orchestration behind the command line: simulate, diagnose, scan, noise statistics."""

from __future__ import annotations

import csv
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_to_toml
from .energetics import (
    BumpTestFunction,
    GlobalEnergyAccumulator,
    LocalEnergyAccumulator,
    PsiAccumulator,
    suitability_margins,
)
from .noise import STREAM_STATS, NoiseModel, counter_rng, draw_coordinates, estimate_holder_exponent
from .regularity import (
    ScanData,
    classify_point,
    hausdorff_cover,
    write_cover_report,
    write_regularity_report,
)
from .snapshot import Snapshot, SnapshotError, list_snapshots, read_snapshot, write_snapshot
from .solver import (
    SimState,
    make_state,
    max_director_length,
    quenched_director,
    step,
    taylor_green,
    uniform_director,
)
from .spectral import MollifierSpec, SpectralField, TorusGrid, forward
from .stokes_ou import ou_transition_variance, stationary_variance, sup_norm_stats

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

ENERGY_CSV = "energy.csv"
CONFIG_COPY = "config.toml"


class RunInputError(ValueError):
    """Run directory or auxiliary input that cannot be used (too few snapshots, bad bump list)."""


# --- simulate ------------------------------------------------------------------------


def noise_model(cfg: RunConfig) -> NoiseModel:
    return NoiseModel(TorusGrid(cfg.n), cfg.delta, cfg.decay_s, cfg.kmax, cfg.seed,
                      cfg.noise_amplitude, cfg.wavevectors)


def initial_fields(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    grid = TorusGrid(cfg.n)
    if cfg.velocity_preset == "zero":
        v0 = np.zeros((3, *grid.physical_shape))
    else:
        v0 = taylor_green(grid, cfg.velocity_amplitude)
    if cfg.director_preset == "quenched":
        d0 = quenched_director(grid, cfg.director_amplitude)
    elif cfg.director_preset == "uniform":
        d0 = uniform_director(grid)
    else:
        try:
            raw = np.load(cfg.director_file)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"config key 'init.director_file': cannot load '{cfg.director_file}'") from exc
        if raw.shape != (3, cfg.n, cfg.n, cfg.n):
            raise ConfigError(f"config key 'init.director_file' must hold an array of shape (3, {cfg.n}, {cfg.n}, {cfg.n})")
        # stored as [c][z][y][x]
        d0 = np.ascontiguousarray(raw.transpose(0, 3, 2, 1), dtype=float)
    return v0, d0


def _snapshot(state: SimState, meta: dict) -> Snapshot:
    return Snapshot(state.grid.n, state.t, state.step, {
        "v": state.v.to_physical(),
        "d": state.d.to_physical(),
        "z": state.z.to_physical(),
        "pi": state.pi.to_physical(),
    }, meta)


@dataclass
class SimulationResult:
    out_dir: Path
    snapshots: list = field(default_factory=list)
    final: SimState | None = None
    max_director: float = 0.0
    mp_violations: int = 0


def run_meta(cfg: RunConfig) -> dict:
    return {
        "dt": cfg.dt,
        "mollifier_sigma": cfg.sigma,
        "mollifier_kind": cfg.mollifier_kind,
        "noise_enabled": cfg.noise_enabled,
        "seed": cfg.seed,
    }


def simulate(cfg: RunConfig, out_dir=None) -> SimulationResult:
    """Integrate the configured run, writing snapshots, the energy ledger and the config."""
    out = Path(out_dir if out_dir is not None else (cfg.out_dir or "run"))
    out.mkdir(parents=True, exist_ok=True)
    (out / CONFIG_COPY).write_text(config_to_toml(cfg))
    grid = TorusGrid(cfg.n)
    sigma = MollifierSpec(cfg.sigma, cfg.mollifier_kind)
    model = noise_model(cfg) if cfg.noise_enabled else None
    v0, d0 = initial_fields(cfg)
    state = make_state(grid, v0, d0, sigma)
    meta = run_meta(cfg)
    check_mp = cfg.director_preset in ("quenched", "uniform")
    result = SimulationResult(out)
    acc = GlobalEnergyAccumulator(sigma)

    def record(s: SimState) -> None:
        result.snapshots.append(write_snapshot(out, _snapshot(s, meta)))
        peak = max_director_length(s)
        result.max_director = max(result.max_director, peak)
        if check_mp and peak > 1.0 + cfg.tol_mp:
            result.mp_violations += 1
            log.warning("maximum principle violated at t=%.6g: max|d| = %.6f", s.t, peak)

    acc.update(state)
    record(state)
    stride = cfg.snapshot_stride
    try:
        for _ in range(cfg.steps):
            state = step(state, cfg.dt, sigma, model)
            acc.update(state)
            if state.step % stride == 0:
                record(state)
    finally:
        acc.ledger.write_csv(out / ENERGY_CSV)
    if state.step % stride != 0:
        record(state)
    result.final = state
    return result


# --- loading runs --------------------------------------------------------------------


def load_snapshots(directory) -> list[Snapshot]:
    paths = list_snapshots(directory)
    snaps = [read_snapshot(p) for p in paths]
    if snaps and len({s.n for s in snaps}) != 1:
        raise SnapshotError(f"{directory}: snapshots have inconsistent grid sizes")
    return snaps


def snapshot_state(snap: Snapshot) -> SimState:
    grid = TorusGrid(snap.n)
    f = snap.fields
    return SimState(snap.t, SpectralField(grid, forward(grid, f["v"])), SpectralField(grid, forward(grid, f["d"])),
                    SpectralField(grid, forward(grid, f["z"])), SpectralField(grid, forward(grid, f["pi"])),
                    snap.step)


def _require_two(snaps: list, directory) -> None:
    if len(snaps) < 2:
        raise RunInputError(f"{directory}: need at least 2 snapshots, found {len(snaps)}")


def _mollifier(snap: Snapshot) -> MollifierSpec:
    meta = snap.meta
    return MollifierSpec(float(meta.get("mollifier_sigma", 0.1)), meta.get("mollifier_kind", "bump-kernel"))


# --- diagnose ------------------------------------------------------------------------


def load_bumps(path) -> list[BumpTestFunction]:
    """Bump list file: TOML with ``[[bump]]`` tables holding ``center``, ``t0``, ``rho``, ``tau``."""
    path = Path(path)
    try:
        table = tomllib.loads(path.read_text())
    except OSError as exc:
        raise SnapshotError(f"{path}: cannot read bump list ({exc.strerror})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise RunInputError(f"{path}: bump list is not valid TOML: {exc}") from exc
    bumps = []
    for i, b in enumerate(table.get("bump", [])):
        try:
            bumps.append(BumpTestFunction(tuple(float(c) for c in b["center"]), float(b["t0"]),
                                          float(b["rho"]), float(b["tau"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise RunInputError(f"{path}: bump {i} is invalid ({exc})") from exc
    return bumps


def _global_residual(snaps: list[Snapshot]):
    acc = GlobalEnergyAccumulator(_mollifier(snaps[0]))
    for s in snaps:
        acc.update(snapshot_state(s))
    return acc.result()


def diagnose(in_dir, bumps: list[BumpTestFunction], out_path, ref_dir=None,
             tolerance: float = 1e-2) -> list[tuple[str, str, object]]:
    """Residual report for a run directory; rows are ``(section, name, value)``.

    ``ref_dir`` names a companion run at twice the time step; its integrated global
    residual divided by this run's is reported as the refinement ratio.
    """
    snaps = load_snapshots(in_dir)
    _require_two(snaps, in_dir)
    sigma = _mollifier(snaps[0])
    gacc = GlobalEnergyAccumulator(sigma)
    laccs = [LocalEnergyAccumulator(phi, sigma) for phi in bumps]
    pacc = PsiAccumulator()
    for snap in snaps:
        state = snapshot_state(snap)
        gacc.update(state)
        pacc.update(state)
        for acc in laccs:
            acc.update(state)
    ledger = gacc.result()
    rows: list[tuple[str, str, object]] = [
        ("global", "integrated_residual", float(np.sum(np.abs(ledger.residual)))),
        ("global", "integrated_relative_residual", ledger.integrated_relative_residual),
        ("global", "max_relative_residual", ledger.max_relative_residual),
    ]
    for i, acc in enumerate(laccs):
        try:
            res = acc.result()
        except ValueError as exc:
            raise RunInputError(f"bump {i}: {exc}") from exc
        margins = suitability_margins(ledger, res, tolerance)
        tag = f"bump{i}"
        rows += [
            ("local", f"{tag}.residual", res.residual),
            ("local", f"{tag}.normalized_residual", res.normalized),
            ("local", f"{tag}.boundary", res.boundary),
            ("local", f"{tag}.dissipation", res.dissipation),
        ]
        rows += [("local", f"{tag}.{name}", val) for name, val in res.groups.items()]
        rows += [
            ("suitability", f"{tag}.global_margin", margins.global_margin),
            ("suitability", f"{tag}.local_margin", margins.local_margin),
            ("suitability", f"{tag}.holds", "pass" if margins.holds else "fail"),
        ]
    psi = pacc.result()
    rows += [
        ("psi", "sup_kinetic", psi.sup_kinetic),
        ("psi", "sup_director_h1", psi.sup_director_h1),
        ("psi", "int_grad_v", psi.int_grad_v),
        ("psi", "int_hess_d", psi.int_hess_d),
        ("psi", "initial_velocity", psi.initial_velocity),
        ("psi", "initial_director_h1", psi.initial_director_h1),
        ("psi", "z_l4_spacetime", psi.z_l4_spacetime),
        ("psi", "lhs", psi.lhs),
        ("psi", "bound", psi.psi),
        ("psi", "ratio", psi.ratio),
    ]
    if ref_dir is not None:
        ref = load_snapshots(ref_dir)
        _require_two(ref, ref_dir)
        coarse = _global_residual(ref).integrated_relative_residual
        fine = ledger.integrated_relative_residual
        ratio = coarse / fine if fine > 0 else float("inf")
        rows += [
            ("refinement", "reference_integrated_relative_residual", coarse),
            ("refinement", "residual_ratio", ratio),
            ("refinement", "ratio_at_least_1.8", "pass" if ratio >= 1.8 else "fail"),
        ]
    write_rows(out_path, ("section", "name", "value"), rows)
    return rows


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


# --- scan ----------------------------------------------------------------------------


@dataclass
class ScanResult:
    classifications: list
    cover: object
    regularity_csv: Path
    cover_csv: Path


def scan_data(snaps: list[Snapshot]) -> ScanData:
    grid = TorusGrid(snaps[0].n)
    return ScanData.from_arrays(grid, [s.t for s in snaps], [s.fields["v"] for s in snaps],
                                [s.fields["d"] for s in snaps], [s.fields["z"] for s in snaps],
                                [s.fields["pi"] for s in snaps])


def center_lattice(per_axis: int) -> list[tuple[float, float, float]]:
    c = 2.0 * np.pi * np.arange(per_axis) / per_axis
    return [(float(x), float(y), float(z)) for x in c for y in c for z in c]


def scan(in_dir, out_dir, eps0: float, eps1: float, M: float, r0: float | None = None,
         per_axis: int = 4, all_times: bool = False) -> ScanResult:
    """Classify lattice centres and cover the unresolved ones.

    ``r0`` defaults to the largest radius up to 0.5 whose cylinder fits the recorded window.
    """
    snaps = load_snapshots(in_dir)
    _require_two(snaps, in_dir)
    data = scan_data(snaps)
    span = float(data.times[-1] - data.times[0])
    if r0 is None:
        m = int(np.floor(min(0.25, span) / data.dt + 1e-9))
        r0 = float(np.sqrt(m * data.dt))
    m0 = int(np.rint(r0 * r0 / data.dt))
    t_index = range(m0, len(data.times)) if all_times else [len(data.times) - 1]
    rows = []
    candidates = []
    for i in t_index:
        t0 = float(data.times[i])
        for x0 in center_lattice(per_axis):
            pc = classify_point(data, x0, t0, r0, eps0, M)
            rows.append(pc)
            if pc.classification != "regular-certified":
                candidates.append((x0, t0))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reg = out / "regularity.csv"
    cov = out / "cover.csv"
    write_regularity_report(reg, rows)
    radii = [r0 * 2.0 ** (-j / 2) for j in range(6)]
    cover = hausdorff_cover(data, candidates, eps1, radii=radii)
    write_cover_report(cov, cover)
    return ScanResult(rows, cover, reg, cov)


# --- noise statistics ----------------------------------------------------------------


def ou_variance_table(model: NoiseModel, samples: int = 10000, dt: float = 2.5,
                      steps: int = 8) -> list[tuple[float, int, float, float, float]]:
    """Empirical stationary L2-coordinate variance per shell against the closed form.

    Chains start at rest and run ``steps`` exact transitions, long enough for the slowest
    mode (``lam = 1``) to forget the start to below 1e-8.  Rows are
    ``(lam, coordinates, empirical, stderr, closed_form)``.
    """
    if len(model.reps) == 0:
        return []
    decay = np.exp(-model.lam * dt)[:, None, None]
    var = ou_transition_variance(model, dt)
    z = np.zeros((samples, len(model.reps), 2, 2))
    for j in range(steps):
        z = decay * z + draw_coordinates(model, var, counter_rng(model.seed, STREAM_STATS, j), (samples,))
    closed = stationary_variance(model)
    rows = []
    for lam in np.unique(model.lam):
        sel = model.lam == lam
        sq = (z[:, sel] ** 2).reshape(samples, -1)
        per_sample = sq.mean(axis=1)
        rows.append((float(lam), int(sq.shape[1]), float(per_sample.mean()),
                     float(per_sample.std(ddof=1) / np.sqrt(samples)), float(closed[sel][0])))
    return rows


def noise_stats(cfg: RunConfig, out_path, paths: int = 200, sup_paths: int = 100,
                samples: int = 10000) -> list[tuple]:
    """Hoelder slope, per-shell OU variances and sup-norm moments as ``(section, name, value, stderr)``."""
    model = noise_model(cfg)
    if not cfg.noise_enabled:
        model = NoiseModel(model.grid, model.delta, model.decay_s, model.kmax, model.seed, 0.0,
                           model.wavevectors)
    rows: list[tuple] = [
        ("model", "trace", model.trace, ""),
        ("model", "mode_count", model.mode_count, ""),
    ]
    if model.trace > 0:
        slope = estimate_holder_exponent(model, paths=paths)
    else:
        slope = float("nan")
    rows.append(("holder", "slope", slope, ""))
    for lam, count, emp, se, closed in ou_variance_table(model, samples):
        rows.append(("variance", f"lam={lam:g}.empirical", emp, se))
        rows.append(("variance", f"lam={lam:g}.closed_form", closed, ""))
        rows.append(("variance", f"lam={lam:g}.coordinates", count, ""))
    sup = sup_norm_stats(model, paths=sup_paths)
    rows += [
        ("supnorm", "sup_domain_sq", sup.sup_domain_sq, sup.sup_domain_sq_se),
        ("supnorm", "sup_linf", sup.sup_linf, sup.sup_linf_se),
        ("supnorm", "terminal_domain_sq", sup.terminal_domain_sq, sup.terminal_domain_sq_se),
    ]
    write_rows(out_path, ("section", "name", "value", "stderr"), rows)
    return rows
