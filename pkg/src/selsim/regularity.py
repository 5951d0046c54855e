"""Parabolic-cylinder diagnostics for partial regularity.

Cylinders are ``Q_r(x0, t0) = B_r(x0) x (t0 - r^2, t0]``.  Space integrals use grid
cells with the fraction of each boundary cell inside the ball measured by sub-sampling,
so weights of disjoint balls never overlap.  Time integrals use the trapezoid rule over
stored snapshots, with ``r`` snapped so that ``r^2`` is a whole number of snapshot steps.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .spectral import LENGTH, TorusGrid, forward, inverse

log = logging.getLogger(__name__)

REGULAR = "regular-certified"
UNRESOLVED = "unresolved"
DEFAULT_EPS0 = 0.05
DEFAULT_EPS1 = 0.1
DEFAULT_M = 10.0
REPORT_COLUMNS = ("x0", "y0", "z0", "t0", "r", "Theta", "A", "B", "C", "D", "classification")


class WindowError(ValueError):
    """A cylinder does not fit inside the recorded space-time window."""


def torus_distance(x, y) -> np.ndarray:
    d = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float) + np.pi) % LENGTH - np.pi
    return np.sqrt(np.sum(d * d, axis=-1))


@dataclass(frozen=True)
class ParabolicCylinder:
    x0: tuple[float, float, float]
    t0: float
    r: float

    def __post_init__(self):
        if not 0 < self.r < np.pi:
            raise WindowError(f"cylinder radius must lie in (0, pi), got {self.r}")
        object.__setattr__(self, "x0", tuple(float(c) % LENGTH for c in self.x0))

    @property
    def t_start(self) -> float:
        return self.t0 - self.r**2

    def disjoint(self, other: ParabolicCylinder) -> bool:
        if torus_distance(self.x0, other.x0) >= self.r + other.r:
            return True
        return self.t0 <= other.t_start or other.t0 <= self.t_start


@dataclass(frozen=True, eq=False)
class ScanData:
    """Pointwise magnitudes on the grid at each snapshot time, shape ``(T, n, n, n)``."""

    grid: TorusGrid
    times: np.ndarray
    v2: np.ndarray  # |v|^2
    gd2: np.ndarray  # |grad d|^2
    gv2: np.ndarray  # |grad v|^2
    hd2: np.ndarray  # |grad^2 d|^2
    pi_abs: np.ndarray
    z_abs: np.ndarray
    d_abs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if len(t) < 1:
            raise ValueError("scan data needs at least one snapshot")
        if len(t) > 1:
            steps = np.diff(t)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * max(1.0, steps.mean()):
                raise ValueError("snapshot times must be uniformly spaced")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @classmethod
    def from_arrays(cls, grid: TorusGrid, times, v, d, z, pi) -> ScanData:
        """Build from physical arrays ``v, d, z`` of shape ``(T, 3, n, n, n)`` and ``pi`` ``(T, n, n, n)``;
        derivatives are spectral."""
        out = {k: [] for k in ("v2", "gd2", "gv2", "hd2", "pi_abs", "z_abs", "d_abs")}
        for vt, dt_, zt, pt in zip(v, d, z, pi):
            vh = forward(grid, vt)
            dh = forward(grid, dt_)
            ik = 1j * grid.kvec
            gv = inverse(grid, ik[:, None] * vh[None])
            gd = inverse(grid, ik[:, None] * dh[None])
            hd = inverse(grid, (ik[:, None, None] * ik[None, :, None]) * dh[None, None])
            out["v2"].append(np.sum(vt**2, axis=0))
            out["gd2"].append(np.sum(gd**2, axis=(0, 1)))
            out["gv2"].append(np.sum(gv**2, axis=(0, 1)))
            out["hd2"].append(np.sum(hd**2, axis=(0, 1, 2)))
            out["pi_abs"].append(np.abs(pt))
            out["z_abs"].append(np.sqrt(np.sum(zt**2, axis=0)))
            out["d_abs"].append(np.sqrt(np.sum(dt_**2, axis=0)))
        return cls(grid, np.asarray(times, dtype=float), **{k: np.array(a) for k, a in out.items()})

    @classmethod
    def from_states(cls, states: Iterable) -> ScanData:
        states = list(states)
        grid = states[0].grid
        return cls.from_arrays(
            grid,
            [s.t for s in states],
            [s.v.to_physical() for s in states],
            [s.d.to_physical() for s in states],
            [s.z.to_physical() for s in states],
            [s.pi.to_physical() for s in states],
        )

    @classmethod
    def from_functions(cls, grid: TorusGrid, times, *, v: Callable, grad_v: Callable,
                       grad_d: Callable, hess_d: Callable, pi: Callable,
                       z: Callable | None = None, d: Callable | None = None) -> ScanData:
        """Sample analytic fields ``f(X, t)`` at grid points wrapped into ``(-pi, pi]^3``.

        Shapes: ``v`` ``(3, ...)``, ``grad_v``/``grad_d`` ``(3, 3, ...)``, ``hess_d``
        ``(3, 3, 3, ...)``, ``pi`` scalar.
        """
        X = np.where(grid.mesh > np.pi, grid.mesh - LENGTH, grid.mesh)
        out = {k: [] for k in ("v2", "gd2", "gv2", "hd2", "pi_abs", "z_abs", "d_abs")}
        zero = np.zeros(grid.physical_shape)
        for t in times:
            out["v2"].append(np.sum(v(X, t) ** 2, axis=0))
            out["gd2"].append(np.sum(grad_d(X, t) ** 2, axis=(0, 1)))
            out["gv2"].append(np.sum(grad_v(X, t) ** 2, axis=(0, 1)))
            out["hd2"].append(np.sum(hess_d(X, t) ** 2, axis=(0, 1, 2)))
            out["pi_abs"].append(np.abs(pi(X, t)) + zero)
            out["z_abs"].append(zero if z is None else np.sqrt(np.sum(z(X, t) ** 2, axis=0)))
            out["d_abs"].append(zero if d is None else np.sqrt(np.sum(d(X, t) ** 2, axis=0)))
        return cls(grid, np.asarray(times, dtype=float), **{k: np.array(a) for k, a in out.items()})

    def scaled(self, s: float) -> ScanData:
        """Copy with ``(v, grad d, grad v, grad^2 d)`` multiplied by ``s``."""
        s2 = s * s
        return ScanData(self.grid, self.times, self.v2 * s2, self.gd2 * s2, self.gv2 * s2, self.hd2 * s2,
                        self.pi_abs, self.z_abs, self.d_abs)


@lru_cache(maxsize=256)
def _ball_weights(n: int, x0: tuple[float, float, float], r: float, sub: int):
    """Flat indices and volumes of grid cells intersecting ``B_r(x0)``."""
    h = LENGTH / n
    reach = int(np.ceil(r / h)) + 1
    base = np.rint(np.asarray(x0) / h).astype(int)
    offs = np.arange(-reach, reach + 1)
    idx = [(base[a] + offs) % n for a in range(3)]
    # min-image displacement of each candidate cell centre from x0
    disp = [((base[a] + offs) * h - x0[a] + np.pi) % LENGTH - np.pi for a in range(3)]
    dx, dy, dz = np.meshgrid(*disp, indexing="ij")
    dist = np.sqrt(dx**2 + dy**2 + dz**2)
    half_diag = 0.5 * np.sqrt(3.0) * h
    frac = np.zeros_like(dist)
    frac[dist + half_diag < r] = 1.0
    edge = (dist + half_diag >= r) & (dist - half_diag < r)
    if edge.any():
        u = ((np.arange(sub) + 0.5) / sub - 0.5) * h
        sx, sy, sz = np.meshgrid(u, u, u, indexing="ij")
        px = dx[edge][:, None] + sx.ravel()[None]
        py = dy[edge][:, None] + sy.ravel()[None]
        pz = dz[edge][:, None] + sz.ravel()[None]
        frac[edge] = np.mean(px**2 + py**2 + pz**2 < r * r, axis=1)
    keep = frac > 0
    ix, iy, iz = np.meshgrid(*idx, indexing="ij")
    flat = (ix[keep] * n + iy[keep]) * n + iz[keep]
    if len(np.unique(flat)) != len(flat):
        raise WindowError("ball wraps onto itself; radius too large for the grid")
    return flat, frac[keep] * h**3


def ball_weights(grid: TorusGrid, x0, r: float, sub: int = 8):
    key = tuple(round(float(c) % LENGTH, 12) for c in x0)
    return _ball_weights(grid.n, key, float(r), sub)


@dataclass(frozen=True)
class CylinderQuadrature:
    cylinder: ParabolicCylinder
    nodes: np.ndarray  # snapshot indices
    time_weights: np.ndarray
    cells: np.ndarray
    cell_weights: np.ndarray


def cylinder_quadrature(data: ScanData, x0, t0: float, r: float, sub: int = 8) -> CylinderQuadrature:
    """Snap ``r`` to the snapshot grid and build space and time weights."""
    times = data.times
    tol = 1e-9 * max(1.0, abs(t0))
    i0 = int(np.argmin(np.abs(times - t0)))
    if abs(times[i0] - t0) > max(tol, 0.5 * data.dt * 1e-6):
        raise WindowError(f"t0={t0} is not a snapshot time")
    if len(times) < 2:
        raise WindowError("cylinder needs at least two snapshots")
    dt = data.dt
    m = int(np.rint(r * r / dt))
    if m < 1:
        raise WindowError(f"radius {r} is below one snapshot interval (dt={dt})")
    if i0 - m < 0:
        raise WindowError(f"cylinder of radius {r} at t0={t0} starts before the recorded window")
    cyl = ParabolicCylinder(tuple(x0), float(times[i0]), float(np.sqrt(m * dt)))
    nodes = np.arange(i0 - m, i0 + 1)
    tw = np.full(m + 1, dt)
    tw[0] = tw[-1] = 0.5 * dt
    cells, cw = ball_weights(data.grid, cyl.x0, cyl.r, sub)
    return CylinderQuadrature(cyl, nodes, tw, cells, cw)


def _space_integrals(values: np.ndarray, q: CylinderQuadrature) -> np.ndarray:
    flat = values[q.nodes].reshape(len(q.nodes), -1)
    return flat[:, q.cells] @ q.cell_weights


def _integral(values: np.ndarray, q: CylinderQuadrature) -> float:
    return float(_space_integrals(values, q) @ q.time_weights)


@dataclass(frozen=True)
class CylinderQuantities:
    cylinder: ParabolicCylinder
    A: float
    B: float
    C: float
    D: float

    @property
    def theta(self) -> float:
        return self.C + self.D**2


def abcd(data: ScanData, x0, t0: float, r: float) -> CylinderQuantities:
    q = cylinder_quadrature(data, x0, t0, r)
    rr = q.cylinder.r
    A = float(np.max(_space_integrals(data.v2 + data.gd2, q))) / rr
    B = _integral(data.gv2 + data.hd2, q) / rr
    C = _integral(data.v2**1.5 + data.gd2**1.5, q) / rr**2
    D = _integral(data.pi_abs**1.5, q) / rr**2
    return CylinderQuantities(q.cylinder, A, B, C, D)


def theta(data: ScanData, x0, t0: float, r: float) -> float:
    return abcd(data, x0, t0, r).theta


@dataclass(frozen=True)
class PointClassification:
    quantities: CylinderQuantities
    classification: str
    sup_z: float
    sup_d: float
    eps0: float
    M: float


def classify_point(data: ScanData, x0, t0: float, r0: float, eps0: float = DEFAULT_EPS0,
                   M: float = DEFAULT_M) -> PointClassification:
    """One-sided epsilon-regularity test: never reports a point as singular."""
    q = cylinder_quadrature(data, x0, t0, r0)
    zs = data.z_abs[q.nodes].reshape(len(q.nodes), -1)[:, q.cells]
    ds = data.d_abs[q.nodes].reshape(len(q.nodes), -1)[:, q.cells]
    sup_z, sup_d = float(zs.max()), float(ds.max())
    quant = abcd(data, x0, t0, r0)
    ok = sup_z <= M and sup_d <= M and quant.theta <= eps0**3
    return PointClassification(quant, REGULAR if ok else UNRESOLVED, sup_z, sup_d, eps0, M)


def limsup_density(data: ScanData, x0, t0: float, radii: Sequence[float]) -> float:
    """Finite-scale surrogate for the lim sup: the max of ``B(r)`` over the given radii."""
    return max(abcd(data, x0, t0, r).B for r in radii)


@dataclass
class CoverReport:
    selected: list
    sum_5r: float
    integral: float
    bound: float
    eps1: float
    window: tuple[float, float]
    dropped: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.sum_5r <= self.bound * (1 + 1e-12) + 1e-300


def window_integral(data: ScanData, window: tuple[float, float]) -> float:
    """``int_V (|grad v|^2 + |grad^2 d|^2)`` over ``window x T^3``."""
    ta, tb = window
    sel = np.flatnonzero((data.times >= ta - 1e-12) & (data.times <= tb + 1e-12))
    if len(sel) < 2:
        return 0.0
    dens = (data.gv2[sel] + data.hd2[sel]).reshape(len(sel), -1).sum(axis=1) * data.grid.cell_volume
    t = data.times[sel]
    return float(np.sum(0.5 * np.diff(t) * (dens[1:] + dens[:-1])))


def hausdorff_cover(data: ScanData, candidates: Iterable, eps1: float = DEFAULT_EPS1,
                    window: tuple[float, float] | None = None,
                    radii: Sequence[float] | None = None) -> CoverReport:
    """Greedy Vitali selection of disjoint cylinders with density at least ``eps1**2``.

    ``candidates`` are ``(x0, t0)`` pairs.  Each gets the largest radius from ``radii``
    whose cylinder lies in the window and carries the density; candidates without
    one are dropped with a warning.
    """
    if window is None:
        window = (float(data.times[0]), float(data.times[-1]))
    ta, tb = window
    if radii is None:
        radii = [0.5 * 2.0 ** (-j / 2) for j in range(6)]
    radii = sorted(radii, reverse=True)
    threshold = eps1**2
    pool = []
    dropped = []
    for x0, t0 in candidates:
        chosen = None
        for r in radii:
            try:
                q = abcd(data, x0, t0, r)
            except WindowError:
                continue
            if q.cylinder.t_start < ta - 1e-12 or q.cylinder.t0 > tb + 1e-12:
                continue
            if q.B >= threshold:
                chosen = q.cylinder
                break
        if chosen is None:
            log.warning("candidate %s at t=%s has no radius with density >= %g; dropped", x0, t0, threshold)
            dropped.append((tuple(x0), t0))
        else:
            pool.append(chosen)
    pool.sort(key=lambda c: -c.r)
    selected: list[ParabolicCylinder] = []
    for cyl in pool:
        if all(cyl.disjoint(s) for s in selected):
            selected.append(cyl)
    for i, a in enumerate(selected):
        for b in selected[i + 1:]:
            if not a.disjoint(b):
                raise AssertionError("selected cylinders overlap")
    integral = window_integral(data, window)
    report = CoverReport(selected, float(sum(5 * c.r for c in selected)), integral,
                         5.0 * integral / threshold, eps1, (ta, tb), dropped)
    if not report.holds:
        raise AssertionError(f"cover bound violated: {report.sum_5r} > {report.bound}")
    return report


def blowup_rescale(fields: dict[str, Callable], x0, t0: float, r: float) -> dict[str, Callable]:
    """Rescale analytic fields about ``(x0, t0)`` at scale ``r``.

    ``(z, v, d, pi)(x, t) -> (r z, r v, d, r^2 pi)(x0 + r x, t0 + r^2 t)``; derivative
    fields pick up the matching powers (``grad v`` and ``grad d`` by ``r^2`` and ``r``,
    ``grad^2 d`` by ``r^2``).
    """
    x0 = np.asarray(x0, dtype=float).reshape(3, 1, 1, 1)
    power = {"v": 1, "z": 1, "d": 0, "pi": 2, "grad_v": 2, "grad_d": 1, "hess_d": 2}

    def wrap(name, f):
        p = power[name]

        def g(X, t):
            return r**p * f(x0 + r * X, t0 + r * r * t)

        return g

    return {name: wrap(name, f) for name, f in fields.items()}


def write_regularity_report(path, rows: Iterable[PointClassification]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for row in rows:
            q = row.quantities
            c = q.cylinder
            w.writerow([*(repr(float(x)) for x in (*c.x0, c.t0, c.r, q.theta, q.A, q.B, q.C, q.D)),
                        row.classification])


def write_cover_report(path, report: CoverReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("x0", "y0", "z0", "t0", "r", "dilated_r"))
        for c in report.selected:
            w.writerow([*(repr(float(x)) for x in (*c.x0, c.t0, c.r, 5 * c.r))])
        w.writerow([])
        w.writerow(("sum_5r", "integral", "bound", "eps1", "inequality"))
        w.writerow([repr(report.sum_5r), repr(report.integral), repr(report.bound), repr(report.eps1),
                    "pass" if report.holds else "fail"])
