import numpy as np
import pytest

from selsim.snapshot import Snapshot, write_snapshot
from selsim.spectral import TorusGrid

HOT_CENTER = (np.pi, np.pi, np.pi)


def hotspot_velocity(X, amplitude=5.0, width=0.3, center=HOT_CENTER):
    """Gaussian jet along x at ``center`` and its gradient ``[j, i] = d_j v_i``."""
    c = np.asarray(center).reshape(3, *([1] * (X.ndim - 1)))
    dx = (X - c + np.pi) % (2 * np.pi) - np.pi
    g = amplitude * np.exp(-np.sum(dx**2, axis=0) / (2 * width**2))
    v = np.zeros_like(X)
    v[0] = g
    grad = np.zeros((3, 3, *X.shape[1:]))
    grad[:, 0] = -dx / width**2 * g
    return v, grad


@pytest.fixture
def hotspot_run(tmp_path):
    """Directory of stationary hotspot snapshots on a 32-point grid."""

    def make(steps=9, dt=0.0625, n=32, amplitude=5.0):
        grid = TorusGrid(n)
        v, _ = hotspot_velocity(grid.mesh, amplitude)
        zero3 = np.zeros_like(v)
        d = np.zeros_like(v)
        d[2] = 1.0
        out = tmp_path / "hot"
        out.mkdir(exist_ok=True)
        for k in range(steps):
            write_snapshot(out, Snapshot(n, k * dt, k, {"v": v, "d": d, "z": zero3,
                                                        "pi": np.zeros(grid.physical_shape)},
                                         {"mollifier_sigma": 0.1}))
        return out

    return make


@pytest.fixture
def zero_run(tmp_path):
    def make(steps=5, dt=0.0625, n=16):
        out = tmp_path / "zero"
        out.mkdir(exist_ok=True)
        zero3 = np.zeros((3, n, n, n))
        for k in range(steps):
            write_snapshot(out, Snapshot(n, k * dt, k, {"v": zero3, "d": zero3, "z": zero3,
                                                        "pi": np.zeros((n, n, n))}, {"mollifier_sigma": 0.1}))
        return out

    return make


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
