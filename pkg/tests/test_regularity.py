import numpy as np
import pytest

from conftest import HOT_CENTER, hotspot_velocity
from selsim.regularity import (
    REGULAR,
    UNRESOLVED,
    ParabolicCylinder,
    ScanData,
    WindowError,
    abcd,
    ball_weights,
    blowup_rescale,
    classify_point,
    cylinder_quadrature,
    hausdorff_cover,
    limsup_density,
    theta,
    torus_distance,
    window_integral,
    write_cover_report,
    write_regularity_report,
)
from selsim.spectral import TorusGrid


def zeros3(X, t):
    return np.zeros((3, 3, *X.shape[1:]))


def zeros4(X, t):
    return np.zeros((3, 3, 3, *X.shape[1:]))


def constant_data(grid, c, times):
    return ScanData.from_functions(
        grid, times,
        v=lambda X, t: np.stack([np.full(X.shape[1:], c), 0 * X[0], 0 * X[0]]),
        grad_v=zeros3, grad_d=zeros3, hess_d=zeros4, pi=lambda X, t: 0 * X[0],
    )


def hotspot_data(grid, times, amplitude=5.0):
    return ScanData.from_functions(
        grid, times,
        v=lambda X, t: hotspot_velocity(X, amplitude)[0],
        grad_v=lambda X, t: hotspot_velocity(X, amplitude)[1],
        grad_d=zeros3, hess_d=zeros4, pi=lambda X, t: 0 * X[0],
    )


def test_torus_distance_wraps():
    assert torus_distance(np.array([0.1, 0, 0]), np.array([2 * np.pi - 0.1, 0, 0])) == pytest.approx(0.2)


def test_cylinder_disjointness():
    a = ParabolicCylinder((0.0, 0.0, 0.0), 1.0, 0.5)
    assert not a.disjoint(ParabolicCylinder((0.9, 0.0, 0.0), 1.0, 0.5))
    assert a.disjoint(ParabolicCylinder((1.1, 0.0, 0.0), 1.0, 0.5))
    # same ball, separated in time
    assert a.disjoint(ParabolicCylinder((0.0, 0.0, 0.0), 0.7, 0.5))
    with pytest.raises(ValueError):
        ParabolicCylinder((0, 0, 0), 0.0, 4.0)


@pytest.mark.parametrize("r", [0.3, 0.77, 1.2])
def test_ball_weights_volume(r):
    grid = TorusGrid(32)
    _, w = ball_weights(grid, (1.0, 2.0, 6.2), r)
    assert w.sum() == pytest.approx(4 / 3 * np.pi * r**3, rel=2e-3)
    assert w.max() <= grid.cell_volume * (1 + 1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0])
def test_theta_constant_velocity(r):
    grid = TorusGrid(32)
    dt = r * r / 16
    data = constant_data(grid, 0.7, np.arange(17) * dt)
    q = abcd(data, (3.0, 3.0, 3.0), 16 * dt, r)
    # C = r^-2 |B_r| r^2 c^3, D = 0
    assert q.theta == pytest.approx(4 / 3 * np.pi * r**3 * 0.7**3, rel=2e-3)
    assert q.theta == q.C + q.D**2
    assert q.B == 0.0


def test_quadrature_window_errors():
    grid = TorusGrid(16)
    data = constant_data(grid, 1.0, np.arange(5) * 0.01)
    with pytest.raises(WindowError, match="snapshot"):
        cylinder_quadrature(data, (0, 0, 0), 0.015, 0.1)
    with pytest.raises(WindowError, match="before"):
        cylinder_quadrature(data, (0, 0, 0), 0.02, 0.2)
    with pytest.raises(WindowError, match="below"):
        cylinder_quadrature(data, (0, 0, 0), 0.04, 0.01)
    with pytest.raises(ValueError, match="uniform"):
        constant_data(grid, 1.0, [0.0, 0.1, 0.3])


def test_zero_fields_are_regular():
    grid = TorusGrid(16)
    data = constant_data(grid, 0.0, np.arange(9) * 0.0625)
    pc = classify_point(data, (1.0, 1.0, 1.0), 0.5, 0.7)
    assert pc.classification == REGULAR
    assert pc.quantities.theta == 0.0


def test_hotspot_is_unresolved_elsewhere_regular():
    grid = TorusGrid(32)
    data = hotspot_data(grid, np.arange(9) * 0.0625)
    assert classify_point(data, HOT_CENTER, 0.5, 0.7).classification == UNRESOLVED
    assert classify_point(data, (0.0, 0.0, 0.0), 0.5, 0.7).classification == REGULAR


def test_large_director_is_unresolved():
    grid = TorusGrid(16)
    data = constant_data(grid, 0.0, np.arange(9) * 0.0625)
    big = ScanData(grid, data.times, data.v2, data.gd2, data.gv2, data.hd2, data.pi_abs, data.z_abs,
                   data.d_abs + 20.0)
    assert classify_point(big, (1.0, 1.0, 1.0), 0.5, 0.7, M=10).classification == UNRESOLVED


def test_cover_single_hotspot():
    grid = TorusGrid(32)
    data = hotspot_data(grid, np.arange(9) * 0.0625)
    cands = [(HOT_CENTER, 0.5), ((3.2, 3.1, 3.1), 0.5), ((0.0, 0.0, 0.0), 0.5)]
    rep = hausdorff_cover(data, cands, eps1=0.1, radii=[0.7, 0.5, 0.35])
    assert len(rep.selected) == 1
    assert rep.holds
    assert rep.sum_5r <= 5 * window_integral(data, rep.window) / 0.1**2
    # the far candidate carries no density and is dropped
    assert len(rep.dropped) == 1


def test_cover_is_disjoint_for_many_candidates():
    grid = TorusGrid(32)
    data = hotspot_data(grid, np.arange(9) * 0.0625, amplitude=20.0)
    rng = np.random.default_rng(0)
    cands = [(tuple(np.pi + rng.uniform(-0.8, 0.8, 3)), 0.5) for _ in range(15)]
    rep = hausdorff_cover(data, cands, eps1=0.1, radii=[0.7, 0.5, 0.35, 0.25])
    for i, a in enumerate(rep.selected):
        for b in rep.selected[i + 1:]:
            assert a.disjoint(b)
    assert rep.holds


def test_scaled_theta_is_homogeneous():
    grid = TorusGrid(16)
    data = constant_data(grid, 0.5, np.arange(9) * 0.0625)
    t1 = theta(data, (1, 1, 1), 0.5, 0.7)
    assert theta(data.scaled(2.0), (1, 1, 1), 0.5, 0.7) == pytest.approx(8 * t1, rel=1e-12)


def test_limsup_density_is_max_over_radii():
    grid = TorusGrid(32)
    data = hotspot_data(grid, np.arange(9) * 0.0625)
    radii = [0.7, 0.5, 0.35]
    vals = [abcd(data, HOT_CENTER, 0.5, r).B for r in radii]
    assert limsup_density(data, HOT_CENTER, 0.5, radii) == max(vals)


def test_blowup_rescale_powers():
    fields = {"v": lambda X, t: X + t, "pi": lambda X, t: X[0] * 0 + t, "d": lambda X, t: X * 0 + 1.0}
    out = blowup_rescale(fields, (1.0, 2.0, 3.0), 0.5, 0.1)
    X = np.zeros((3, 1, 1, 1))
    np.testing.assert_allclose(out["v"](X, -1.0).ravel(), 0.1 * (np.array([1, 2, 3]) + 0.49))
    assert out["pi"](X, -1.0).item() == pytest.approx(0.01 * 0.49)
    assert np.all(out["d"](X, 0.0) == 1.0)


def test_reports_written(tmp_path):
    grid = TorusGrid(32)
    data = hotspot_data(grid, np.arange(9) * 0.0625)
    rows = [classify_point(data, HOT_CENTER, 0.5, 0.7)]
    write_regularity_report(tmp_path / "r.csv", rows)
    text = (tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "x0,y0,z0,t0,r,Theta,A,B,C,D,classification"
    assert text[1].endswith(UNRESOLVED)
    rep = hausdorff_cover(data, [(HOT_CENTER, 0.5)], radii=[0.7])
    write_cover_report(tmp_path / "c.csv", rep)
    assert (tmp_path / "c.csv").read_text().splitlines()[-1].endswith("pass")
