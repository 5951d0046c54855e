import numpy as np
import pytest

from selsim.noise import NoiseModel, l2_coordinates
from selsim.spectral import SpectralField, TorusGrid, divergence
from selsim.stokes_ou import (
    OUState,
    initial_ou_state,
    ou_step,
    ou_transition_variance,
    stationary_variance,
    sup_norm_stats,
)


@pytest.fixture(scope="module")
def model():
    return NoiseModel(TorusGrid(16), kmax=1, seed=4)


def test_transition_variance_limits(model):
    small = ou_transition_variance(model, 1e-8)
    np.testing.assert_allclose(small, 1e-8 * model.l2_variance_rate, rtol=1e-6)
    np.testing.assert_allclose(ou_transition_variance(model, 50.0), stationary_variance(model), rtol=1e-12)


def test_zero_noise_is_heat_decay():
    grid = TorusGrid(16)
    m = NoiseModel(grid, amplitude=0.0, kmax=1)
    x, y, z = grid.mesh
    z0 = SpectralField.from_physical(grid, np.stack([np.sin(2 * y), np.zeros_like(x), np.zeros_like(x)]))
    s = OUState(0.0, z0, m)
    for _ in range(10):
        s = ou_step(s, 0.01)
    np.testing.assert_allclose(s.zhat.to_physical()[0], np.exp(-4 * 0.1) * np.sin(2 * y), atol=1e-13)
    assert s.step == 10 and s.t == pytest.approx(0.1)


def test_step_is_reproducible_and_solenoidal(model):
    s0 = initial_ou_state(model)
    a = ou_step(s0, 0.05)
    b = ou_step(s0, 0.05)
    assert np.array_equal(a.zhat.coeffs, b.zhat.coeffs)
    assert np.max(np.abs(divergence(a.zhat).coeffs)) < 1e-9
    with pytest.raises(ValueError):
        ou_step(s0, -1.0)


def test_per_mode_law_small_sample(model):
    # 2000 chains of one long step: stationary variance within 4 standard errors
    coords = np.stack([
        l2_coordinates(ou_step(initial_ou_state(model), 20.0, rng_state=i).zhat, model) for i in range(2000)
    ])
    var = (coords**2).mean(axis=(0, 2, 3))
    expected = stationary_variance(model)
    se = expected * np.sqrt(2 / (4 * 2000))
    assert np.all(np.abs(var - expected) < 4 * se)


def test_sup_norm_stats_zero_model():
    r = sup_norm_stats(NoiseModel(TorusGrid(16), kmax=0))
    assert r.sup_domain_sq == 0 and r.sup_linf == 0 and r.terminal_domain_sq == 0


def test_sup_norm_stats_ordering(model):
    r = sup_norm_stats(model, paths=100, horizon=0.1, dt=0.01)
    assert 0 < r.terminal_domain_sq <= r.sup_domain_sq
    assert r.sup_linf > 0 and np.isfinite(r.sup_linf_se)
    with pytest.raises(ValueError):
        sup_norm_stats(model, paths=10)
