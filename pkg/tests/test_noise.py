import numpy as np
import pytest

from selsim.noise import (
    NoiseModel,
    assemble,
    counter_rng,
    domain_norm,
    estimate_holder_exponent,
    l2_coordinates,
    sample_increment,
    sample_path,
    trace_and_norm_report,
)
from selsim.spectral import SpectralField, TorusGrid, divergence, fractional_norm, l2_inner


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(16)


def test_mode_counts(grid):
    m = NoiseModel(grid, kmax=1)
    assert m.wavevector_count == 26
    assert m.mode_count == 52
    axes = NoiseModel(grid, wavevectors=[(1, 0, 0), (0, 1, 0), (0, 0, 1), (-1, 0, 0)])
    assert axes.wavevector_count == 6
    assert axes.mode_count == 12


def test_default_band_is_dealiased(grid):
    m = NoiseModel(grid)
    assert m.kmax == grid.n // 3
    assert np.abs(m.reps).max() <= grid.n / 3


def test_trace_formula(grid):
    m = NoiseModel(grid, kmax=2, decay_s=1.5, amplitude=2.0)
    assert m.trace == pytest.approx(4 * np.sum(2.0 * m.lam**-1.5))
    report = trace_and_norm_report(m)
    assert report.trace == m.trace
    assert sum(row[3] for row in report.table) == m.mode_count


def test_zero_band_is_silent(grid):
    m = NoiseModel(grid, kmax=0)
    assert m.trace == 0.0 and m.mode_count == 0
    assert not np.any(sample_increment(m, 0.1).coeffs)


def test_validation(grid):
    with pytest.raises(ValueError, match="kmax"):
        NoiseModel(grid, kmax=6)
    with pytest.raises(ValueError, match="delta"):
        NoiseModel(grid, delta=-1)
    with pytest.raises(ValueError, match="seed"):
        NoiseModel(grid, seed=-1)
    with pytest.raises(ValueError, match="wavevector"):
        NoiseModel(grid, wavevectors=[(0, 0, 0)])
    with pytest.raises(ValueError, match="dt"):
        sample_increment(NoiseModel(grid), 0.0)


def test_basis_is_orthonormal_and_solenoidal(grid):
    m = NoiseModel(grid, kmax=2)
    rng = np.random.default_rng(0)
    coords = rng.standard_normal((len(m.reps), 2, 2))
    f = SpectralField(grid, assemble(m, coords))
    # the half spectrum is Hermitian on the kz = 0 plane, so the field is real
    np.testing.assert_allclose(SpectralField.from_physical(grid, f.to_physical()).coeffs, f.coeffs, atol=1e-9)
    assert l2_inner(grid, f.coeffs, f.coeffs) == pytest.approx(np.sum(coords**2), rel=1e-12)
    assert np.max(np.abs(divergence(f).coeffs)) < 1e-9
    np.testing.assert_allclose(l2_coordinates(f, m), coords, atol=1e-12)


def test_domain_norm_matches_fractional_norm(grid):
    m = NoiseModel(grid, kmax=2, delta=0.75)
    coords = np.random.default_rng(1).standard_normal((len(m.reps), 2, 2))
    f = SpectralField(grid, assemble(m, coords))
    assert domain_norm(m, coords) == pytest.approx(fractional_norm(f, 0.75), rel=1e-12)


def test_increments_reproducible_by_step(grid):
    m = NoiseModel(grid, kmax=2, seed=11)
    a = sample_increment(m, 0.01, step=5).coeffs
    b = sample_increment(m, 0.01, step=5).coeffs
    c = sample_increment(m, 0.01, step=6).coeffs
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_counter_rng_streams_are_independent():
    a = counter_rng(1, 1, 0).standard_normal(4)
    b = counter_rng(1, 2, 0).standard_normal(4)
    c = counter_rng(2, 1, 0).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, counter_rng(1, 1, 0).standard_normal(4))


def test_increment_variance(grid):
    m = NoiseModel(grid, kmax=1, seed=3)
    dt = 0.02
    draws = np.stack([l2_coordinates(sample_increment(m, dt, s), m) for s in range(4000)])
    var = (draws**2).mean(axis=(0, 2, 3))
    expected = dt * m.l2_variance_rate
    se = expected * np.sqrt(2 / (4 * 4000))
    assert np.all(np.abs(var - expected) < 4 * se)


def test_sample_path_starts_at_zero(grid):
    m = NoiseModel(grid, kmax=1)
    path = sample_path(m, np.linspace(0, 1, 11))
    assert not np.any(path.values[0])
    assert path.increments.shape == (10, len(m.reps), 2, 2)
    with pytest.raises(ValueError):
        sample_path(m, [0.0, 0.5, 0.5])


def test_holder_slope_near_one_half(grid):
    slope = estimate_holder_exponent(NoiseModel(grid, kmax=1, seed=2), paths=100)
    assert 0.45 <= slope <= 0.55


def test_holder_slope_undefined_for_zero_noise(grid):
    with pytest.warns(RuntimeWarning):
        slope = estimate_holder_exponent(NoiseModel(grid, amplitude=0.0, kmax=1), paths=100)
    assert np.isnan(slope)
