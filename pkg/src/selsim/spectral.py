"""Fourier representation of periodic fields on the 2*pi torus.

Fields are stored as real-FFT half spectra with shape ``(*components, n, n, n//2 + 1)``
and index order ``[component, x, y, z]``.  Forward transforms are unnormalized and the
inverse carries the ``1/n**3`` factor, so a physical integral is ``(2*pi/n)**3`` times a
grid sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

AXES = (-3, -2, -1)
LENGTH = 2.0 * np.pi
MOLLIFIER_KINDS = ("bump-kernel", "gaussian-multiplier")


def _fwd(a: np.ndarray) -> np.ndarray:
    return sfft.rfftn(a, axes=AXES, workers=1)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid of ``n**3`` points on the torus of period 2*pi."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n!r}")

    @property
    def length(self) -> float:
        return LENGTH

    @property
    def spacing(self) -> float:
        return LENGTH / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def volume(self) -> float:
        return LENGTH**3

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def physical_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer lattice ``{-n/2+1, ..., n/2}`` per axis, broadcastable to the half spectrum."""
        n = self.n
        full = np.fft.fftfreq(n, 1.0 / n)
        full[n // 2] = n // 2
        half = np.arange(n // 2 + 1, dtype=float)
        return full[:, None, None], full[None, :, None], half[None, None, :]

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # the Nyquist row has no real-valued derivative; it is zeroed
        n = self.n
        out = []
        for k in self.wavenumbers:
            k = k.copy()
            k[np.abs(k) == n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def kvec(self) -> np.ndarray:
        """Derivative wavevectors stacked to shape ``(3, n, n, n//2+1)``."""
        return np.stack(np.broadcast_arrays(*self.derivative_wavenumbers)).astype(float)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kd2(self) -> np.ndarray:
        return np.sum(self.kvec**2, axis=0)

    @cached_property
    def inv_kd2(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            inv = np.where(self.kd2 > 0, 1.0 / np.where(self.kd2 > 0, self.kd2, 1.0), 0.0)
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.n / 3.0
        kx, ky, kz = self.wavenumbers
        return (np.abs(kx) <= cut) & (np.abs(ky) <= cut) & (np.abs(kz) <= cut)

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum mode in the full spectrum."""
        m = self.n // 2 + 1
        w = np.full(m, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w[None, None, :], self.spectral_shape)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def mesh(self) -> np.ndarray:
        """Physical coordinates with shape ``(3, n, n, n)``."""
        x = self.coordinates
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Grid quadrature of physical values over the last three axes."""
        return values.sum(axis=AXES) * self.cell_volume


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Half-spectrum coefficients of a real scalar or vector field."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape[-3:] != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.spectral_shape}"
            )

    @classmethod
    def from_physical(cls, grid: TorusGrid, values: np.ndarray) -> SpectralField:
        values = np.asarray(values, dtype=float)
        if values.shape[-3:] != grid.physical_shape:
            raise ValueError(f"physical shape {values.shape} does not match grid n={grid.n}")
        return cls(grid, _fwd(values))

    @classmethod
    def zeros(cls, grid: TorusGrid, components: int = 3) -> SpectralField:
        shape = grid.spectral_shape if components == 1 else (components, *grid.spectral_shape)
        return cls(grid, np.zeros(shape, dtype=complex))

    @property
    def component_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-3]

    def to_physical(self) -> np.ndarray:
        return sfft.irfftn(self.coeffs, s=self.grid.physical_shape, axes=AXES, workers=1)

    def full_spectrum(self) -> np.ndarray:
        """Complete ``n**3`` spectrum (for symmetry checks)."""
        return sfft.fftn(self.to_physical(), axes=AXES, workers=1)

    def mean(self) -> np.ndarray:
        return self.coeffs[..., 0, 0, 0].real / self.grid.n**3

    def masked(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * self.grid.dealias_mask)

    def _check(self, other: SpectralField) -> None:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class MollifierSpec:
    sigma: float
    kind: str = "bump-kernel"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"mollifier sigma must be > 0, got {self.sigma}")
        if self.kind not in MOLLIFIER_KINDS:
            raise ValueError(f"unknown mollifier kind {self.kind!r}; expected one of {MOLLIFIER_KINDS}")
        if self.kind == "bump-kernel" and self.sigma > LENGTH / 2:
            raise ValueError(f"bump-kernel sigma must be <= pi, got {self.sigma}")


# --- spectral calculus on raw coefficient arrays -------------------------------------


def leray_coeffs(grid: TorusGrid, fh: np.ndarray) -> np.ndarray:
    k = grid.kvec
    kdotf = np.einsum("i...,i...->...", k, fh)
    return fh - k * (kdotf * grid.inv_kd2)


def gradient_coeffs(grid: TorusGrid, fh: np.ndarray) -> np.ndarray:
    """``out[j, ...] = i k_j fh[...]`` (derivative axis first)."""
    ik = 1j * grid.kvec
    return ik.reshape((3,) + (1,) * (fh.ndim - 3) + grid.spectral_shape) * fh[None]


def divergence_coeffs(grid: TorusGrid, fh: np.ndarray) -> np.ndarray:
    return np.einsum("i...,i...->...", 1j * grid.kvec, fh)


def l2_inner(grid: TorusGrid, ah: np.ndarray, bh: np.ndarray) -> float:
    """Exact L2 inner product of two real fields from their half spectra."""
    prod = (ah * np.conj(bh)).real * grid.parseval_weights
    return float(prod.sum() * grid.volume / grid.n**6)


# --- public operations ---------------------------------------------------------------


def leray_project(f: SpectralField) -> SpectralField:
    """Orthogonal projection onto divergence-free fields; the mean mode passes through."""
    if f.component_shape != (3,):
        raise ValueError("leray_project needs a 3-component field")
    return SpectralField(f.grid, leray_coeffs(f.grid, f.coeffs))


def gradient(f: SpectralField) -> SpectralField:
    """Spectral gradient with the derivative index prepended: ``G[j, i] = d_j f_i``."""
    return SpectralField(f.grid, gradient_coeffs(f.grid, f.coeffs))


def divergence(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, divergence_coeffs(f.grid, f.coeffs))


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.kd2 * f.coeffs)


def fractional_norm(f: SpectralField, alpha: float) -> float:
    """Norm in D(A^alpha): weight ``|k|^(4 alpha)`` over nonzero modes."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    grid = f.grid
    k2 = grid.k2
    weight = np.where(k2 > 0, np.power(np.where(k2 > 0, k2, 1.0), 2.0 * alpha), 0.0)
    power = np.abs(f.coeffs) ** 2
    if power.ndim > 3:
        power = power.reshape(-1, *grid.spectral_shape).sum(axis=0)
    total = float((power * weight * grid.parseval_weights).sum())
    return float(np.sqrt(total * grid.volume / grid.n**6))


def _bump_profile(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def _min_image(grid: TorusGrid) -> np.ndarray:
    x = grid.coordinates
    return np.where(x > np.pi, x - LENGTH, x)


@lru_cache(maxsize=32)
def mollifier_multiplier(grid: TorusGrid, spec: MollifierSpec) -> np.ndarray:
    """Real multiplier on the half spectrum, equal to the DFT of a unit-mass kernel.

    The bump kind is the self-convolution of the sampled bump of radius ``sigma/2``;
    its kernel is supported in the ball of radius ``sigma``, nonnegative, and its
    multiplier is a square, hence in ``[0, 1]``.  The Gaussian kind is the periodized
    sampled Gaussian, whose multiplier is a positive theta-function ratio and agrees with
    ``exp(-sigma**2 |k|**2 / 2)`` up to aliasing of order ``exp(-sigma**2 n**2 / 8)``.
    """
    x = _min_image(grid)
    if spec.kind == "bump-kernel":
        half = 0.5 * spec.sigma
        r = np.sqrt(x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2)
        kernel = _bump_profile(r / half)
        m = _fwd(kernel / kernel.sum()).real
        m = m * m
    else:
        images = int(np.ceil(6.0 * spec.sigma / LENGTH)) + 1
        shifts = LENGTH * np.arange(-images, images + 1)
        g = np.exp(-((x[:, None] + shifts[None, :]) ** 2) / (2.0 * spec.sigma**2)).sum(axis=1)
        g /= g.sum()
        gx = np.fft.fft(g).real
        gz = np.fft.rfft(g).real
        m = gx[:, None, None] * gx[None, :, None] * gz[None, None, :]
    # round-off can leave strongly damped modes a hair below zero or above one
    m = np.clip(m, 0.0, 1.0)
    m[0, 0, 0] = 1.0
    return m


def mollifier_kernel(grid: TorusGrid, spec: MollifierSpec) -> np.ndarray:
    """Physical-space convolution kernel (unit grid sum) behind the multiplier."""
    return sfft.irfftn(mollifier_multiplier(grid, spec), s=grid.physical_shape, axes=AXES)


def mollify(f: SpectralField, spec: MollifierSpec) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * mollifier_multiplier(f.grid, spec))


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product (component shapes broadcast) with the two-thirds mask applied."""
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    prod = f.to_physical() * g.to_physical()
    return SpectralField(f.grid, _fwd(prod) * f.grid.dealias_mask)


def resample_coeffs(coeffs: np.ndarray, source: TorusGrid, target: TorusGrid) -> np.ndarray:
    """Zero-pad or truncate half-spectrum coefficients to another grid.

    Modes shared by both lattices are copied (Nyquist rows are dropped), and the
    amplitude is rescaled so physical values are preserved.
    """
    m = min(source.n, target.n) // 2
    out = np.zeros(coeffs.shape[:-3] + target.spectral_shape, dtype=complex)
    rows = [(slice(0, m), slice(0, m)), (slice(-(m - 1), None), slice(-(m - 1), None))]
    for sx, tx in rows:
        for sy, ty in rows:
            out[..., tx, ty, :m] = coeffs[..., sx, sy, :m]
    return out * (target.n / source.n) ** 3


def forward(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Forward real FFT of physical values (helper for callers working with raw arrays)."""
    return _fwd(values)


def inverse(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=grid.physical_shape, axes=AXES, workers=1)
