"""Periodic grids, Fourier representations and the half-Laplacian.

Functions live on a uniform grid x_j = j*dx, j = 0..N-1, of the torus of
length L.  Fourier coefficients use the convention

    f(x) = sum_k fhat_k exp(2 pi i k x / L),

so ``fhat = fft(values) / N``.  Coefficients are stored in numpy FFT order;
``GridSpec.wavenumbers`` gives the integer k for every slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GridSpec:
    L: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 16 and self.N & (self.N - 1) == 0):
            raise ValueError(f"N must be a power of two >= 16, got {self.N!r}")
        if not self.L > 4:
            raise ValueError(f"period L must exceed 4, got {self.L!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(np.arange(self.N) * self.dx)

    @cached_property
    def x_centered(self) -> np.ndarray:
        """Nodes mapped into [-L/2, L/2)."""
        j = np.arange(self.N)
        j = np.where(j >= self.N // 2, j - self.N, j)
        return _frozen(j * self.dx)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return _frozen(np.fft.fftfreq(self.N, d=1.0 / self.N).astype(np.int64))

    @cached_property
    def angular(self) -> np.ndarray:
        """|2 pi k / L| for every slot; the Nyquist slot gets pi N / L."""
        return _frozen(np.abs(2 * np.pi * self.wavenumbers / self.L))

    @property
    def nyquist(self) -> int:
        return self.N // 2


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.N,):
            raise ValueError(f"expected {self.spec.N} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_callable(cls, spec: GridSpec, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return cls(spec, f(spec.x))

    def to_spectral(self) -> "SpectralFunction":
        return SpectralFunction(self.spec, np.fft.fft(self.values) / self.spec.N)

    def __add__(self, other):
        return GridFunction(self.spec, self.values + _vals(self.spec, other))

    def __sub__(self, other):
        return GridFunction(self.spec, self.values - _vals(self.spec, other))

    def __mul__(self, other):
        return GridFunction(self.spec, self.values * _vals(self.spec, other))

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return GridFunction(self.spec, -self.values)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        return float(np.sum(self.values) * self.spec.dx)


def _vals(spec: GridSpec, other) -> np.ndarray | float:
    if isinstance(other, GridFunction):
        if other.spec != spec:
            raise ValueError("grid spec mismatch")
        return other.values
    return other


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    spec: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.spec.N,):
            raise ValueError(f"expected {self.spec.N} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", _frozen(c))

    def to_physical(self) -> GridFunction:
        return GridFunction(self.spec, np.fft.ifft(self.coeffs * self.spec.N).real)

    def is_real(self, rtol: float = 1e-12) -> bool:
        c = self.coeffs
        mirrored = np.conj(c[(-np.arange(self.spec.N)) % self.spec.N])
        scale = max(np.max(np.abs(c)), 1e-300)
        return bool(np.max(np.abs(c - mirrored)) <= rtol * scale)


def as_spectral(f: GridFunction | SpectralFunction) -> SpectralFunction:
    return f.to_spectral() if isinstance(f, GridFunction) else f


def as_grid(f: GridFunction | SpectralFunction) -> GridFunction:
    return f.to_physical() if isinstance(f, SpectralFunction) else f


def apply_multiplier(f: SpectralFunction, mult: np.ndarray) -> SpectralFunction:
    """Multiply coefficients by a real even symbol; the Nyquist coefficient is kept real."""
    c = f.coeffs * mult
    c[f.spec.nyquist] = c[f.spec.nyquist].real
    return SpectralFunction(f.spec, c)


def half_laplacian(f: SpectralFunction) -> SpectralFunction:
    """Fourier multiplier -|2 pi k / L|."""
    return apply_multiplier(f, -f.spec.angular)


def cauchy_semigroup(f: SpectralFunction, t: float) -> SpectralFunction:
    """Convolution with the periodized Cauchy kernel P_t, multiplier exp(-t |2 pi k / L|)."""
    if t < 0:
        raise ValueError(f"semigroup time must be non-negative, got {t}")
    return apply_multiplier(f, np.exp(-t * f.spec.angular))


def derivative(f: SpectralFunction, order: int = 1) -> SpectralFunction:
    """Spectral derivative; the Nyquist mode is dropped for odd orders."""
    k = 2j * np.pi * f.spec.wavenumbers / f.spec.L
    mult = k**order
    if order % 2:
        mult[f.spec.nyquist] = 0.0
    return SpectralFunction(f.spec, f.coeffs * mult)


def circular_convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """h(x) = int_0^L f(y) g(x - y) dy, i.e. hhat_k = L fhat_k ghat_k."""
    if f.spec != g.spec:
        raise ValueError("grid spec mismatch")
    h = np.fft.irfft(np.fft.rfft(f.values) * np.fft.rfft(g.values), n=f.spec.N) * f.spec.dx
    return GridFunction(f.spec, h)


def periodize(kernel: Callable[[np.ndarray], np.ndarray], spec: GridSpec, support: float) -> GridFunction:
    """Samples of sum_m kernel(x + m L) for a kernel vanishing outside [-support, support]."""
    x = spec.x_centered
    m_max = int(np.ceil(support / spec.L)) + 1
    out = np.zeros(spec.N)
    for m in range(-m_max, m_max + 1):
        shifted = x + m * spec.L
        inside = np.abs(shifted) <= support
        if np.any(inside):
            out[inside] += kernel(shifted[inside])
    return GridFunction(spec, out)


def parseval_sides(f: GridFunction) -> tuple[float, float]:
    """(sum_j f_j^2 dx, L sum_k |fhat_k|^2); equal up to rounding."""
    lhs = float(np.sum(f.values**2) * f.spec.dx)
    rhs = float(f.spec.L * np.sum(np.abs(f.to_spectral().coeffs) ** 2))
    return lhs, rhs
