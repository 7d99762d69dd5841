"""Approximate Green's function G, the remainder F = Lambda G - delta,
the mollified autocorrelation H_eps and the renormalization constant C_eps.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .analysis import smoothstep
from .grid import GridFunction, GridSpec, SpectralFunction, circular_convolve, half_laplacian
from .noise import STANDARD_BUMP, MollifierSpec, mollifier_grid

CUTOFF_INNER = 0.5
CUTOFF_OUTER = 1.0


def cutoff(r):
    """chi(r): 1 on [0, 1/2], 0 on [1, inf), quintic smoothstep in between."""
    return 1.0 - smoothstep((np.abs(r) - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER))


def G(x):
    """chi(|x|) log|x| / pi, with the value 0 at x = 0."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(x)
    nz = (x > 0) & (x < CUTOFF_OUTER)
    out[nz] = cutoff(x[nz]) * np.log(x[nz]) / np.pi
    return out


def _D(y):
    """G - log|y| / pi, smooth and identically zero on [-1/2, 1/2]."""
    y = np.abs(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    far = y > CUTOFF_INNER
    out[far] = (cutoff(y[far]) - 1.0) * np.log(y[far]) / np.pi
    return out


def _dD(y):
    h = 1e-5
    return (_D(y + h) - _D(y - h)) / (2 * h)


def remainder_F(x: float) -> float:
    """F(x) on the line by direct quadrature of Lambda(G - log|.|/pi).

    Independent of any grid or FFT; slow, meant for checks.
    """
    x = float(x)
    Dx = float(_D(x))
    dDx = float(_dD(x))

    def integrand(y):
        d = y - x
        if d == 0:
            return 0.0
        reg = d * dDx if abs(d) <= 1 else 0.0
        return (float(_D(y)) - Dx - reg) / d**2

    pts = sorted({x - 1, x, x + 1, -1.0, -0.5, 0.5, 1.0})
    total = 0.0
    edges = [-np.inf] + pts + [np.inf]
    for a, b in zip(edges[:-1], edges[1:]):
        if b <= a:
            continue
        val, _ = integrate.quad(integrand, a, b, limit=400, epsabs=1e-12, epsrel=1e-11)
        total += val
    return total / np.pi


def G_moments(order: int = 12) -> np.ndarray:
    """Moments int G(y) y^n dy, n = 0..order (odd ones vanish)."""
    out = np.zeros(order + 1)
    for n in range(0, order + 1, 2):
        val, _ = integrate.quad(lambda y: float(G(y)) * y**n, 0, 1, points=[0.5], limit=200, epsabs=1e-14)
        out[n] = 2 * val
    return out


@dataclass(eq=False)
class KernelSet:
    """G periodized on the grid plus the derived fields H_eps.

    ``G_per`` stores 0 at the singular node x = 0.  Every convolution with G
    uses ``G_quadrature`` instead, whose node-0 entry is the weight that makes
    the trapezoid rule third-order accurate for the log singularity.
    """

    spec: GridSpec
    mollifier: MollifierSpec = STANDARD_BUMP
    cutoff_inner: float = CUTOFF_INNER
    cutoff_outer: float = CUTOFF_OUTER
    H_eps: dict = field(default_factory=dict, repr=False)
    _G_eps: dict = field(default_factory=dict, repr=False)

    @cached_property
    def G_per(self) -> GridFunction:
        return GridFunction(self.spec, G(self.spec.x_centered))

    @property
    def singular_weight(self) -> float:
        dx = self.spec.dx
        return math.log(dx / (2 * math.pi)) / math.pi

    @cached_property
    def G_quadrature(self) -> GridFunction:
        v = np.array(self.G_per.values)
        v[0] = self.singular_weight
        return GridFunction(self.spec, v)

    @cached_property
    def G_hat(self) -> SpectralFunction:
        return self.G_quadrature.to_spectral()

    def convolve_G(self, g: GridFunction) -> GridFunction:
        return circular_convolve(self.G_quadrature, g)

    def G_eps(self, eps: float) -> GridFunction:
        """G * rho_eps, periodized."""
        eps = float(eps)
        if eps not in self._G_eps:
            if eps < 4 * self.spec.dx:
                warnings.warn(f"eps={eps} below 4*dx; H_eps is under-resolved", stacklevel=2)
            rho = mollifier_grid(self.spec, eps, self.mollifier)
            self._G_eps[eps] = self.convolve_G(rho)
        return self._G_eps[eps]

    @cached_property
    def F_per(self) -> GridFunction:
        """Periodized F smoothed by the narrowest resolvable mollifier (4 dx)."""
        eps = 4 * self.spec.dx
        rho = mollifier_grid(self.spec, eps, self.mollifier)
        return F_conv_field(self, rho)


def build_G(spec: GridSpec, mollifier: MollifierSpec = STANDARD_BUMP) -> KernelSet:
    if not spec.L > 4:
        raise ValueError("L must exceed 4")
    return KernelSet(spec, mollifier)


def build_H(kernels: KernelSet, eps: float) -> GridFunction:
    """H_eps = P(G_eps^{*2}) on the grid."""
    eps = float(eps)
    if eps not in kernels.H_eps:
        Ge = kernels.G_eps(eps)
        kernels.H_eps[eps] = circular_convolve(Ge, Ge)
    return kernels.H_eps[eps]


def H_second_derivative_at_zero(H: GridFunction) -> float:
    """Spectral H''(0), Nyquist excluded (matches the spectral derivative of S)."""
    spec = H.spec
    c = H.to_spectral().coeffs.real
    k2 = (2 * np.pi * spec.wavenumbers / spec.L) ** 2
    k2[spec.nyquist] = 0.0
    return float(-np.sum(k2 * c))


def renorm_constant_spectral(kernels: KernelSet, eps: float) -> float:
    """C_eps = -(Lambda H_eps)(0)."""
    H = build_H(kernels, eps)
    return float(-np.sum(half_laplacian(H.to_spectral()).coeffs).real)


def renorm_constant_integral(kernels: KernelSet, eps: float, M: int = 64) -> float:
    """C_eps = (1/2pi) int_R 2(H(0) - H(y)) / y^2 dy by trapezoid over |y| <= M L plus a mean-value tail."""
    if M < 4:
        raise ValueError("M must be at least 4")
    spec = kernels.spec
    H = build_H(kernels, eps).values
    f = 2.0 * (H[0] - H)
    N = spec.N
    total = 0.0
    j = np.arange(N)
    for m in range(-M, M):
        y = (j + m * N) * spec.dx
        w = np.ones(N)
        if m == -M:
            w[0] = 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = w * f / y**2
        if m == 0:
            terms[0] = -(H[1] - 2 * H[0] + H[-1]) / spec.dx**2
        total += math.fsum(terms)
    total += 0.5 * f[0] / (M * spec.L) ** 2  # right endpoint y = M L
    integral = total * spec.dx
    fbar = float(np.mean(f))
    integral += 2.0 * fbar / (M * spec.L)
    return integral / (2 * np.pi)


def integral_tail_bound(kernels: KernelSet, eps: float, M: int) -> float:
    H = build_H(kernels, eps).values
    fbar = float(np.mean(2.0 * (H[0] - H)))
    return 2 * fbar / (M * kernels.spec.L * np.pi)


def F_conv_field(kernels: KernelSet, g: GridFunction) -> GridFunction:
    """F * g computed as Lambda(G * g) - g."""
    lam = half_laplacian(kernels.convolve_G(g).to_spectral()).to_physical()
    return lam - g


@dataclass(frozen=True)
class RenormConstant:
    eps: float
    value_integral: float
    value_spectral: float

    @property
    def asymptote(self) -> float:
        return math.log(1 / self.eps) / math.pi

    @property
    def relative_gap(self) -> float:
        return abs(self.value_integral - self.value_spectral) / abs(self.value_spectral)

    @property
    def drift(self) -> float:
        return self.value_spectral - self.asymptote


def renorm_constant(kernels: KernelSet, eps: float, M: int = 64) -> RenormConstant:
    return RenormConstant(float(eps), renorm_constant_integral(kernels, eps, M), renorm_constant_spectral(kernels, eps))


def square(K, alpha, y, z):
    """K(a) - K(a - y) - K(a - z) + K(a - y - z)."""
    return K(alpha) - K(alpha - y) - K(alpha - z) + K(alpha - y - z)


def grid_sampler(f: GridFunction):
    """Evaluate a grid field at arbitrary points that fall on grid nodes (mod L)."""
    spec = f.spec

    def at(x):
        j = np.rint(np.asarray(x, dtype=float) / spec.dx).astype(np.int64) % spec.N
        return f.values[j]

    return at


def write_renorm_csv(rows: list[RenormConstant], path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "C_spectral", "C_integral", "asymptote", "difference"])
        for r in rows:
            w.writerow([repr(r.eps), repr(r.value_spectral), repr(r.value_integral), repr(r.asymptote), repr(r.drift)])
