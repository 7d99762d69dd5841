"""Coefficients of the transformed equation for v_eps = exp(-S_eps) u_eps.

All principal-value integrals here have the form

    (1/pi) int_R g(x, y) / (y - x)^2 dy,   g(x, .) L-periodic, g(x, x) = 0,

with a removable singularity at y = x for the smooth (mollified) inputs we
use.  Summing the periodic translates exactly turns the weight into the
lattice kernel K(u) = (pi/L)^2 / sin^2(pi u / L), and the trapezoid rule over
one period (diagonal node = analytic limit of g / u^2) is spectrally accurate.
The fast path evaluates those trapezoid sums as circular convolutions with K;
``pv_direct`` evaluates the same sums node by node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .grid import GridFunction, GridSpec, derivative
from .kernels import F_conv_field, H_second_derivative_at_zero, KernelSet, build_H, renorm_constant_spectral
from .noise import NoiseRealization, mollify


@lru_cache(maxsize=16)
def lattice_kernel(spec: GridSpec) -> np.ndarray:
    """K_j = sum_m (j dx + m L)^-2 for j = 1..N-1; K_0 = 0 (diagonal handled separately)."""
    j = np.arange(spec.N)
    K = np.zeros(spec.N)
    K[1:] = (np.pi / spec.L) ** 2 / np.sin(np.pi * j[1:] / spec.N) ** 2
    K.flags.writeable = False
    return K


@lru_cache(maxsize=16)
def _kernel_rfft(spec: GridSpec) -> np.ndarray:
    out = np.fft.rfft(lattice_kernel(spec))
    out.flags.writeable = False
    return out


def kconv(spec: GridSpec, f: np.ndarray) -> np.ndarray:
    """(K * f)_i = sum_{j != 0} K_j f_{i+j}, along the last axis."""
    return np.fft.irfft(np.fft.rfft(f, axis=-1) * _kernel_rfft(spec), n=spec.N, axis=-1)


def kernel_sum(spec: GridSpec) -> float:
    return float(np.sum(lattice_kernel(spec)))


def grad(f: GridFunction) -> np.ndarray:
    return derivative(f.to_spectral()).to_physical().values


def _grad_array(spec: GridSpec, w: np.ndarray) -> np.ndarray:
    k = 2j * np.pi * np.arange(spec.N // 2 + 1) / spec.L
    k[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(w, axis=-1) * k, n=spec.N, axis=-1)


def pv_direct(
    spec: GridSpec,
    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray],
    diagonal: np.ndarray,
    chunk: int = 256,
) -> np.ndarray:
    """Node-by-node trapezoid of (1/pi) int g(x, y) K(y - x) dy over one period.

    ``integrand(ix, iy)`` returns g at grid indices (broadcast arrays);
    ``diagonal`` holds lim g(x, x + u) / u^2 for each node.
    """
    N = spec.N
    K = lattice_kernel(spec)
    out = np.empty(N)
    offs = np.arange(1, N)
    for start in range(0, N, chunk):
        ix = np.arange(start, min(start + chunk, N))[:, None]
        iy = (ix + offs[None, :]) % N
        out[ix[:, 0]] = integrand(ix, iy) @ K[1:]
    return (out + diagonal) * spec.dx / np.pi


def compute_S(noise: NoiseRealization, eps: float, kernels: KernelSet) -> GridFunction:
    """S_eps = -G * xi_eps."""
    return -kernels.convolve_G(mollify(noise, eps, kernels.mollifier))


def compute_V(S: GridFunction, window: float | None = None) -> GridFunction:
    """V(x) = (1/pi) int [e^{dS} - 1 - dS - dS^2/2] / (y - x)^2 dy, dS = S(y) - S(x)."""
    spec = S.spec
    _check_window(spec, window)
    s = S.values
    E = np.exp(s)
    Ks = kconv(spec, s)
    total = np.exp(-s) * kconv(spec, E) - kernel_sum(spec) - (Ks - s * kernel_sum(spec))
    total -= 0.5 * (kconv(spec, s * s) - 2 * s * Ks + s * s * kernel_sum(spec))
    return GridFunction(spec, total * spec.dx / np.pi)


def compute_Ztilde(S: GridFunction) -> GridFunction:
    """(1/pi) p.v. int [e^{dS} - 1 - dS] / (y - x)^2 dy."""
    spec = S.spec
    s = S.values
    ks = kernel_sum(spec)
    total = np.exp(-s) * kconv(spec, np.exp(s)) - ks - (kconv(spec, s) - s * ks)
    total += 0.5 * grad(S) ** 2
    return GridFunction(spec, total * spec.dx / np.pi)


def centering_constant(H: GridFunction) -> float:
    """(1/2pi) int 2(H(0) - H(u)) / u^2 du with the same quadrature as U: C_eps again."""
    spec = H.spec
    h = H.values
    return float((lattice_kernel(spec) @ (2 * (h[0] - h)) - H_second_derivative_at_zero(H)) * spec.dx / (2 * np.pi))


def compute_U(S: GridFunction, H: GridFunction, window: float | None = None) -> GridFunction:
    """U(x) = (1/2pi) int [dS^2 - 2(H(0) - H(y - x))] / (y - x)^2 dy."""
    spec = S.spec
    _check_window(spec, window)
    s = S.values
    ks = kernel_sum(spec)
    quad = kconv(spec, s * s) - 2 * s * kconv(spec, s) + s * s * ks + grad(S) ** 2
    return GridFunction(spec, quad * spec.dx / (2 * np.pi) - centering_constant(H))


def _check_window(spec: GridSpec, window):
    if window is not None and window < 2 * spec.dx:
        raise ValueError("quadrature window must cover at least 2 dx")


@dataclass(eq=False)
class NonlocalOperator:
    """w -> Xi w = (1/pi) p.v. int (e^{S(y) - S(x)} - 1)(w(y) - w(x)) / (y - x)^2 dy."""

    eps: float
    S: GridFunction
    method: str = "fft"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def spec(self) -> GridSpec:
        return self.S.spec

    def _pre(self):
        if not self._cache:
            s = self.S.values
            E = np.exp(s)
            self._cache.update(E=E, Einv=np.exp(-s), KE=kconv(self.spec, E), dS=grad(self.S))
        return self._cache

    def apply_array(self, w: np.ndarray) -> np.ndarray:
        """Apply to grid samples along the last axis (any leading shape)."""
        spec = self.spec
        c = self._pre()
        if self.method == "direct":
            w = np.atleast_2d(w)
            return np.squeeze(np.vstack([self._direct(row) for row in w]))
        wf = np.fft.rfft(w, axis=-1)
        Kh = _kernel_rfft(spec)
        Kw = np.fft.irfft(wf * Kh, n=spec.N, axis=-1)
        KEw = kconv(spec, c["E"] * w)
        k = 2j * np.pi * np.arange(spec.N // 2 + 1) / spec.L
        k[-1] = 0.0
        dw = np.fft.irfft(wf * k, n=spec.N, axis=-1)
        total = c["Einv"] * (KEw - w * c["KE"]) - Kw + w * kernel_sum(spec) + c["dS"] * dw
        return total * spec.dx / np.pi

    def _direct(self, w: np.ndarray) -> np.ndarray:
        s = self.S.values
        c = self._pre()
        dw = _grad_array(self.spec, w)

        def integrand(ix, iy):
            return np.expm1(s[iy] - s[ix]) * (w[iy] - w[ix])

        return pv_direct(self.spec, integrand, c["dS"] * dw)

    def __call__(self, w: GridFunction) -> GridFunction:
        if w.spec != self.spec:
            raise ValueError("grid spec mismatch")
        return GridFunction(self.spec, self.apply_array(w.values))


def apply_Xi(op: NonlocalOperator, w: GridFunction) -> GridFunction:
    return op(w)


def zero_operator(spec: GridSpec) -> NonlocalOperator:
    return NonlocalOperator(0.0, GridFunction(spec, np.zeros(spec.N)))


@dataclass(eq=False)
class ChangeOfVariables:
    eps: float
    S: GridFunction
    xi_eps: GridFunction
    F_xi: GridFunction
    U: GridFunction
    V: GridFunction
    C_eps: float

    @property
    def spec(self) -> GridSpec:
        return self.S.spec

    @property
    def expS(self) -> GridFunction:
        return GridFunction(self.spec, np.exp(self.S.values))

    @property
    def expNegS(self) -> GridFunction:
        return GridFunction(self.spec, np.exp(-self.S.values))

    @property
    def Z(self) -> GridFunction:
        return self.U + self.V

    @property
    def g(self) -> GridFunction:
        """Multiplicative coefficient -F * xi_eps + Z_eps."""
        return self.Z - self.F_xi

    def operator(self) -> NonlocalOperator:
        return NonlocalOperator(self.eps, self.S)


def change_of_variables(noise: NoiseRealization, eps: float, kernels: KernelSet) -> ChangeOfVariables:
    xi_eps = mollify(noise, eps, kernels.mollifier)
    S = -kernels.convolve_G(xi_eps)
    H = build_H(kernels, eps)
    return ChangeOfVariables(
        eps=float(eps),
        S=S,
        xi_eps=xi_eps,
        F_xi=F_conv_field(kernels, xi_eps),
        U=compute_U(S, H),
        V=compute_V(S),
        C_eps=renorm_constant_spectral(kernels, eps),
    )


def operator_identity_residual(S: GridFunction, v: GridFunction) -> tuple[float, float]:
    """Max-norm of e^{-S} Lambda(e^S v) - [Lambda v + v Lambda S + Xi v + Ztilde v] and of the left side."""
    from .grid import half_laplacian

    lam = lambda f: half_laplacian(f.to_spectral()).to_physical().values  # noqa: E731
    E = np.exp(S.values)
    lhs = np.exp(-S.values) * lam(GridFunction(S.spec, E * v.values))
    Xi = NonlocalOperator(0.0, S)
    rhs = lam(v) + v.values * lam(S) + Xi.apply_array(v.values) + compute_Ztilde(S).values * v.values
    return float(np.max(np.abs(lhs - rhs))), float(np.max(np.abs(lhs)))
