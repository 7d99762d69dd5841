"""Periodic Gaussian white noise and its mollifications."""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate

from .grid import GridFunction, GridSpec, SpectralFunction, periodize


def _bump(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    """Unit-mass smooth even bump supported in [-1, 1].

    Only ``standard_bump`` (c * exp(-1 / (1 - x^2))) is available.
    """

    shape: str = "standard_bump"

    def __post_init__(self):
        if self.shape != "standard_bump":
            raise ValueError(f"unknown mollifier shape {self.shape!r}")

    @cached_property
    def normalization(self) -> float:
        mass, err = integrate.quad(lambda t: float(_bump(np.array(t))), -1, 1, epsabs=1e-15, epsrel=1e-13, limit=200)
        if err > 1e-10:
            raise RuntimeError("mollifier normalization did not reach 1e-10")
        return 1.0 / mass

    support: float = field(default=1.0, init=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.normalization * _bump(x)

    def scaled(self, eps: float):
        """rho_eps(x) = rho(x / eps) / eps."""
        return lambda x: self(np.asarray(x) / eps) / eps

    @cached_property
    def _gauss_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        t, w = np.polynomial.legendre.leggauss(400)
        return t, w * self(t)

    def fourier(self, omega) -> np.ndarray:
        """Continuous transform int rho(x) exp(-i omega x) dx (real since rho is even)."""
        t, w = self._gauss_nodes
        omega = np.asarray(omega, dtype=float)
        return np.cos(np.multiply.outer(omega, t)) @ w

    def l2_norm_sq(self) -> float:
        t, w = self._gauss_nodes
        return float(w @ self(t))


STANDARD_BUMP = MollifierSpec()


@dataclass(eq=False)
class NoiseRealization:
    seed: int
    spec: GridSpec
    xi: SpectralFunction
    mollified: dict = field(default_factory=dict, repr=False)

    def physical(self) -> GridFunction:
        return self.xi.to_physical()


def white_noise_coefficients(seed: int, spec: GridSpec) -> np.ndarray:
    """Fourier coefficients of periodic white noise, E|xi_k|^2 = 1/L for every k."""
    rng = np.random.default_rng(seed)
    N, L = spec.N, spec.L
    z = rng.standard_normal(N)
    c = np.empty(N, dtype=complex)
    c[0] = z[0] / np.sqrt(L)
    c[N // 2] = z[1] / np.sqrt(L)
    half = N // 2 - 1
    pos = (z[2 : 2 + half] + 1j * z[2 + half :]) / np.sqrt(2 * L)
    c[1 : N // 2] = pos
    c[N // 2 + 1 :] = np.conj(pos[::-1])
    return c


def sample_white_noise(seed: int, spec: GridSpec) -> NoiseRealization:
    return NoiseRealization(int(seed), spec, SpectralFunction(spec, white_noise_coefficients(seed, spec)))


def zero_noise(spec: GridSpec, seed: int = 0) -> NoiseRealization:
    return NoiseRealization(seed, spec, SpectralFunction(spec, np.zeros(spec.N, dtype=complex)))


def mollifier_grid(spec: GridSpec, eps: float, mollifier: MollifierSpec = STANDARD_BUMP) -> GridFunction:
    """Periodized rho_eps, rescaled to unit discrete mass so the k = 0 mode is preserved exactly."""
    rho = periodize(mollifier.scaled(eps), spec, eps * mollifier.support)
    return rho * (1.0 / rho.integral())


def check_eps(spec: GridSpec, eps: float, mollifier: MollifierSpec = STANDARD_BUMP) -> None:
    if not (0 < eps <= 1):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if eps * mollifier.support >= spec.L / 2:
        raise ValueError("mollifier support does not fit in half a period")
    if eps < 4 * spec.dx:
        warnings.warn(f"eps={eps} is below 4*dx={4 * spec.dx:.3g}; mollifier is under-resolved", stacklevel=3)


def mollify(noise: NoiseRealization, eps: float, mollifier: MollifierSpec = STANDARD_BUMP) -> GridFunction:
    """xi_eps = rho_eps * xi, computed once per eps and cached on the realization."""
    key = (float(eps), mollifier.shape)
    if key not in noise.mollified:
        check_eps(noise.spec, eps, mollifier)
        rho = mollifier_grid(noise.spec, eps, mollifier).to_spectral()
        coeffs = noise.xi.coeffs * rho.coeffs * noise.spec.L
        noise.mollified[key] = SpectralFunction(noise.spec, coeffs).to_physical()
    return noise.mollified[key]


def regularity_exponent(f, fit_range: tuple[int, int] | None = None) -> float:
    """Fitted Besov exponent of a field; see ``analysis.besov_norm``."""
    from .analysis import besov_norm

    est = besov_norm(f, 0.0, fit_range=fit_range)
    if est.norm == 0:
        raise ValueError("regularity of the zero field is undefined")
    return est.fitted_exponent


_HEADER = struct.Struct("<dqQ")


def save_realization(noise: NoiseRealization, path: str | Path) -> None:
    """Binary dump: little-endian (L float64, N int64, seed uint64) then N complex128 coefficients."""
    spec = noise.spec
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(spec.L, spec.N, noise.seed))
        fh.write(np.asarray(noise.xi.coeffs, dtype="<c16").tobytes())


def load_realization(path: str | Path) -> NoiseRealization:
    data = Path(path).read_bytes()
    L, N, seed = _HEADER.unpack_from(data)
    spec = GridSpec(L, N)
    coeffs = np.frombuffer(data, dtype="<c16", count=N, offset=_HEADER.size)
    return NoiseRealization(seed, spec, SpectralFunction(spec, coeffs))
