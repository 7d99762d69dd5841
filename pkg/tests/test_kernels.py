import csv
import math

import numpy as np
import pytest
from scipy import integrate, interpolate

from fracpam.analysis import besov_norm
from fracpam.experiments import block_normalized_field
from fracpam.grid import GridFunction, GridSpec, half_laplacian
from fracpam.kernels import (
    G,
    F_conv_field,
    build_G,
    build_H,
    integral_tail_bound,
    remainder_F,
    renorm_constant,
    renorm_constant_integral,
    renorm_constant_spectral,
    square,
    write_renorm_csv,
)
from fracpam.noise import STANDARD_BUMP


def test_G_values():
    assert G(0.25) == pytest.approx(math.log(0.25) / math.pi, abs=1e-15)
    assert G(0.25) == pytest.approx(-0.44127, abs=1e-5)
    assert G(1.5) == 0 and G(1.0) == 0
    x = np.linspace(-1.2, 1.2, 97)
    assert np.array_equal(G(x), G(-x))


def test_G_per_exact_on_inner_nodes(kernels_small):
    spec = kernels_small.spec
    xc = spec.x_centered
    inner = (np.abs(xc) > 0) & (np.abs(xc) <= 0.5)
    assert np.array_equal(kernels_small.G_per.values[inner], np.log(np.abs(xc[inner])) / np.pi)
    assert np.all(kernels_small.G_per.values[np.abs(xc) >= 1] == 0)


def test_singular_weight_integrates_log():
    # trapezoid of G over its support with the corrected node-0 weight vs the exact integral
    exact, _ = integrate.quad(lambda y: float(G(y)), 0, 1, points=[0.5], limit=200, epsabs=1e-14)
    errs = []
    for N in (2**10, 2**12):
        ks = build_G(GridSpec(8.0, N))
        errs.append(abs(ks.G_quadrature.integral() - 2 * exact))
    assert errs[1] < 1e-8
    assert errs[1] < errs[0] / 8


def test_H_even_and_peaked(kernels_small):
    H = build_H(kernels_small, 0.1).values
    assert np.max(np.abs(H - np.roll(H[::-1], 1))) <= 1e-10 * np.max(np.abs(H))
    assert np.all(H[0] >= H)


def test_H_warns_when_under_resolved(kernels_small):
    with pytest.warns(UserWarning):
        build_H(kernels_small, 2 * kernels_small.spec.dx)


def test_renorm_methods_agree():
    ks = build_G(GridSpec(8.0, 2**14))
    for eps in (0.2, 0.1, 0.05):
        r = renorm_constant(ks, eps)
        assert r.relative_gap <= 1e-3


def test_integrand_at_zero_is_nonnegative(kernels_small):
    H = build_H(kernels_small, 0.1).values
    dx = kernels_small.spec.dx
    assert -(H[1] - 2 * H[0] + H[-1]) / dx**2 / math.pi >= 0


def test_doubling_M_within_tail_bound(kernels_small):
    a = renorm_constant_integral(kernels_small, 0.1, M=16)
    b = renorm_constant_integral(kernels_small, 0.1, M=32)
    assert abs(a - b) < integral_tail_bound(kernels_small, 0.1, 16)


def test_M_below_4_rejected(kernels_small):
    with pytest.raises(ValueError):
        renorm_constant_integral(kernels_small, 0.1, M=3)


def _oracle_C1(L=8.0):
    """C_1 from adaptive quadrature only: G_1 = G * rho, H = G_1 * G_1, then the lattice-kernel integral."""
    rho = lambda s: float(STANDARD_BUMP(np.array(s)))  # noqa: E731
    g = lambda s: float(G(np.array(s)))  # noqa: E731

    def G1(x):
        pts = [p for p in (x, x - 0.5, x + 0.5, x - 1, x + 1) if -1 < p < 1]
        return integrate.quad(lambda s: g(x - s) * rho(s), -1, 1, points=pts, limit=200, epsabs=1e-13)[0]

    xs = np.linspace(0, 2, 401)
    g1 = np.array([G1(x) for x in xs])
    sp1 = interpolate.CubicSpline(np.r_[-xs[:0:-1], xs], np.r_[g1[:0:-1], g1])
    G1f = lambda x: np.where(np.abs(x) < 2, sp1(np.clip(x, -2, 2)), 0.0)  # noqa: E731

    def conv(q):
        return integrate.quad(lambda s: float(G1f(s) * G1f(q - s)), max(-2, q - 2), min(2, q + 2), limit=200, epsabs=1e-12)[0]

    qs = np.linspace(0, 4, 401)
    h = np.array([conv(q) for q in qs])
    sph = interpolate.CubicSpline(np.r_[-qs[:0:-1], qs], np.r_[h[:0:-1], h])

    def Hp(y):
        return float(sph(np.clip(y, -4, 4)) * (abs(y) <= 4) + sph(np.clip(y - L, -4, 4)) * (abs(y - L) <= 4))

    H0, Hpp = Hp(0.0), float(sph(0.0, 2))

    def integrand(y):
        if y < 1e-6 or L - y < 1e-6:
            return -Hpp
        return 2 * (H0 - Hp(y)) * (math.pi / L) ** 2 / math.sin(math.pi * y / L) ** 2

    return integrate.quad(integrand, 0, L, points=[4.0], limit=400, epsabs=1e-12)[0] / (2 * math.pi)


def test_C1_matches_quadrature_oracle(kernels_mid):
    oracle = _oracle_C1()
    assert renorm_constant_spectral(kernels_mid, 1.0) == pytest.approx(oracle, rel=1e-3)


def test_C_increasing_along_ladder():
    ks = build_G(GridSpec(8.0, 2**13))
    vals = [renorm_constant_spectral(ks, e) for e in (0.4, 0.2, 0.1, 0.05, 0.025)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    drift = [v - math.log(1 / e) / math.pi for v, e in zip(vals, (0.4, 0.2, 0.1, 0.05, 0.025))]
    assert max(drift) - min(drift) < 0.05


def test_F_conv_constant(kernels_small):
    spec = kernels_small.spec
    out = F_conv_field(kernels_small, GridFunction(spec, np.full(spec.N, 2.5)))
    assert np.allclose(out.values, -2.5, atol=1e-12)


def test_F_conv_single_mode(kernels_mid):
    spec = kernels_mid.spec
    w = 2 * np.pi / spec.L
    g = GridFunction(spec, np.cos(w * spec.x))
    # Ghat_1 = (1/L) int G(x) cos(w x) dx (G even, real)
    Ghat1 = 2 * integrate.quad(lambda y: float(G(y)) * math.cos(w * y), 0, 1, points=[0.5], limit=200, epsabs=1e-14)[0] / spec.L
    expected = (-w * spec.L * Ghat1 - 1) * np.cos(w * spec.x)
    assert np.max(np.abs(F_conv_field(kernels_mid, g).values - expected)) < 1e-6


def test_F_conv_linear(kernels_small, rng):
    spec = kernels_small.spec
    a = GridFunction(spec, rng.standard_normal(spec.N))
    b = GridFunction(spec, rng.standard_normal(spec.N))
    lhs = F_conv_field(kernels_small, a * 1.3 + b).values
    rhs = 1.3 * F_conv_field(kernels_small, a).values + F_conv_field(kernels_small, b).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def _periodic_images(x, L):
    """sum over m != 0 of F(x + m L) = (1/pi) int G(y) [K_L(y - x) - (y - x)^-2] dy, for |x| < 1."""

    def f(y):
        d = y - x
        lattice = (math.pi / L) ** 2 / math.sin(math.pi * d / L) ** 2 if d != 0 else 0.0
        return float(G(y)) * (lattice - (1 / d**2 if d != 0 else 0.0))

    # the bracket tends to (pi/L)^2 / 3 as d -> 0; quad never samples d = 0 exactly
    return integrate.quad(f, -1, 1, points=[x, -0.5, 0.5], limit=200, epsabs=1e-13)[0] / math.pi


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("x", [0.3, 0.75, 1.5, 3.0])
def test_F_per_matches_direct_remainder(x):
    ks = build_G(GridSpec(8.0, 2**14))
    j = int(round(x / ks.spec.dx))
    xj = j * ks.spec.dx
    expected = remainder_F(xj) + _periodic_images(xj, ks.spec.L)
    assert ks.F_per.values[j] == pytest.approx(expected, rel=1e-3, abs=1e-6)


def test_weak_identity_lambda_G():
    # <Lambda G, phi> = phi(0) + <F, phi> for a smooth test function supported in one period
    ks = build_G(GridSpec(8.0, 2**14))
    spec = ks.spec
    xc = spec.x_centered
    phi = np.where(np.abs(xc) < 2, np.exp(-1 / np.maximum(1 - (xc / 2) ** 2, 1e-300)), 0.0) * (1 + 0.3 * xc)
    lam_phi = half_laplacian(GridFunction(spec, phi).to_spectral()).to_physical().values
    lhs = float(np.sum(ks.G_quadrature.values * lam_phi) * spec.dx)
    rhs = phi[0] + float(np.sum(ks.F_per.values * phi) * spec.dx)
    assert lhs == pytest.approx(rhs, rel=1e-3)


def test_green_schauder_ratio_bounded():
    spec = GridSpec(8.0, 2**12)
    ks = build_G(spec)
    ratios = []
    for seed in range(100):
        f = block_normalized_field(spec, -0.6, seed).to_physical()
        ratios.append(besov_norm(ks.convolve_G(f), 0.4).norm / besov_norm(f, -0.6).norm)
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios))
    assert ratios.max() < 1.5 * np.median(ratios)


def test_square_is_second_difference():
    K = lambda a: a**2  # noqa: E731
    # K(a) - K(a - y) - K(a - z) + K(a - y - z) = 2 y z for a quadratic
    assert square(K, 0.7, 0.3, -1.1) == pytest.approx(2 * 0.3 * -1.1)


def test_write_renorm_csv(tmp_path, kernels_small):
    rows = [renorm_constant(kernels_small, e, M=8) for e in (0.4, 0.2)]
    p = tmp_path / "c.csv"
    write_renorm_csv(rows, p)
    raw = p.read_bytes()
    assert b"\r\n" not in raw
    table = list(csv.reader(raw.decode().splitlines()))
    assert table[0] == ["eps", "C_spectral", "C_integral", "asymptote", "difference"]
    assert float(table[1][1]) == rows[0].value_spectral


def test_green_convolution_gains_one_derivative():
    spec = GridSpec(8.0, 2**12)
    ks = build_G(spec)
    f = block_normalized_field(spec, -0.6, 0)
    g = ks.convolve_G(f.to_physical())
    assert besov_norm(g, 0.4).fitted_exponent == pytest.approx(0.4, abs=0.1)
