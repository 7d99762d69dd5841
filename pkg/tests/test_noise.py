import math
import struct
import warnings

import numpy as np
import pytest
from scipy import integrate

from fracpam.analysis import besov_norm, block_indices, dyadic_blocks, fit_exponent
from fracpam.grid import GridFunction, GridSpec, SpectralFunction
from fracpam.noise import (
    STANDARD_BUMP,
    MollifierSpec,
    load_realization,
    mollifier_grid,
    mollify,
    regularity_exponent,
    sample_white_noise,
    save_realization,
    white_noise_coefficients,
    zero_noise,
)


def test_mollifier_unit_mass_even_support():
    rho = STANDARD_BUMP
    mass, _ = integrate.quad(lambda t: float(rho(np.array(t))), -1, 1, epsabs=1e-14)
    assert abs(mass - 1) < 1e-10
    x = np.linspace(-1.5, 1.5, 301)
    assert np.allclose(rho(x), rho(-x))
    assert np.all(rho(x[np.abs(x) >= 1]) == 0)
    assert np.all(rho(x) >= 0)


def test_unknown_mollifier_shape():
    with pytest.raises(ValueError):
        MollifierSpec("gaussian")


@pytest.mark.parametrize("omega", [0.0, 0.7, 3.0, 11.0])
def test_mollifier_fourier_matches_quadrature(omega):
    val, _ = integrate.quad(lambda t: float(STANDARD_BUMP(np.array(t))) * math.cos(omega * t), -1, 1, epsabs=1e-13)
    assert STANDARD_BUMP.fourier(omega) == pytest.approx(val, abs=1e-12)


def test_mollifier_grid_mass():
    s = GridSpec(8.0, 2**10)
    for eps in (0.05, 0.2, 1.0):
        assert mollifier_grid(s, eps).integral() == pytest.approx(1.0, abs=1e-13)


def test_same_seed_same_realization():
    s = GridSpec(8.0, 256)
    a = sample_white_noise(42, s).xi.coeffs
    b = sample_white_noise(42, s).xi.coeffs
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_white_noise(43, s).xi.coeffs)


def test_coefficient_structure():
    s = GridSpec(8.0, 64)
    c = white_noise_coefficients(3, s)
    assert c[0].imag == 0 and c[s.nyquist].imag == 0
    k = np.arange(1, s.nyquist)
    assert np.allclose(c[-k], np.conj(c[k]))


def test_variance_of_total_mass():
    # int xi over one period = L xi_0 has variance L; xi_0 has mean zero
    s = GridSpec(8.0, 16)
    n = 10_000
    m = np.array([white_noise_coefficients(seed, s)[0].real * s.L for seed in range(n)])
    var = m.var(ddof=1)
    se_var = var * math.sqrt(2 / (n - 1))
    assert abs(var - s.L) <= 3 * se_var
    assert abs(m.mean()) <= 3 * m.std(ddof=1) / math.sqrt(n)


def test_mode_variance_and_gaussian_fourth_moment():
    s = GridSpec(8.0, 64)
    n = 4000
    re = np.array([white_noise_coefficients(seed, s)[5].real for seed in range(n)]) * math.sqrt(2 * s.L)
    assert abs(np.mean(re**2) - 1) < 4 * math.sqrt(2 / n)
    kurt = np.mean(re**4) / np.mean(re**2) ** 2
    assert abs(kurt - 3) < 4 * math.sqrt(96 / n)


def test_pairing_covariance():
    # E xi(phi) xi(psi) = int phi psi for in-period supports
    s = GridSpec(8.0, 128)
    x = s.x
    phi = np.exp(-((x - 3.0) ** 2) / 0.5)
    psi = np.exp(-((x - 3.6) ** 2) / 0.8)
    target = np.sum(phi * psi) * s.dx
    n = 10_000
    prods = np.empty(n)
    for seed in range(n):
        xi = sample_white_noise(seed, s).physical().values
        prods[seed] = (xi @ phi) * (xi @ psi) * s.dx**2
    assert abs(prods.mean() - target) <= 4 * prods.std(ddof=1) / math.sqrt(n)


def test_mollified_point_variance():
    # E xi_eps(0)^2 = sum_k |rhohat(eps k')|^2 / L
    s = GridSpec(8.0, 2**12)
    eps = 0.05
    target = float(np.sum(STANDARD_BUMP.fourier(eps * s.angular) ** 2) / s.L)
    n = 10_000
    vals = np.array([mollify(sample_white_noise(seed, s), eps).values[0] ** 2 for seed in range(n)])
    assert abs(vals.mean() - target) <= 3 * vals.std(ddof=1) / math.sqrt(n)
    # small-eps asymptote ||rho||^2 / eps
    assert target == pytest.approx(STANDARD_BUMP.l2_norm_sq() / eps, rel=1e-3)


def test_zero_noise_mollifies_to_zero():
    s = GridSpec(8.0, 256)
    assert np.all(mollify(zero_noise(s), 0.2).values == 0)


def test_mollify_preserves_mean_and_caches():
    s = GridSpec(8.0, 512)
    nz = sample_white_noise(5, s)
    xe = mollify(nz, 0.1)
    assert xe.integral() == pytest.approx(nz.physical().integral(), abs=1e-12)
    assert mollify(nz, 0.1) is xe


def test_mollify_eps_checks():
    s = GridSpec(8.0, 256)
    nz = sample_white_noise(0, s)
    with pytest.raises(ValueError):
        mollify(nz, 0.0)
    with pytest.raises(ValueError):
        mollify(nz, 1.5)
    with pytest.warns(UserWarning):
        mollify(nz, 3 * s.dx)


def test_binary_round_trip(tmp_path):
    s = GridSpec(8.0, 64)
    nz = sample_white_noise(2**63 + 5, s)
    p = tmp_path / "xi.bin"
    save_realization(nz, p)
    data = p.read_bytes()
    assert len(data) == 24 + 16 * s.N
    assert struct.unpack_from("<dqQ", data) == (8.0, 64, 2**63 + 5)
    back = load_realization(p)
    assert back.seed == nz.seed and back.spec == s
    assert np.array_equal(back.xi.coeffs, nz.xi.coeffs)


def test_regularity_exponent_sentinels():
    s = GridSpec(2 * np.pi, 256)
    with pytest.raises(ValueError):
        regularity_exponent(GridFunction(s, np.zeros(s.N)))
    assert regularity_exponent(GridFunction(s, np.cos(s.x))) == math.inf


def test_mollified_noise_keeps_low_block_exponent():
    s = GridSpec(8.0, 2**14)
    eps = 0.0125
    lo, hi = 3, 5  # rhohat stays above 0.95 on these blocks
    assert STANDARD_BUMP.fourier(eps * 2.0 ** (hi + 1)) > 0.95
    raw, moll = [], []
    for seed in range(40):
        nz = sample_white_noise(seed, s)
        js, a, _ = dyadic_blocks(nz.xi)
        _, b, _ = dyadic_blocks(mollify(nz, eps))
        raw.append(np.log2(a))
        moll.append(np.log2(b))
    e_raw = fit_exponent(js, 2.0 ** np.mean(raw, 0), (lo, hi))
    e_moll = fit_exponent(js, 2.0 ** np.mean(moll, 0), (lo, hi))
    assert abs(e_raw - e_moll) < 0.1


def test_block_indices_cover_nonzero_modes():
    s = GridSpec(8.0, 64)
    idx = block_indices(s)
    assert idx[0] < -1000 and np.all(idx[1:] > -1000)
    # mode k and -k share a block
    assert np.array_equal(idx[1 : s.nyquist], idx[-1 : -s.nyquist : -1])


def test_no_warning_for_resolved_eps():
    s = GridSpec(8.0, 2**10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mollify(sample_white_noise(1, s), 0.1)


def test_mollified_noise_converges_in_negative_besov():
    s = GridSpec(8.0, 2**12)
    ladder = (0.4, 0.2, 0.1, 0.05)
    dist = np.zeros(len(ladder))
    for seed in range(10):
        nz = sample_white_noise(seed, s)
        for i, e in enumerate(ladder):
            diff = mollify(nz, e).to_spectral().coeffs - nz.xi.coeffs
            dist[i] += besov_norm(SpectralFunction(s, diff), -0.6).norm
    assert np.all(np.diff(dist) < 0)


def test_mollifier_suppresses_high_blocks():
    s = GridSpec(8.0, 2**12)
    eps = 0.1
    js, raw, _ = dyadic_blocks(sample_white_noise(0, s).xi)
    _, moll, _ = dyadic_blocks(mollify(sample_white_noise(0, s), eps))
    high = 2.0**js > 4 / eps
    envelope = np.array([np.max(np.abs(STANDARD_BUMP.fourier(eps * 2.0 ** np.array([j, j + 1])))) for j in js])
    assert np.all(moll[high] <= 3 * envelope[high] * raw[high])
