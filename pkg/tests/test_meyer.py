from __future__ import annotations

import math
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import oracles
from fdecon.errors import CapacityError, PreconditionError
from fdecon.meyer import (
    FourierSeries,
    MeyerBasis,
    WaveletDecomposition,
    analyze,
    band_limit,
    evaluate_on_grid,
    meyer_window,
    scaling_hat,
    synthesize,
    wavelet_hat,
    wavelet_hat_abs,
)


def random_real_series(rng, mmax, degree=None):
    degree = mmax if degree is None else degree
    c = np.zeros(2 * mmax + 1, dtype=complex)
    pos = rng.normal(size=degree) + 1j * rng.normal(size=degree)
    c[mmax + 1 : mmax + 1 + degree] = pos
    c[mmax - degree : mmax] = np.conj(pos[::-1])
    c[mmax] = rng.normal()
    return FourierSeries(c)


# ------------------------------------------------------------- profiles


def test_window_endpoints_and_symmetry():
    x = np.linspace(0, 1, 101)
    assert meyer_window(0.0) == 0.0 and meyer_window(1.0) == 1.0
    assert_allclose(meyer_window(x) + meyer_window(1 - x), 1.0, atol=1e-14)
    assert meyer_window(-0.3) == 0.0 and meyer_window(1.4) == 1.0


def test_band_limited_profiles():
    w = np.linspace(-12, 12, 4001)
    psi = wavelet_hat_abs(w)
    phi = scaling_hat(w)
    aw = np.abs(w)
    assert np.all(psi[(aw < 2 * math.pi / 3) | (aw > 8 * math.pi / 3)] == 0)
    assert np.all(phi[aw > 4 * math.pi / 3] == 0)
    assert_allclose(np.abs(wavelet_hat(w)), psi, atol=1e-15)


def test_partition_of_unity():
    w = np.linspace(-40, 40, 8001)
    total = scaling_hat(w) ** 2 + sum(wavelet_hat_abs(w / 2.0**j) ** 2 for j in range(0, 8))
    assert_allclose(total, 1.0, atol=1e-12)


# ------------------------------------------------------------- coefficients


def test_wavelet_coeff_outside_band(basis):
    assert basis.wavelet_fourier_coeff(4, 0, 0) == 0
    assert basis.wavelet_fourier_coeff(4, 3, 2**6) == 0


def test_scaling_coeff_trivial_cases(basis):
    assert basis.scaling_fourier_coeff(0, 0, 0) == pytest.approx(1.0)
    assert basis.scaling_fourier_coeff(3, 0, 2**5) == 0


@pytest.fixture(scope="module")
def psi_5_7_20():
    return oracles.fourier_coeff_by_quadrature(5, 7, 20, npts=256)


def test_wavelet_coeff_matches_time_domain_quadrature(basis, psi_5_7_20):
    value = basis.wavelet_fourier_coeff(5, 7, 20)
    assert abs(value) <= 2 ** (-5 / 2) + 1e-15
    assert abs(value - psi_5_7_20) < 1e-9


def test_conjugated_quadrature_form(basis, psi_5_7_20):
    # int e^{+2 pi i m t} conj(psi_jk) dt is the conjugate of our psi_mjk
    t = np.arange(256) / 256
    h = oracles.periodized(5, 7, t)
    other = np.mean(np.exp(2j * math.pi * 20 * t) * np.conj(h))
    assert abs(other - np.conj(basis.wavelet_fourier_coeff(5, 7, 20))) < 1e-9


def test_scaling_coeff_matches_time_domain_quadrature(basis):
    oracle = oracles.fourier_coeff_by_quadrature(4, 5, 3, scaling=True, npts=128)
    assert abs(basis.scaling_fourier_coeff(4, 5, 3) - oracle) < 1e-8


def test_capacity_and_translation_errors():
    small = MeyerBasis(max_level=4)
    with pytest.raises(CapacityError):
        small.wavelet_fourier_coeff(5, 0, 20)
    with pytest.raises(PreconditionError):
        small.wavelet_fourier_coeff(3, 8, 4)


@given(st.integers(0, 9), st.data())
def test_magnitude_bound(j, data):
    basis = MeyerBasis(12)
    k = data.draw(st.integers(0, 2**j - 1))
    m = np.arange(-(2 ** (j + 3)), 2 ** (j + 3) + 1)
    vals = basis.wavelet_fourier_coeff(j, k, m)
    assert np.all(np.abs(vals) <= 2 ** (-j / 2) * (1 + 1e-14))
    # the k-dependence is a unit phase linear in k m / 2^j
    base = basis.wavelet_fourier_coeff(j, 0, m)
    assert_allclose(vals, base * np.exp(-2j * math.pi * m * k / 2**j), atol=1e-15)


# ------------------------------------------------------------- bands


def test_band_examples(basis):
    assert list(basis.band(0).indices) == [-1, 1]
    b3 = basis.band(3).indices
    assert sorted(np.abs(b3).tolist()) == sorted(list(range(3, 11)) * 2)
    sc = basis.scaling_band(3).indices
    assert sc.min() == -5 and sc.max() == 5


@pytest.mark.parametrize("j", range(0, 12))
def test_band_membership(basis, j):
    idx = basis.band(j).indices
    assert 0 not in idx
    assert np.all(np.abs(idx) >= 2**j / 3) and np.all(np.abs(idx) <= 2 ** (j + 2) / 3)
    # exactly the m with a nonzero coefficient
    m = np.arange(-(2 ** (j + 2)), 2 ** (j + 2) + 1)
    nz = m[np.abs(basis.wavelet_fourier_coeff(j, 0, m)) > 0]
    assert_allclose(np.sort(nz), np.sort(idx))
    if j >= 3:
        assert 1.5 * 2**j < len(idx) < 2.5 * 2**j


def test_bands_overlap_only_neighbours(basis):
    sets = [set(basis.band(j).indices.tolist()) for j in range(10)]
    for j in range(10):
        for jj in range(j + 2, 10):
            assert not sets[j] & sets[jj]


# ------------------------------------------------------------- transforms


def test_analyze_zero(basis):
    w = analyze(FourierSeries.zeros(band_limit(2, 6)), 2, 6, basis)
    assert w.energy() == 0


def test_analyze_single_wavelet(basis):
    j0, J = 2, 7
    mmax = band_limit(j0, J)
    m = np.arange(-mmax, mmax + 1)
    f = FourierSeries(basis.wavelet_fourier_coeff(5, 2, m))
    w = analyze(f, j0, J, basis)
    target = WaveletDecomposition.zeros(j0, J)
    target.level(5)[2] = 1.0
    assert_allclose(w.a, target.a, atol=1e-10)
    for got, want in zip(w.b, target.b):
        assert_allclose(got, want, atol=1e-10)


def test_round_trip_trig_polynomial(basis):
    rng = np.random.default_rng(5)
    j0, J = 3, 9  # V_9 holds every |m| <= 2^9 / 3 > 100
    f = random_real_series(rng, band_limit(j0, J), degree=100)
    back = synthesize(analyze(f, j0, J, basis), f.mmax, basis)
    err = np.linalg.norm(back.coeffs - f.coeffs) / np.linalg.norm(f.coeffs)
    assert err < 1e-9


def test_insufficient_bandwidth_names_requirement(basis):
    with pytest.raises(PreconditionError, match=str(band_limit(2, 6))):
        analyze(FourierSeries.zeros(5), 2, 6, basis)
    with pytest.raises(PreconditionError):
        synthesize(WaveletDecomposition.zeros(2, 6), 5, basis)


def test_real_input_gives_real_coefficients(basis):
    rng = np.random.default_rng(2)
    f = random_real_series(rng, band_limit(1, 6))
    w = analyze(f, 1, 6, basis)
    assert w.a.dtype == float and all(bj.dtype == float for bj in w.b)
    g = FourierSeries(f.coeffs * 1j)  # purely imaginary function: complex coefficients kept
    assert np.iscomplexobj(analyze(g, 1, 6, basis).a)


def test_gram_matrix_identity(basis):
    j0, J = 2, 7
    mmax = band_limit(j0, J)
    m = np.arange(-mmax, mmax + 1)
    rows = [basis.scaling_fourier_coeff(j0, k, m) for k in range(2**j0)]
    for j in range(j0, J):
        rows += [basis.wavelet_fourier_coeff(j, k, m) for k in range(2**j)]
    B = np.array(rows)
    gram = B @ B.conj().T
    assert np.max(np.abs(gram - np.eye(len(rows)))) < 1e-10


def test_parseval_with_out_of_band_energy(basis):
    rng = np.random.default_rng(9)
    f = random_real_series(rng, 200)
    j0, J = 2, 6
    w = analyze(f, j0, J, basis)
    proj = synthesize(w, f.mmax, basis)
    assert abs(f.energy() - (w.energy() + (f - proj).energy())) < 1e-10 * f.energy()


def test_parseval_against_grid_quadrature():
    rng = np.random.default_rng(4)
    f = random_real_series(rng, 30)
    vals = evaluate_on_grid(f, 4096)
    assert abs(np.mean(vals**2) - f.energy()) < 1e-12 * f.energy()


def test_concurrent_tables_identical():
    rng = np.random.default_rng(0)
    f = random_real_series(rng, band_limit(3, 10))
    ref = analyze(f, 3, 10, MeyerBasis())
    shared = MeyerBasis()
    results = [None] * 8

    def work(i):
        results[i] = analyze(f, 3, 10, shared)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for r in results:
        assert np.array_equal(r.a, ref.a) and all(np.array_equal(x, y) for x, y in zip(r.b, ref.b))


# ------------------------------------------------------------- grid evaluation


def test_grid_constant_and_cosine():
    assert_allclose(evaluate_on_grid(FourierSeries.from_dict({0: 1.0}), 16), np.ones(16))
    N = 64
    got = evaluate_on_grid(FourierSeries.from_dict({1: 0.5, -1: 0.5}), N)
    assert_allclose(got, np.cos(2 * math.pi * np.arange(N) / N), atol=1e-15)


def test_grid_matches_direct_summation():
    rng = np.random.default_rng(8)
    f = random_real_series(rng, 40)
    t = np.arange(1024) / 1024
    direct = oracles.direct_series(dict(zip(f.frequencies.tolist(), f.coeffs)), t)
    assert_allclose(evaluate_on_grid(f, 1024), direct.real, atol=1e-10)


def test_grid_aliasing_error():
    with pytest.raises(PreconditionError):
        evaluate_on_grid(FourierSeries.zeros(10), 20)


@given(st.integers(0, 3), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_round_trip_property(j0, extra, seed):
    basis = MeyerBasis(10)
    J = j0 + extra
    rng = np.random.default_rng(seed)
    w = WaveletDecomposition(j0, J, rng.normal(size=2**j0), [rng.normal(size=2**j) for j in range(j0, J)])
    f = synthesize(w, band_limit(j0, J), basis)
    assert f.is_real()
    back = analyze(f, j0, J, basis)
    assert_allclose(back.a, w.a, atol=1e-12)
    for x, y in zip(back.b, w.b):
        assert_allclose(x, y, atol=1e-12)
