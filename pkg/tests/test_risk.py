from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fdecon.errors import HypothesisError, ParameterError, PreconditionError
from fdecon.estimator import besov_norm, make_plan
from fdecon.kernels import KernelDecay, SamplingDesign, make_kernel
from fdecon.meyer import FourierSeries, analyze, band_limit
from fdecon.risk import (
    BesovParams,
    PlanSpec,
    RiskCurve,
    RiskPoint,
    classify,
    l2_risk,
    make_test_function,
    predicted_rate,
    rate_slope,
    risk_curve,
    seed_for_n,
)


def point(n, mean, se=0.0, degenerate=False):
    return RiskPoint(float(n), float(mean), float(se), 200, 0, 1, degenerate)


# ------------------------------------------------------------- predictions


def test_dense_prediction():
    r = predicted_rate(BesovParams(2, 2, 2), KernelDecay(1.0, 0.0))
    assert r.case == "dense" and r.exponent == pytest.approx(4 / 7) and r.log_factor == 0


def test_sparse_prediction():
    r = predicted_rate(BesovParams(1, 1, 1), KernelDecay(3.0, 0.0))
    assert r.case == "sparse" and r.exponent == pytest.approx(1 / 7) and r.log_factor == 0
    n = np.array([1e3, 1e6])
    assert_allclose(r.scale(n), (np.log(n) / n) ** (1 / 7))


def test_supersmooth_prediction():
    bp = BesovParams(1.0, 2, 2)  # s* = 1
    r = predicted_rate(bp, KernelDecay(1.0, 3.0, 2.0))
    assert r.case == "supersmooth" and r.exponent == pytest.approx(1.0) and r.axis == "ln n"
    assert r.scale(math.e**5) == pytest.approx(1 / 5)


def test_dense_log_factor_for_small_p():
    r = predicted_rate(BesovParams(3, 1.5, 2), KernelDecay(0.5, 0.0))
    assert r.case == "dense"
    assert r.log_factor == pytest.approx(2 * 0.5 / (1.5 * (6 + 2)))


@pytest.mark.parametrize("q,expected", [(1.0, 0.0), (3.0, 2 / 3), (math.inf, 1.0)])
def test_boundary_log_factor(q, expected):
    # nu = 1, p = 1: boundary when s* = 1, i.e. s = 3/2
    r = predicted_rate(BesovParams(1.5, 1.0, q), KernelDecay(1.0, 0.0))
    assert r.case == "boundary" and r.log_factor == pytest.approx(expected)
    assert r.exponent == pytest.approx(2 / 4)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 2.0, 3.0, math.inf])
@pytest.mark.parametrize("s", [0.6, 1.0, 1.5, 2.0, 3.0])
def test_classifier_grid(nu, p, s):
    bp = BesovParams(s, p, 2)
    lhs = nu * (2 - p) if not math.isinf(p) else -math.inf
    rhs = (p if not math.isinf(p) else 1.0) * bp.s_star
    got = classify(bp, KernelDecay(nu, 0.0))
    if math.isinf(p) or lhs < rhs - 1e-12:
        assert got == "dense"
    elif lhs > rhs + 1e-12:
        assert got == "sparse"
    else:
        assert got == "boundary"


@pytest.mark.parametrize("eps,case", [(-0.1, "sparse"), (0.0, "boundary"), (0.1, "dense")])
def test_classifier_both_sides_of_boundary(eps, case):
    assert classify(BesovParams(1.5 + eps, 1.0), KernelDecay(1.0, 0.0)) == case


def test_hypothesis_violation():
    with pytest.raises(HypothesisError, match="1/p"):
        predicted_rate(BesovParams(0.3, 1.0), KernelDecay(1.0, 0.0))
    with pytest.raises(ParameterError):
        BesovParams(1.0, 0.5)
    assert not BesovParams(0.4, 2).upper_valid()
    assert predicted_rate(BesovParams(0.4, 2), KernelDecay(1.0, 0.0)).upper_bound_valid is False


# ------------------------------------------------------------- test functions


def test_trigpoly_example(basis):
    f = make_test_function("trigpoly", BesovParams(1, 2, 2, A=100.0))
    nz = f.frequencies[np.abs(f.coeffs) > 1e-12]
    assert nz.min() == -8 and nz.max() == 8
    assert_allclose(f.coeffs[np.abs(f.frequencies) <= 8], 1.0, atol=1e-10)
    assert f.is_real()
    small = make_test_function("trigpoly", BesovParams(1, 2, 2, A=0.5))
    J = 11
    assert besov_norm(analyze(small, 0, J, basis), 1, 2, 2) <= 0.5


def test_dense_example(basis):
    bp = BesovParams(2, 2, 2, A=1.0)
    f = make_test_function("besov_dense", bp, seed=1)
    w = analyze(f, 0, 11, basis)
    norm = besov_norm(w, 2, 2, 2)
    assert 1 - 2e-6 < norm <= 1.0
    for j, bj in zip(w.levels, w.b):
        mags = np.abs(bj)
        assert_allclose(mags, mags[0], rtol=1e-8)
    assert f.mmax == band_limit(0, 11) and f.is_real()


def test_sparse_example(basis):
    f = make_test_function("besov_sparse", BesovParams(1, 1, 1), seed=3)
    w = analyze(f, 0, 11, basis)
    for bj in w.b:
        assert np.sum(np.abs(bj) > 1e-10) == 1
    assert besov_norm(w, 1, 1, 1) <= 1.0


def test_seed_controls_signs():
    bp = BesovParams(2)
    a = make_test_function("besov_dense", bp, seed=1)
    b = make_test_function("besov_dense", bp, seed=1)
    c = make_test_function("besov_dense", bp, seed=2)
    assert np.array_equal(a.coeffs, b.coeffs) and not np.array_equal(a.coeffs, c.coeffs)


def test_bumps_in_ball(basis):
    bp = BesovParams(1, 2, 2, A=3.0)
    f = make_test_function("bumps", bp, max_level=8)
    assert besov_norm(analyze(f, 0, 9, basis), 1, 2, 2) <= 3.0
    assert f.energy() > 0


def test_unknown_kind():
    with pytest.raises(ParameterError):
        make_test_function("square", BesovParams(1))


# ------------------------------------------------------------- risk


def test_noiseless_full_band_is_exact():
    f = make_test_function("trigpoly", BesovParams(1, A=100.0), max_level=6)
    spec = PlanSpec("regular", d=0.0, j0=0, J=7)
    r = l2_risk(f, make_kernel("delta"), spec, 4096.0, 3, seed=0, noise_scale=0.0)
    assert r.mean < 1e-18


def test_tail_energy_only(basis):
    f = make_test_function("besov_dense", BesovParams(2), seed=4, max_level=9)
    spec = PlanSpec("regular", d=0.0, j0=0, J=5)
    r = l2_risk(f, make_kernel("delta"), spec, 4096.0, 2, seed=0, noise_scale=0.0)
    proj = analyze(f, 0, 5, basis)
    tail = f.energy() - proj.energy()
    assert r.mean == pytest.approx(tail, rel=1e-9, abs=1e-15)
    assert r.mean >= f.energy_above(band_limit(0, 5))


def test_linear_risk_closed_form(basis):
    n, j0, J = 2048.0, 2, 6
    f = make_test_function("besov_dense", BesovParams(2), seed=5, max_level=8)
    spec = PlanSpec("regular", d=0.0, j0=j0, J=J)
    r = l2_risk(f, make_kernel("delta"), spec, n, 1000, seed=11)
    bias = f.energy() - analyze(f, j0, J, basis).energy()
    expected = 2**J / n + bias
    assert abs(r.mean - expected) < 3 * r.se


# With nu = 0 and d = 1 the threshold equals the mean block noise energy, so the
# delta kernel's risk stays flat near 0.68; that pairing is left out on purpose.
@pytest.mark.parametrize("name,d", [("wave", 1.0), ("boxcar", 1.0), ("wave", "calibrated"),
                                    ("boxcar", "calibrated"), ("delta", "calibrated")])
def test_risk_decreases_over_sixteenfold_n(name, d):
    k = make_kernel(name)
    f = make_test_function("besov_dense", BesovParams(2), seed=1)
    lo = l2_risk(f, k, PlanSpec(d=d), 2.0**12, 200, seed=2)
    hi = l2_risk(f, k, PlanSpec(d=d), 2.0**16, 200, seed=2)
    assert hi.mean + 3 * math.hypot(hi.se, lo.se) < lo.mean


def test_workers_do_not_change_results():
    f = make_test_function("besov_dense", BesovParams(2), seed=1, max_level=8)
    k = make_kernel("wave")
    a = l2_risk(f, k, PlanSpec(), 2.0**12, 24, seed=9, workers=1)
    b = l2_risk(f, k, PlanSpec(), 2.0**12, 24, seed=9, workers=4)
    assert a.losses == b.losses and a.mean == b.mean and a.se == b.se


def test_seed_for_n_separates_sample_sizes():
    assert seed_for_n(7, 1024.0) != seed_for_n(7, 2048.0)
    assert seed_for_n(7, 1024.0) == seed_for_n(7, 1024)


def test_discrete_risk_runs_with_design():
    k = make_kernel("heat", design=SamplingDesign.midpoints(0.1, 0.2, 4))
    f = make_test_function("besov_dense", BesovParams(2), seed=1, max_level=4)
    r = l2_risk(f, k, PlanSpec(), 4096.0, 4, seed=0, model="discrete")
    assert r.plan.regime == "super" and r.mean > 0
    with pytest.raises(PreconditionError):
        l2_risk(f, k, PlanSpec(), 4097.0, 4, seed=0, model="discrete")
    with pytest.raises(PreconditionError):
        l2_risk(f, make_kernel("heat"), PlanSpec(), 4096.0, 4, seed=0, model="discrete")


def test_replicate_precondition():
    with pytest.raises(PreconditionError):
        l2_risk(FourierSeries.zeros(3), make_kernel("delta"), PlanSpec(), 100.0, 1, seed=0)


# ------------------------------------------------------------- rate fits


NS = [2.0**e for e in range(10, 19)]


def test_exact_power_law_slope():
    fit = rate_slope([point(n, 3.0 * n**-0.5) for n in NS])
    assert abs(fit.slope + 0.5) < 1e-12 and not fit.weighted


def test_noisy_power_law_slope():
    rng = np.random.default_rng(0)
    pts = [point(n, 2.0 * n ** (-4 / 7) * (1 + 0.05 * rng.normal()), se=0.05 * 2.0 * n ** (-4 / 7)) for n in NS]
    fit = rate_slope(pts)
    assert fit.weighted and abs(fit.slope + 4 / 7) < 0.03
    assert fit.ci_low < fit.slope < fit.ci_high


def test_supersmooth_axis_slope():
    fit = rate_slope([point(n, 0.7 / math.log(n)) for n in NS], axis="ln n")
    assert abs(fit.slope + 1) < 1e-12


def test_span_preconditions():
    with pytest.raises(PreconditionError, match="4 distinct"):
        rate_slope([point(n, 1 / n) for n in (1e2, 1e3, 1e4)])
    with pytest.raises(PreconditionError, match="decades"):
        rate_slope([point(n, 1 / n) for n in (1e3, 2e3, 4e3, 8e3)])


def test_degenerate_smallest_n_dropped_when_span_allows():
    pts = [point(1e2, 5.0, degenerate=True)] + [point(n, n**-1.0) for n in (1e3, 1e4, 1e5, 1e6)]
    fit = rate_slope(pts)
    assert 1e2 not in fit.n_used and abs(fit.slope + 1) < 1e-12 and not fit.kept_degenerate
    tight = [point(1e2, 1e-2, degenerate=True)] + [point(n, n**-1.0) for n in (1e3, 3e3, 1e4)]
    kept = rate_slope(tight)
    assert kept.kept_degenerate and 1e2 in kept.n_used


@given(st.floats(-3.0, -0.05), st.floats(0.01, 100.0))
def test_slope_recovers_any_exact_power(b, c):
    fit = rate_slope([point(n, c * n**b) for n in NS])
    assert abs(fit.slope - b) < 1e-9


def test_risk_curve_bundles_prediction():
    f = make_test_function("besov_dense", BesovParams(2), seed=1, max_level=8)
    curve = risk_curve(f, make_kernel("delta"), PlanSpec(), [2.0**e for e in (8, 10, 12, 15)], 8, seed=1,
                       bp=BesovParams(2))
    assert isinstance(curve, RiskCurve) and len(curve.points) == 4
    assert curve.predicted.case == "dense" and curve.fit.axis == "n"
    assert [p.J for p in curve.points] == [make_plan(make_kernel("delta"), n).J for n in curve.ns]
