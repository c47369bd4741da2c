"""Monte Carlo L2 risk, rate predictions and Besov-controlled test functions."""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from .errors import HypothesisError, ParameterError, PreconditionError
from .estimator import ThresholdPlan, besov_norm, calibrated_d, estimate, make_plan
from .kernels import ConvolutionKernel, KernelDecay, SamplingDesign
from .meyer import FourierSeries, MeyerBasis, analyze, band_limit, default_basis, synthesize, WaveletDecomposition
from .model import RngSpec, estimate_fm, simulate_continuous, simulate_discrete

TEST_FUNCTION_KINDS = ("trigpoly", "besov_dense", "besov_sparse", "bumps")
_NORM_SLACK = 1e-6


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float = 2.0
    q: float = 2.0
    A: float = 1.0

    def __post_init__(self):
        if not self.s > 0:
            raise ParameterError(f"s must be positive, got {self.s}")
        for name in ("p", "q"):
            if not getattr(self, name) >= 1:
                raise ParameterError(f"{name} must lie in [1, inf]")
        if not self.A > 0:
            raise ParameterError("A must be positive")

    @property
    def inv_p(self) -> float:
        return 0.0 if math.isinf(self.p) else 1.0 / self.p

    @property
    def s_prime(self) -> float:
        return self.s + 0.5 - self.inv_p

    @property
    def p_prime(self) -> float:
        return min(self.p, 2.0)

    @property
    def s_star(self) -> float:
        return self.s + 0.5 - 1.0 / self.p_prime

    def check_lower(self):
        bound = max(0.0, self.inv_p - 0.5)
        if not self.s > bound:
            raise HypothesisError(f"s={self.s} violates s > max(0, 1/p - 1/2) = {bound}")

    def upper_valid(self) -> bool:
        return self.s > 1.0 / self.p_prime


@dataclass(frozen=True)
class RatePrediction:
    """Risk scale ``n**-exponent (ln n)**log_factor``, or ``(ln n)**-exponent`` if supersmooth.

    Sparse and boundary cases also carry the ``(ln n / n)**exponent`` factor,
    folded into :meth:`scale`.
    """

    case: str
    exponent: float
    log_factor: float
    upper_bound_valid: bool = True

    @property
    def axis(self) -> str:
        return "ln n" if self.case == "supersmooth" else "n"

    def scale(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        ln = np.log(n)
        if self.case == "supersmooth":
            return ln ** (-self.exponent)
        out = n ** (-self.exponent) * ln**self.log_factor
        if self.case in ("sparse", "boundary"):
            out = out * ln**self.exponent
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def classify(bp: BesovParams, decay: KernelDecay) -> str:
    """Dense, sparse or boundary by the sign of ``nu (2 - p) - p s*``; supersmooth if alpha > 0."""
    if decay.alpha > 0:
        return "supersmooth"
    if math.isinf(bp.p):
        return "dense"  # nu (2 - p) <= 0 < p s*
    lhs = decay.nu * (2.0 - bp.p)
    rhs = bp.p * bp.s_star
    if math.isclose(lhs, rhs, rel_tol=1e-12, abs_tol=1e-12):
        return "boundary"
    return "dense" if lhs < rhs else "sparse"


def predicted_rate(bp: BesovParams, decay: KernelDecay) -> RatePrediction:
    """Upper-bound rate of the block-thresholding estimator for the ball ``B^s_pq(A)``."""
    bp.check_lower()
    case = classify(bp, decay)
    nu, s, ss = decay.nu, bp.s, bp.s_star
    if case == "supersmooth":
        return RatePrediction(case, 2 * ss / decay.beta, 0.0, bp.upper_valid())
    if case == "dense":
        two_minus_p = 0.0 if math.isinf(bp.p) else max(0.0, 2.0 - bp.p)
        rho = (2 * nu + 1) * two_minus_p / (bp.p * (2 * s + 2 * nu + 1)) if two_minus_p else 0.0
        return RatePrediction(case, 2 * s / (2 * s + 2 * nu + 1), rho, bp.upper_valid())
    if ss + nu <= 0:
        raise HypothesisError("sparse rate needs s* + nu > 0")
    rho = 0.0
    if case == "boundary":
        rho = 1.0 if math.isinf(bp.q) else max(0.0, bp.q - bp.p) / bp.q
    return RatePrediction(case, 2 * ss / (2 * ss + 2 * nu), rho, bp.upper_valid())


# ------------------------------------------------------------------ test functions


def _scale_to_ball(w: WaveletDecomposition, bp: BesovParams, cap_only: bool = False) -> WaveletDecomposition:
    norm = besov_norm(w, bp.s, bp.p, bp.q)
    if norm == 0:
        return w
    target = bp.A * (1.0 - _NORM_SLACK)
    if cap_only and norm <= target:
        return w
    g = target / norm
    return WaveletDecomposition(w.j0, w.J, w.a * g, [bj * g for bj in w.b])


def _bumps_samples(t: np.ndarray) -> np.ndarray:
    pos = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
    hgt = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
    wth = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])
    out = np.zeros_like(t)
    for shift in (-1.0, 0.0, 1.0):  # periodize
        x = (t[:, None] - pos[None, :] - shift) / wth[None, :]
        out += np.sum(hgt / (1.0 + np.abs(x)) ** 4, axis=1)
    return out


def make_test_function(kind: str, bp: BesovParams, seed: int = 0, max_level: int = 10,
                       basis: MeyerBasis | None = None, degree: int = 8) -> FourierSeries:
    """Real test function on ``|m| <= band_limit(0, max_level + 1)`` inside ``B^s_pq(A)``.

    ``besov_dense`` uses ``b_jk = gamma 2**(-j (s + 1/2))`` with seeded signs on every
    ``k``; ``besov_sparse`` uses one ``b_jk = gamma 2**(-j s')`` per level at a seeded
    position. Both rescale ``gamma`` so the norm is ``A (1 - 1e-6)``. ``trigpoly``
    has unit coefficients for ``|m| <= degree`` and is shrunk only if it falls
    outside the ball; ``bumps`` is the classical spiky profile rescaled to the ball.
    """
    if kind not in TEST_FUNCTION_KINDS:
        raise ParameterError(f"unknown test function {kind!r}; expected one of {TEST_FUNCTION_KINDS}")
    bp.check_lower()
    basis = basis or default_basis()
    J = max_level + 1
    mmax = band_limit(0, J)
    rng = np.random.default_rng(seed)

    if kind == "besov_dense":
        a = rng.choice([-1.0, 1.0], size=1)
        b = [rng.choice([-1.0, 1.0], size=2**j) * 2.0 ** (-j * (bp.s + 0.5)) for j in range(J)]
        w = _scale_to_ball(WaveletDecomposition(0, J, a, b), bp)
    elif kind == "besov_sparse":
        a = rng.choice([-1.0, 1.0], size=1)
        b = []
        for j in range(J):
            bj = np.zeros(2**j)
            bj[rng.integers(0, 2**j)] = rng.choice([-1.0, 1.0]) * 2.0 ** (-j * bp.s_prime)
            b.append(bj)
        w = _scale_to_ball(WaveletDecomposition(0, J, a, b), bp)
    elif kind == "trigpoly":
        if band_limit(0, J) < degree:
            raise PreconditionError(f"degree {degree} exceeds the band of max_level={max_level}")
        f = FourierSeries.from_dict({m: 1.0 for m in range(-degree, degree + 1)}, mmax)
        w = _scale_to_ball(analyze(f, 0, J, basis), bp, cap_only=True)
    else:
        grid = 1 << max(12, int(math.ceil(math.log2(4 * mmax + 2))))
        t = np.arange(grid) / grid
        spec = np.fft.fft(_bumps_samples(t)) / grid
        m = np.arange(-mmax, mmax + 1)
        f = FourierSeries(spec[np.mod(m, grid)])
        # symmetrize away round-off so the series is exactly real
        f = FourierSeries(0.5 * (f.coeffs + np.conj(f.coeffs[::-1])))
        w = _scale_to_ball(analyze(f, 0, J, basis), bp)

    out = synthesize(w, mmax, basis)
    out = FourierSeries(0.5 * (out.coeffs + np.conj(out.coeffs[::-1])))
    check = besov_norm(analyze(out, 0, J, basis), bp.s, bp.p, bp.q)
    if kind != "trigpoly" and check > bp.A:
        raise PreconditionError(f"test function norm {check} exceeds A={bp.A}")
    return out


# ------------------------------------------------------------------ risk


@dataclass(frozen=True)
class PlanSpec:
    """How to build a plan at each n: rule, constant and optional overrides.

    ``d="calibrated"`` picks the smallest constant meeting the threshold
    condition for the kernel at that n (see :func:`estimator.calibrated_d`).
    """

    regime: str = "auto"
    d: float | str = 1.0
    j0: int | None = None
    J: int | None = None
    loglog: bool = False

    def resolve(self, kernel: ConvolutionKernel, n: float, basis: MeyerBasis | None = None) -> ThresholdPlan:
        if self.d == "calibrated":
            d = calibrated_d(kernel, n, self.regime, basis)
        else:
            d = float(self.d)
        return make_plan(kernel, n, self.regime, d=d, basis=basis, j0=self.j0, J=self.J, loglog=self.loglog)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RiskResult:
    mean: float
    se: float
    replicates: int
    plan: ThresholdPlan
    losses: tuple = field(default=(), repr=False)


def seed_for_n(seed: int, n: float) -> int:
    """Per-n seed derived from the master seed and the bit pattern of ``n``."""
    bits = struct.unpack("<Q", struct.pack("<d", float(n)))[0]
    return _accel.stream_key(seed, bits)


def _discrete_kernel(kernel: ConvolutionKernel, n: float) -> ConvolutionKernel:
    design = kernel.design
    if design.mode != "discrete":
        raise PreconditionError("discrete risk needs a kernel with a discrete design")
    N = int(round(n / design.M))
    if N * design.M != int(round(n)):
        raise PreconditionError(f"n={n} is not a multiple of M={design.M}")
    return kernel.with_design(design.with_N(N))


def replicate_loss(truth: FourierSeries, kernel: ConvolutionKernel, plan: ThresholdPlan, n: float,
                   rng: RngSpec, model: str = "continuous", noise_scale: float = 1.0,
                   basis: MeyerBasis | None = None) -> float:
    """Squared L2 error of one estimate, by Parseval plus the truth's tail."""
    mmax = plan.mmax
    if model == "continuous":
        obs = simulate_continuous(truth, kernel, n, rng, mmax=mmax, noise_scale=noise_scale)
    elif model == "discrete":
        obs = simulate_discrete(truth, kernel, rng, noise_scale=noise_scale)
    else:
        raise ParameterError(f"unknown model {model!r}")
    fhat = estimate_fm(obs, mmax=mmax)
    est = estimate(fhat, plan, basis)
    inband = est.coeffs - truth.resized(mmax).coeffs
    return math.fsum((inband.real**2 + inband.imag**2).tolist()) + truth.energy_above(mmax)


def l2_risk(truth: FourierSeries, kernel: ConvolutionKernel, plan_spec: PlanSpec | ThresholdPlan, n: float,
            replicates: int, seed: int, model: str = "continuous", workers: int = 1,
            noise_scale: float = 1.0, basis: MeyerBasis | None = None) -> RiskResult:
    """Mean and standard error of ``||fhat_n - f||**2`` over ``replicates`` draws.

    Replicate r uses ``RngSpec(seed_for_n(seed, n), r)``; results are gathered in
    replicate order and summed with ``math.fsum`` so the totals do not depend
    on the thread schedule.
    """
    if replicates < 2:
        raise PreconditionError("need at least 2 replicates for a standard error")
    basis = basis or default_basis()
    if model == "discrete":
        kernel = _discrete_kernel(kernel, n)
    plan = plan_spec if isinstance(plan_spec, ThresholdPlan) else plan_spec.resolve(kernel, n, basis)
    base_seed = seed_for_n(seed, n)

    def one(r):
        return replicate_loss(truth, kernel, plan, n, RngSpec(base_seed, r), model, noise_scale, basis)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            losses = list(pool.map(one, range(replicates)))
    else:
        losses = [one(r) for r in range(replicates)]
    arr = np.asarray(losses)
    mean = math.fsum(losses) / replicates
    var = math.fsum(((arr - mean) ** 2).tolist()) / (replicates - 1)
    return RiskResult(mean, math.sqrt(var / replicates), replicates, plan, tuple(losses))


# ------------------------------------------------------------------ curves and fits


@dataclass(frozen=True)
class RiskPoint:
    n: float
    mean: float
    se: float
    replicates: int
    j0: int
    J: int
    degenerate: bool


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    se: float
    ci_low: float
    ci_high: float
    intercept: float
    axis: str
    n_used: tuple
    weighted: bool
    kept_degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RiskCurve:
    points: list
    predicted: RatePrediction | None = None
    fit: SlopeFit | None = None

    @property
    def ns(self) -> np.ndarray:
        return np.array([p.n for p in self.points])


def _check_span(ns):
    distinct = np.unique(np.asarray(ns, dtype=float))
    if distinct.size < 4:
        raise PreconditionError(f"rate fit needs >= 4 distinct n, got {distinct.size}")
    if math.log10(distinct.max() / distinct.min()) < 2.0 - 1e-12:
        raise PreconditionError("rate fit needs n spanning at least 2 decades")


def rate_slope(curve: RiskCurve | list, axis: str = "n", z: float = 1.959963984540054,
               drop_degenerate: bool = True) -> SlopeFit:
    """Weighted least-squares slope of ``log(mean risk)`` against ``log n`` (or ``log ln n``).

    Weights are ``(mean / se)**2``, the delta-method version of ``1/se**2`` on the
    log scale. With any zero ``se`` the fit falls back to ordinary least squares.
    The smallest n is dropped when its plan was degenerate, unless dropping it
    would break the span requirement; that case is reported as ``kept_degenerate``.
    """
    points = list(curve.points if isinstance(curve, RiskCurve) else curve)
    _check_span([p.n for p in points])
    points.sort(key=lambda p: p.n)
    kept_degenerate = False
    if drop_degenerate and points and points[0].degenerate:
        try:
            _check_span([p.n for p in points[1:]])
            points = points[1:]
        except PreconditionError:
            kept_degenerate = True
    n = np.array([p.n for p in points], dtype=float)
    mean = np.array([p.mean for p in points], dtype=float)
    se = np.array([p.se for p in points], dtype=float)
    if np.any(mean <= 0):
        raise PreconditionError("log-log fit needs positive mean risks")
    if axis == "n":
        x = np.log(n)
    elif axis == "ln n":
        x = np.log(np.log(n))
    else:
        raise ParameterError(f"axis must be 'n' or 'ln n', got {axis!r}")
    y = np.log(mean)
    weighted = bool(np.all(se > 0))
    w = (mean / se) ** 2 if weighted else np.ones_like(y)
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    dof = max(1, len(y) - 2)
    chi2 = float(np.sum(w * resid**2)) / dof
    if weighted:
        cov = cov * max(1.0, chi2)  # inflate when the scatter exceeds the stated errors
    else:
        cov = cov * chi2
    slope_se = float(math.sqrt(max(cov[1, 1], 0.0)))
    slope = float(beta[1])
    return SlopeFit(slope, slope_se, slope - z * slope_se, slope + z * slope_se, float(beta[0]), axis,
                    tuple(float(v) for v in n), weighted, kept_degenerate)


def risk_curve(truth: FourierSeries, kernel: ConvolutionKernel, plan_spec: PlanSpec, ns, replicates: int,
               seed: int, model: str = "continuous", workers: int = 1, bp: BesovParams | None = None,
               basis: MeyerBasis | None = None, fit: bool = True) -> RiskCurve:
    """Risk at every n plus the fitted slope and, when ``bp`` is given, the prediction."""
    basis = basis or default_basis()
    points = []
    for n in ns:
        res = l2_risk(truth, kernel, plan_spec, n, replicates, seed, model, workers, basis=basis)
        points.append(RiskPoint(float(n), res.mean, res.se, res.replicates, res.plan.j0, res.plan.J,
                                res.plan.degenerate))
    predicted = predicted_rate(bp, kernel.decay) if bp is not None else None
    curve = RiskCurve(points, predicted)
    if fit:
        axis = predicted.axis if predicted is not None else ("ln n" if kernel.decay.alpha > 0 else "n")
        curve.fit = rate_slope(curve, axis=axis)
    return curve
