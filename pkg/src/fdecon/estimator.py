"""Block-thresholding wavelet estimator in the periodized Meyer basis.

The estimate keeps every scaling coefficient at level ``j0`` and, for each
wavelet level ``j0 <= j < J``, splits the ``2**j`` coefficients into blocks of
length ``L = ceil(ln n)``. A block survives when its energy reaches the level
threshold ``lambda_j``; otherwise it is zeroed.

Level rules
-----------
regular   ``j0 = max(0, round(log2 ln n))``, ``J = max(j0, floor(log2 n**(1/(2 nu + 1))))``,
          ``lambda_j = d n**-1 2**(2 nu j) ln n``
super     ``2**j0 = (3 / (8 pi)) (ln n / (2 alpha))**(1/beta)`` rounded, ``J = j0``,
          no thresholds (linear estimator)
adaptive  ``j0`` as regular, ``J = floor(log2 n)`` capped by the basis,
          ``lambda_j = d n**-1 ln n Delta_1(j)``
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel
from .errors import ParameterError, PreconditionError, RegimeError
from .kernels import ConvolutionKernel, KernelDecay, log_delta_stat
from .meyer import FourierSeries, MeyerBasis, WaveletDecomposition, analyze, band_limit, default_basis, synthesize

REGIMES = ("auto", "regular", "super", "adaptive")
_EPS_LEVEL = 1e-9  # absorbs round-off when ln n or log2 lands on an integer


def threshold_ratio_floor(nu: float) -> float:
    """Smallest effective ``d`` with ``(d / 2 - 1)**2 >= 8 nu + 2``."""
    return 2.0 * (1.0 + math.sqrt(8.0 * nu + 2.0))


@dataclass(frozen=True)
class BlockLayout:
    level: int
    length: int
    starts: tuple

    @property
    def size(self) -> int:
        return 2**self.level

    @property
    def nblocks(self) -> int:
        return len(self.starts)

    def block(self, r: int) -> range:
        return range(self.starts[r], min(self.starts[r] + self.length, self.size))

    def blocks(self) -> list[range]:
        return [self.block(r) for r in range(self.nblocks)]

    def expand(self, per_block: np.ndarray) -> np.ndarray:
        """Broadcast one value per block to one value per coefficient."""
        return np.repeat(np.asarray(per_block), self.length)[: self.size]


def block_length(n: float) -> int:
    if n <= 1:
        raise PreconditionError(f"block length needs n > 1, got {n}")
    return max(1, math.ceil(math.log(n) - _EPS_LEVEL))


def block_layout(j: int, n: float) -> BlockLayout:
    """Consecutive blocks of ``ceil(ln n)`` indices covering ``0..2**j-1``."""
    if j < 0:
        raise PreconditionError(f"level must be nonnegative, got {j}")
    L = block_length(n)
    return BlockLayout(j, L, tuple(range(0, 2**j, L)))


@dataclass(frozen=True)
class ThresholdPlan:
    regime: str
    n: float
    j0: int
    J: int
    L: int
    d: float | None
    lam: tuple = ()  # lambda_j for j = j0..J-1; empty for super
    decay: dict = field(default_factory=dict)
    degenerate: bool = False
    loglog: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def levels(self) -> range:
        return range(self.j0, self.J)

    @property
    def linear(self) -> bool:
        return self.regime == "super" or self.J <= self.j0

    def threshold(self, j: int) -> float:
        if self.regime == "super":
            raise RegimeError("super-smooth plans carry no thresholds")
        if not self.j0 <= j < self.J:
            raise PreconditionError(f"level {j} is outside the thresholded levels {self.j0}..{self.J - 1}")
        return self.lam[j - self.j0]

    def layout(self, j: int) -> BlockLayout:
        return BlockLayout(j, self.L, tuple(range(0, 2**j, self.L)))

    @property
    def mmax(self) -> int:
        """Largest frequency touched by the plan's bands."""
        return band_limit(self.j0, self.J)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lam"] = {str(j): float(v) for j, v in zip(self.levels, self.lam)}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _log2(x: float) -> float:
    return math.log(x) / math.log(2.0)


def _resolve_regime(regime: str, decay: KernelDecay) -> str:
    if regime not in REGIMES:
        raise ParameterError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if regime == "auto":
        return "super" if decay.alpha > 0 else "regular"
    if regime == "super" and decay.alpha <= 0:
        raise RegimeError("super-smooth regime requested for a kernel declared with alpha = 0")
    return regime


def _scale_j0(n: float) -> int:
    return max(0, int(round(_log2(math.log(n)))))


def _threshold_diagnostics(kernel, regime, d, n, levels, basis, nu):
    """Effective threshold ratio per level, compared with the large-d condition.

    ``lambda_j / (L * Delta_1(j) / n)`` is the threshold in units of the mean
    block noise energy; the condition asks its half minus one, squared, to reach
    ``8 nu + 2`` (under the idealized ``K2*/K1* = 1``).
    """
    if not levels:
        return {"required_ratio": threshold_ratio_floor(nu), "min_ratio": None, "satisfied": None}
    ratios = []
    for j in levels:
        log_d1 = log_delta_stat(kernel, 1, j, basis)
        if regime == "regular":
            log_ratio = math.log(d) + 2 * nu * j * math.log(2.0) - log_d1
        else:
            log_ratio = math.log(d)
        ratios.append(math.exp(min(log_ratio, 700.0)))
    need = threshold_ratio_floor(nu)
    return {"required_ratio": need, "min_ratio": min(ratios), "satisfied": bool(min(ratios) >= need * (1 - 1e-12))}


def calibrated_d(kernel: ConvolutionKernel, n: float, regime: str = "auto", basis: MeyerBasis | None = None) -> float:
    """Smallest ``d`` meeting the threshold condition at every thresholded level.

    For the regular rule this is ``c(nu) * max_j Delta_1(j) / 2**(2 nu j)``;
    for the adaptive rule it is ``c(nu)`` itself, with ``c(nu) = 2 (1 + sqrt(8 nu + 2))``.
    Super-smooth plans have no threshold and return 1.
    """
    basis = basis or default_basis()
    plan = make_plan(kernel, n, regime, d=1.0, basis=basis, diagnostics=False)
    nu = kernel.decay.nu
    if plan.regime == "super":
        return 1.0
    if plan.regime == "adaptive" or plan.J <= plan.j0:
        return threshold_ratio_floor(nu)
    worst = max(log_delta_stat(kernel, 1, j, basis) - 2 * nu * j * math.log(2.0) for j in plan.levels)
    return threshold_ratio_floor(nu) * math.exp(worst)


def make_plan(kernel: ConvolutionKernel, n: float, regime: str = "auto", d: float | None = None,
              basis: MeyerBasis | None = None, j0: int | None = None, J: int | None = None,
              loglog: bool = False, diagnostics: bool = True) -> ThresholdPlan:
    """Levels and thresholds for sample size ``n``.

    ``j0``/``J`` override the rules; ``loglog`` multiplies ``d`` by ``ln ln n``
    (adaptive and regular rules only).
    """
    if not n > math.e:
        raise PreconditionError(f"need n > e so that ln n > 1, got n={n}")
    basis = basis or default_basis()
    decay = kernel.decay
    regime = _resolve_regime(regime, decay)
    d = 1.0 if d is None else float(d)
    if not d >= 0:
        raise ParameterError(f"threshold constant d must be >= 0, got {d}")
    nu = decay.nu
    ln_n = math.log(n)
    cap = basis.max_level

    if regime == "super":
        base = (3.0 / (8.0 * math.pi)) * (ln_n / (2.0 * decay.alpha)) ** (1.0 / decay.beta)
        lo = max(0, int(round(_log2(base)))) if j0 is None else int(j0)
        hi = lo
    else:
        lo = _scale_j0(n) if j0 is None else int(j0)
        if J is not None:
            hi = int(J)
        elif regime == "regular":
            hi = max(lo, math.floor(_log2(n) / (2 * nu + 1) + _EPS_LEVEL))
        else:
            hi = max(lo, math.floor(_log2(n) + _EPS_LEVEL))
        hi = min(hi, cap)
    if lo > cap:
        raise PreconditionError(f"j0={lo} exceeds basis max_level={cap}")
    if hi < lo:
        raise PreconditionError(f"J={hi} must be >= j0={lo}")

    levels = range(lo, hi) if regime != "super" else range(0)
    eff_d = d * (math.log(ln_n) if loglog and ln_n > math.e else 1.0)
    lam: list[float] = []
    for j in levels:
        if regime == "regular":
            lam.append(eff_d / n * 2.0 ** (2 * nu * j) * ln_n)
        else:
            lam.append(math.exp(min(math.log(eff_d) - math.log(n) + math.log(ln_n)
                                    + log_delta_stat(kernel, 1, j, basis), 700.0)) if eff_d > 0 else 0.0)
    diag = {}
    if diagnostics and regime != "super" and eff_d > 0:
        diag = _threshold_diagnostics(kernel, regime, eff_d, n, list(levels), basis, nu)
    return ThresholdPlan(
        regime=regime,
        n=float(n),
        j0=lo,
        J=hi,
        L=block_length(n),
        d=None if regime == "super" else eff_d,
        lam=tuple(lam),
        decay=decay.to_dict(),
        degenerate=regime != "super" and hi <= lo,
        loglog=bool(loglog),
        diagnostics=diag,
    )


@dataclass
class BlockEnergies:
    j0: int
    L: int
    values: list  # per level j0..J-1, one array of block energies each
    truth: list | None = None

    def level(self, j: int) -> np.ndarray:
        return self.values[j - self.j0]


def block_energies(w: WaveletDecomposition, L: int, truth: WaveletDecomposition | None = None) -> BlockEnergies:
    """Per-block sums of squared wavelet coefficients."""
    if L < 1:
        raise PreconditionError("block length must be >= 1")
    vals = [_accel.block_energies(np.asarray(bj), L) for bj in w.b]
    tvals = None
    if truth is not None:
        if truth.j0 != w.j0 or truth.J != w.J:
            raise PreconditionError("truth decomposition must share the levels of the estimate")
        tvals = [_accel.block_energies(np.asarray(bj), L) for bj in truth.b]
    return BlockEnergies(w.j0, L, vals, tvals)


def threshold(w: WaveletDecomposition, plan: ThresholdPlan) -> tuple[WaveletDecomposition, list]:
    """Zero blocks whose energy falls below ``lambda_j``; returns kept-block masks."""
    if (w.j0, w.J) != (plan.j0, plan.J):
        raise PreconditionError("decomposition levels do not match the plan")
    out = w.copy()
    kept = []
    if plan.regime == "super":
        return out, kept
    energies = block_energies(w, plan.L)
    for j, e in zip(plan.levels, energies.values):
        keep = e >= plan.threshold(j)
        out.b[j - plan.j0] = out.b[j - plan.j0] * plan.layout(j).expand(keep)
        kept.append(keep)
    return out, kept


def estimate(fhat: FourierSeries, plan: ThresholdPlan, basis: MeyerBasis | None = None) -> FourierSeries:
    """Block-thresholded estimate as a Fourier series on ``|m| <= plan.mmax``."""
    basis = basis or default_basis()
    w = analyze(fhat, plan.j0, plan.J, basis)
    kept, _ = threshold(w, plan)
    return synthesize(kept, plan.mmax, basis)


def linear_estimate(fhat: FourierSeries, j0: int, J: int, basis: MeyerBasis | None = None) -> FourierSeries:
    """Projection of ``fhat`` on levels ``j0..J-1`` with no thresholding."""
    basis = basis or default_basis()
    return synthesize(analyze(fhat, j0, J, basis), band_limit(j0, J), basis)


def besov_norm(w: WaveletDecomposition, s: float, p: float, q: float) -> float:
    """Sequence-space Besov norm ``||a||_p + (sum_j (2**(j s') ||b_j||_p)**q)**(1/q)``.

    ``s' = s + 1/2 - 1/p``; ``p`` or ``q`` equal to ``inf`` use maxima.
    """
    for name, v in (("p", p), ("q", q)):
        if not v >= 1:
            raise ParameterError(f"{name} must lie in [1, inf], got {v}")
    sp = s + 0.5 - (0.0 if math.isinf(p) else 1.0 / p)

    def pnorm(x):
        x = np.abs(np.asarray(x))
        if x.size == 0:
            return 0.0
        if math.isinf(p):
            return float(np.max(x))
        # scale out the max so large p does not overflow
        top = float(np.max(x))
        if top == 0:
            return 0.0
        return top * float(np.sum((x / top) ** p)) ** (1.0 / p)

    terms = np.array([2.0 ** (j * sp) * pnorm(bj) for j, bj in zip(w.levels, w.b)])
    if terms.size == 0:
        detail = 0.0
    elif math.isinf(q):
        detail = float(np.max(terms))
    else:
        top = float(np.max(terms))
        detail = 0.0 if top == 0 else top * float(np.sum((terms / top) ** q)) ** (1.0 / q)
    return pnorm(w.a) + detail
