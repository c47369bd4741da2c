"""Blurring kernels described by their functional Fourier coefficients g_m(u).

Catalogue (unit-period convention, coefficient ``<g(u, .), e_m>``):

========== ============================== ========================== =====================
name       g_m(u)                         design                     declared (nu, alpha, beta)
========== ============================== ========================== =====================
heat       exp(-4 pi^2 m^2 u)             [a, b], 0 < a <= b         (1, 8 pi^2 a, 2)
circle     u^|m|                          [0, r0], 0 < r0 < 1        (0, 2 ln(1/r0), 1)
rectangle  exp(-2 pi |m| u)               [a, b], 0 < a <= b         (1/2, 4 pi a, 1)
wave       sin(2 pi m u) / (2 pi m)       [a, b], 0 < a <= b < 1     (1, 0, 1)
boxcar     sin(2 pi m u) / (2 pi m u)     [a, b], 0 < a <= b         (1, 0, 1)
delta      1                              [a, b], default [0, 1]     (0, 0, 1)
custom     tabulated per channel          discrete points only       caller-declared
========== ============================== ========================== =====================

``wave`` is the kernel 0.5 * 1{|x| < u}; ``boxcar`` is (2u)^-1 * 1{|x| <= u}.
At m = 0 the coefficient is the DC gain (u for wave, 1 for boxcar and
circle); decay conditions are only checked for |m| >= 1.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .errors import IllPosedError, NumericalError, ParameterError, PreconditionError
from .meyer import MeyerBasis, default_basis

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-300


@dataclass(frozen=True)
class SamplingDesign:
    """Continuous interval [a, b] or discrete points u_1..u_M with N samples each."""

    mode: str
    a: float
    b: float
    points: tuple = ()
    N: int | None = None

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise ParameterError(f"unknown design mode {self.mode!r}")
        if self.a > self.b:
            raise ParameterError(f"design interval needs a <= b, got [{self.a}, {self.b}]")
        if self.mode == "discrete":
            if len(self.points) < 1:
                raise ParameterError("discrete design needs at least one point")
            pts = np.asarray(self.points, dtype=float)
            if np.any(pts < self.a - 1e-15) or np.any(pts > self.b + 1e-15):
                raise ParameterError("discrete points must lie inside [a, b]")
            if self.N is not None and int(self.N) < 1:
                raise ParameterError("samples per channel N must be positive")
            object.__setattr__(self, "points", tuple(float(p) for p in self.points))

    @classmethod
    def continuous(cls, a: float, b: float) -> "SamplingDesign":
        return cls("continuous", float(a), float(b))

    @classmethod
    def discrete(cls, points, N: int | None = None, a: float | None = None, b: float | None = None):
        pts = tuple(float(p) for p in points)
        lo = min(pts) if a is None else float(a)
        hi = max(pts) if b is None else float(b)
        return cls("discrete", lo, hi, pts, None if N is None else int(N))

    @classmethod
    def midpoints(cls, a: float, b: float, M: int, N: int | None = None) -> "SamplingDesign":
        """M-point midpoint rule on [a, b]."""
        pts = a + (np.arange(M) + 0.5) * (b - a) / M
        return cls.discrete(pts, N=N, a=a, b=b)

    @property
    def M(self) -> int:
        return len(self.points) if self.mode == "discrete" else 1

    @property
    def n(self) -> int | None:
        """Total sample count N * M for discrete designs."""
        if self.mode != "discrete" or self.N is None:
            return None
        return self.N * self.M

    def with_N(self, N: int) -> "SamplingDesign":
        return SamplingDesign(self.mode, self.a, self.b, self.points, int(N))

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "a": self.a, "b": self.b}
        if self.mode == "discrete":
            d["points"] = list(self.points)
            d["N"] = self.N
        return d


@dataclass(frozen=True)
class KernelDecay:
    """Declared decay ``tau_1(m) ~ |m|^(-2 nu) exp(-alpha |m|^beta)``.

    ``nu = 0`` with ``alpha = 0`` is accepted for the identity blur.
    """

    nu: float
    alpha: float
    beta: float = 1.0
    K1: float | None = None
    K2: float | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ParameterError("alpha must be >= 0")
        if self.beta <= 0:
            raise ParameterError("beta must be > 0")
        if self.alpha == 0 and self.nu < 0:
            raise ParameterError("regular-smooth kernels need nu >= 0")
        for name in ("K1", "K2"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.K1 is not None and self.K2 is not None and self.K2 > self.K1:
            raise ParameterError("K2 must not exceed K1")

    @property
    def supersmooth(self) -> bool:
        return self.alpha > 0

    def envelope(self, m) -> np.ndarray:
        m = np.abs(np.asarray(m, dtype=float))
        return m ** (-2 * self.nu) * np.exp(-self.alpha * m**self.beta)

    def log_envelope(self, m) -> np.ndarray:
        m = np.abs(np.asarray(m, dtype=float))
        return -2 * self.nu * np.log(m) - self.alpha * m**self.beta

    def to_dict(self) -> dict:
        return {"nu": self.nu, "alpha": self.alpha, "beta": self.beta, "K1": self.K1, "K2": self.K2}


@dataclass(frozen=True, eq=False)
class ConvolutionKernel:
    """A kernel family ``g_m(u)`` with a sampling design and declared decay.

    ``gm(m, u)`` must broadcast over numpy arrays. ``log_abs_gm`` is optional
    and lets super-smooth kernels be integrated without underflow.
    ``closed_tau(kappa, m)`` is an optional exact formula for the continuous
    design, used as a fast path next to the quadrature route.
    """

    name: str
    gm: Callable
    design: SamplingDesign
    decay: KernelDecay
    params: dict = field(default_factory=dict)
    log_abs_gm: Callable | None = None
    closed_tau: Callable | None = None
    real: bool = True

    def __repr__(self):
        return f"ConvolutionKernel({self.name}, params={self.params}, design={self.design.mode})"

    def with_design(self, design: SamplingDesign) -> "ConvolutionKernel":
        return ConvolutionKernel(
            self.name, self.gm, design, self.decay, self.params, self.log_abs_gm,
            self.closed_tau if design.mode == "continuous" else None, self.real,
        )

    def with_decay(self, decay: KernelDecay) -> "ConvolutionKernel":
        return ConvolutionKernel(
            self.name, self.gm, self.design, decay, self.params, self.log_abs_gm, self.closed_tau, self.real
        )

    def channel_coeffs(self, m) -> np.ndarray:
        """``g_m(u_l)`` as an (M, len(m)) array for a discrete design."""
        if self.design.mode != "discrete":
            raise PreconditionError("channel coefficients need a discrete design")
        u = np.asarray(self.design.points, dtype=float)[:, None]
        m = np.asarray(m)[None, :]
        return np.asarray(self.gm(m, u), dtype=np.complex128)

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params), "design": self.design.to_dict(),
                "decay": self.decay.to_dict()}


# ----------------------------------------------------------- catalogue maths


def _heat_g(m, u):
    return np.exp(-4 * np.pi**2 * np.asarray(m, dtype=float) ** 2 * u)


def _heat_logabs(m, u):
    return -4 * np.pi**2 * np.asarray(m, dtype=float) ** 2 * u


def _circle_g(m, u):
    m = np.abs(np.asarray(m, dtype=float))
    return np.power(u, m)


def _circle_logabs(m, u):
    m = np.abs(np.asarray(m, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(m == 0, 0.0, m * np.log(u))


def _rect_g(m, u):
    return np.exp(-2 * np.pi * np.abs(np.asarray(m, dtype=float)) * u)


def _rect_logabs(m, u):
    return -2 * np.pi * np.abs(np.asarray(m, dtype=float)) * u


def _wave_g(m, u):
    m = np.asarray(m, dtype=float)
    u = np.asarray(u, dtype=float)
    safe = np.where(m == 0, 1.0, m)
    return np.where(m == 0, u + 0 * m, np.sin(2 * np.pi * m * u) / (2 * np.pi * safe))


def _boxcar_g(m, u):
    m = np.asarray(m, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.sinc(2 * m * u)


def _delta_g(m, u):
    return np.ones(np.broadcast(np.asarray(m), np.asarray(u)).shape)


def _log_interval_exp(c, a, b):
    """log of int_a^b exp(-c u) du for c >= 0 (vectorized in c)."""
    c = np.asarray(c, dtype=float)
    out = np.empty_like(c)
    zero = c == 0
    out[zero] = math.log(b - a) if b > a else -np.inf
    cz = c[~zero]
    out[~zero] = -cz * a + np.log(-np.expm1(-cz * (b - a))) - np.log(cz)
    return out


def _heat_closed(a, b):
    def log_tau(kappa, m):
        m = np.asarray(m, dtype=float)
        return _log_interval_exp(8 * np.pi**2 * kappa * m**2, a, b)

    return log_tau


def _rect_closed(a, b):
    def log_tau(kappa, m):
        m = np.abs(np.asarray(m, dtype=float))
        return _log_interval_exp(4 * np.pi * kappa * m, a, b)

    return log_tau


def _circle_closed(r0):
    def log_tau(kappa, m):
        e = 2 * kappa * np.abs(np.asarray(m, dtype=float)) + 1
        return e * math.log(r0) - np.log(e)

    return log_tau


def _wave_closed(a, b):
    def log_tau(kappa, m):
        m = np.asarray(m, dtype=float)
        out = np.empty_like(m)
        zero = m == 0
        out[zero] = math.log((b ** (2 * kappa + 1) - a ** (2 * kappa + 1)) / (2 * kappa + 1))
        mm = m[~zero]
        w = 2 * np.pi * mm
        if kappa == 1:
            val = ((b - a) / 2 + (np.sin(4 * np.pi * mm * a) - np.sin(4 * np.pi * mm * b)) / (8 * np.pi * mm)) / w**2
        else:
            def anti(u):
                x = w * u
                return (3 * x / 8 - np.sin(2 * x) / 4 + np.sin(4 * x) / 32) / w
            val = (anti(b) - anti(a)) / w**4
        out[~zero] = np.log(val)
        return out

    return log_tau


def _delta_closed(a, b):
    def log_tau(kappa, m):
        return np.full(np.shape(m), math.log(b - a) if b > a else 0.0)

    return log_tau


def make_kernel(name: str, design: SamplingDesign | None = None, decay: KernelDecay | None = None, **params):
    """Build a catalogue kernel.

    ``design`` defaults to the continuous interval implied by the parameters;
    pass a discrete design to sample the same family at points u_l. A
    ``decay`` argument overrides the declared (nu, alpha, beta).
    """
    name = name.lower()
    log_abs = None
    closed = None
    if name == "heat":
        a, b = float(params.get("a", 0.1)), float(params.get("b", 0.2))
        if not 0 < a <= b:
            raise ParameterError("heat kernel needs 0 < a <= b")
        gm, log_abs, closed = _heat_g, _heat_logabs, _heat_closed(a, b)
        declared = KernelDecay(1.0, 8 * np.pi**2 * a, 2.0)
        params = {"a": a, "b": b}
    elif name == "circle":
        r0 = float(params.get("r0", 0.5))
        if not 0 < r0 < 1:
            raise ParameterError("circle kernel needs 0 < r0 < 1")
        a, b = 0.0, r0
        gm, log_abs, closed = _circle_g, _circle_logabs, _circle_closed(r0)
        declared = KernelDecay(0.0, 2 * math.log(1 / r0), 1.0)
        params = {"r0": r0}
    elif name == "rectangle":
        a, b = float(params.get("a", 0.1)), float(params.get("b", 0.2))
        if not 0 < a <= b:
            raise ParameterError("rectangle kernel needs 0 < a <= b")
        gm, log_abs, closed = _rect_g, _rect_logabs, _rect_closed(a, b)
        declared = KernelDecay(0.5, 4 * np.pi * a, 1.0)
        params = {"a": a, "b": b}
    elif name == "wave":
        a, b = float(params.get("a", 0.25)), float(params.get("b", 0.75))
        if not 0 < a <= b < 1:
            raise ParameterError("wave kernel needs 0 < a <= b < 1")
        gm, closed = _wave_g, _wave_closed(a, b)
        declared = KernelDecay(1.0, 0.0, 1.0)
        params = {"a": a, "b": b}
    elif name == "boxcar":
        a, b = float(params.get("a", 0.25)), float(params.get("b", 0.75))
        if not 0 < a <= b:
            raise ParameterError("boxcar kernel needs 0 < a <= b")
        gm = _boxcar_g
        declared = KernelDecay(1.0, 0.0, 1.0)
        params = {"a": a, "b": b}
    elif name == "delta":
        a, b = float(params.get("a", 0.0)), float(params.get("b", 1.0))
        if a > b:
            raise ParameterError("delta kernel needs a <= b")
        gm, closed = _delta_g, _delta_closed(a, b)
        declared = KernelDecay(0.0, 0.0, 1.0)
        params = {"a": a, "b": b}
    elif name == "custom":
        return make_custom_kernel(design=design, decay=decay, **params)
    else:
        raise ParameterError(f"unknown kernel {name!r}")
    if design is None:
        design = SamplingDesign.continuous(a, b)
    elif design.mode == "continuous" and (design.a, design.b) != (a, b):
        raise ParameterError("continuous design interval must match the kernel parameters")
    if design.mode == "discrete":
        closed = None
    return ConvolutionKernel(name, gm, design, decay or declared, params, log_abs, closed)


def make_custom_kernel(channels, decay: KernelDecay | None = None, design: SamplingDesign | None = None,
                       N: int | None = None, name: str = "custom", **_ignored):
    """Discrete multichannel kernel from per-channel tables.

    Each channel is a dict with ``u`` and either ``tag`` (a catalogue closed
    form evaluated at u) or ``g``: a list of complex values for m = 0..Mmax
    (negative m by conjugate symmetry, zero beyond Mmax).
    """
    if decay is None:
        raise ParameterError("custom kernels must declare their decay (nu, alpha, beta)")
    if not channels:
        raise ParameterError("custom kernel needs at least one channel")
    us = np.array([float(c["u"]) for c in channels])
    rows = []
    for c in channels:
        if "tag" in c:
            tagged = make_kernel(c["tag"], **c.get("params", {}))
            rows.append(("tag", tagged.gm))
        elif "g" in c:
            table = np.array([complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in c["g"]])
            rows.append(("table", table))
        else:
            raise ParameterError("each custom channel needs 'tag' or 'g'")

    def gm(m, u):
        m_arr = np.asarray(m)
        u_arr = np.asarray(u, dtype=float)
        mb, ub = np.broadcast_arrays(m_arr, u_arr)
        out = np.zeros(mb.shape, dtype=np.complex128)
        for l, (kind, spec) in enumerate(rows):
            sel = ub == us[l]
            if not np.any(sel):
                continue
            ms = mb[sel].astype(int)
            if kind == "tag":
                out[sel] = spec(ms, us[l])
            else:
                mmax = spec.size - 1
                vals = np.zeros(ms.shape, dtype=np.complex128)
                inside = np.abs(ms) <= mmax
                raw = spec[np.abs(ms[inside])]
                vals[inside] = np.where(ms[inside] < 0, np.conj(raw), raw)
                out[sel] = vals
        return out

    if design is None:
        design = SamplingDesign.discrete(us, N=N)
    return ConvolutionKernel(name, gm, design, decay, {"channels": len(rows)}, None, None)


# ----------------------------------------------------------------- tau etc.


def _quad_log_tau(kernel: ConvolutionKernel, kappa: int, m: int) -> float:
    a, b = kernel.design.a, kernel.design.b
    points = None
    if kernel.log_abs_gm is not None:
        grid = np.linspace(a, b, 65)
        logs = 2 * kappa * kernel.log_abs_gm(m, grid)
        shift = float(np.max(logs))
        # sharply peaked integrands: geometric breakpoints around the peak
        peak = float(grid[int(np.argmax(logs))])
        offsets = (b - a) * 10.0 ** -np.arange(1, 13)
        pts = np.concatenate([peak + offsets, peak - offsets])
        points = np.unique(pts[(pts > a) & (pts < b)]) if b > a else None

        def integrand(u):
            return math.exp(2 * kappa * float(kernel.log_abs_gm(m, u)) - shift)
    else:
        shift = 0.0

        def integrand(u):
            return float(np.abs(kernel.gm(m, u))) ** (2 * kappa)

    limit = max(200, 8 * abs(int(m)) + 50)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, err = integrate.quad(integrand, a, b, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=limit,
                                        points=points)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(
                f"quadrature for tau_{kappa}({m}) of {kernel.name} on [{a}, {b}] did not converge: {exc}"
            ) from exc
    if value <= 0:
        return -np.inf
    return shift + math.log(value)


def log_tau(kernel: ConvolutionKernel, kappa: int, m, method: str = "quad") -> np.ndarray:
    """``log tau_kappa(m)``; vectorized over m.

    ``method``: ``quad`` (adaptive Gauss-Kronrod, continuous designs),
    ``closed`` (exact formula, raises if the kernel has none) or ``auto``
    (closed form when available, quadrature otherwise). Discrete designs and
    the a == b convention are exact sums and ignore ``method``.
    """
    if kappa not in (1, 2):
        raise ParameterError("kappa must be 1 or 2")
    m_arr = np.atleast_1d(np.asarray(m, dtype=np.int64))
    design = kernel.design
    if design.mode == "discrete" or design.a == design.b:
        u = np.asarray(design.points if design.mode == "discrete" else (design.a,), dtype=float)[:, None]
        if kernel.log_abs_gm is not None:
            logs = 2 * kappa * kernel.log_abs_gm(m_arr[None, :], u)
        else:
            with np.errstate(divide="ignore"):
                logs = 2 * kappa * np.log(np.abs(kernel.gm(m_arr[None, :], u)))
        out = logsumexp(logs, axis=0) - math.log(u.shape[0])
    elif method == "closed" or (method == "auto" and kernel.closed_tau is not None):
        if kernel.closed_tau is None:
            raise ParameterError(f"kernel {kernel.name} has no closed-form tau")
        out = np.asarray(kernel.closed_tau(kappa, m_arr), dtype=float)
    elif method in ("quad", "auto"):
        out = np.array([_quad_log_tau(kernel, kappa, int(mi)) for mi in m_arr])
    else:
        raise ParameterError(f"unknown method {method!r}")
    return out if np.ndim(m) else out.reshape(())


def tau(kernel: ConvolutionKernel, kappa: int, m, method: str = "quad"):
    """Aggregated kernel energy ``tau_kappa(m)`` across the design.

    Continuous: ``int_a^b |g_m(u)|^(2 kappa) du``; discrete:
    ``mean_l |g_m(u_l)|^(2 kappa)``; a == b: ``|g_m(a)|^(2 kappa)``.
    """
    out = np.exp(log_tau(kernel, kappa, m, method))
    return float(out) if np.ndim(out) == 0 else out


def _log_delta(kernel, basis, kappa, j, method):
    m = basis.band(j).indices
    if m.size == 0:
        raise PreconditionError(f"band {j} is empty")
    pos, counts = np.unique(np.abs(m), return_counts=True)
    lt1 = log_tau(kernel, 1, pos, method)
    if np.any(~np.isfinite(lt1)):
        bad = int(pos[~np.isfinite(lt1)][0])
        raise IllPosedError(f"tau_1({bad}) = 0 for kernel {kernel.name}: frequency {bad} is unrecoverable", m=bad)
    ltk = lt1 if kappa == 1 else log_tau(kernel, kappa, pos, method)
    terms = ltk - 2 * kappa * lt1
    return float(logsumexp(terms, b=counts) - math.log(m.size))


def log_delta_stat(kernel: ConvolutionKernel, kappa: int, j: int, basis: MeyerBasis | None = None,
                   method: str = "auto") -> float:
    """``log Delta_kappa(j)`` (safe for super-smooth kernels)."""
    return _log_delta(kernel, basis or default_basis(), kappa, j, method)


def delta_stat(kernel: ConvolutionKernel, kappa: int, j: int, basis: MeyerBasis | None = None,
               method: str = "auto") -> float:
    """``Delta_kappa(j) = |C_j|^-1 sum_{m in C_j} tau_kappa(m) tau_1(m)^(-2 kappa)``.

    ``|C_j|`` counts integer frequencies in the band (both signs).
    """
    with np.errstate(over="ignore"):
        return float(np.exp(log_delta_stat(kernel, kappa, j, basis, method)))


@dataclass
class DecayReport:
    kernel: str
    m_range: tuple
    declared: dict
    K1: float
    K2: float
    worst_upper_ratio: float
    worst_lower_ratio: float
    log_spread: float
    allowed_log_spread: float
    passed: bool
    supplied_constants: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_decay(kernel: ConvolutionKernel, m_range=(2, 64), max_spread: float = 10.0,
                 supersmooth_slack: float = 0.1, method: str = "auto") -> DecayReport:
    """Check ``K2 env(m) <= tau_1(m) <= K1 env(m)`` over ``m_range`` (inclusive).

    With declared K1, K2 the sandwich is checked literally. Otherwise K1, K2
    are fitted as the extreme ratios ``tau_1 / env`` and the declaration
    passes when the fitted constants are genuinely m-independent:
    ``log(K1/K2) <= log(max_spread) + supersmooth_slack * alpha * m_max**beta``.
    The slack term tolerates polynomial prefactors that are negligible next
    to the exponential envelope of a super-smooth kernel.
    """
    lo, hi = int(m_range[0]), int(m_range[1])
    if lo <= 0 or hi < lo:
        raise PreconditionError("m_range must be a positive interval excluding 0")
    m = np.arange(lo, hi + 1)
    decay = kernel.decay
    log_ratio = log_tau(kernel, 1, m, method) - decay.log_envelope(m)
    log_hi, log_lo = float(np.max(log_ratio)), float(np.min(log_ratio))
    spread = log_hi - log_lo
    allowed = math.log(max_spread) + supersmooth_slack * decay.alpha * float(hi) ** decay.beta
    supplied = decay.K1 is not None and decay.K2 is not None
    if supplied:
        K1, K2 = decay.K1, decay.K2
        passed = log_hi <= math.log(K1) + 1e-12 and log_lo >= math.log(K2) - 1e-12
    else:
        K1, K2 = math.exp(log_hi), math.exp(log_lo)
        passed = bool(np.isfinite(spread) and spread <= allowed)
    return DecayReport(
        kernel=kernel.name,
        m_range=(lo, hi),
        declared=decay.to_dict(),
        K1=K1,
        K2=K2,
        worst_upper_ratio=math.exp(log_hi) / K1,
        worst_lower_ratio=math.exp(log_lo) / K2,
        log_spread=spread,
        allowed_log_spread=allowed,
        passed=bool(passed),
        supplied_constants=supplied,
    )
