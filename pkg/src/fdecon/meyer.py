"""Periodized Meyer wavelets, built entirely in the frequency domain.

Coefficient convention
----------------------
Every Fourier coefficient in this package is ``c_m(h) = <h, e_m>``, i.e.
``int_0^1 h(t) exp(-2 pi i m t) dt`` with ``<f, g> = int f conj(g)``. With
this convention ``h(t) = sum_m c_m(h) exp(2 pi i m t)`` and

    psi_mjk = c_m(psi_jk) = 2**(-j/2) * psi_hat(2 pi m / 2**j) * exp(-2 pi i m k / 2**j)

where ``psi_hat(w) = exp(-i w / 2) * |psi_hat(w)|`` is the continuous
Fourier transform ``int psi(x) exp(-i w x) dx`` of the mother wavelet.
The scaling function has a real, even transform and no half-sample shift.
Wavelet coefficients are then ``b_jk = sum_m f_m * conj(psi_mjk)`` and
synthesis is ``f_m = sum_k b_jk * psi_mjk``.

Sums over k are evaluated with one length-``2**j`` FFT per level after
folding the band by ``m mod 2**j``.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import CapacityError, PreconditionError

REAL_RESIDUE_TOL = 1e-10


def meyer_window(x):
    """Auxiliary window ``x**4 (35 - 84x + 70x**2 - 20x**3)`` clipped to [0, 1].

    Satisfies ``window(x) + window(1 - x) == 1`` and is C^3 at both ends.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**4 * (35.0 - 84.0 * x + 70.0 * x**2 - 20.0 * x**3)


def scaling_hat(omega):
    """Meyer scaling function transform (real, even, nonnegative)."""
    w = np.abs(np.asarray(omega, dtype=float))
    out = np.zeros_like(w)
    out[w <= 2 * np.pi / 3] = 1.0
    mid = (w > 2 * np.pi / 3) & (w < 4 * np.pi / 3)
    out[mid] = np.cos(0.5 * np.pi * meyer_window(3 * w[mid] / (2 * np.pi) - 1.0))
    return out


def wavelet_hat_abs(omega):
    """Modulus of the Meyer mother wavelet transform."""
    w = np.abs(np.asarray(omega, dtype=float))
    out = np.zeros_like(w)
    lo = (w > 2 * np.pi / 3) & (w <= 4 * np.pi / 3)
    hi = (w > 4 * np.pi / 3) & (w < 8 * np.pi / 3)
    out[lo] = np.sin(0.5 * np.pi * meyer_window(3 * w[lo] / (2 * np.pi) - 1.0))
    out[hi] = np.cos(0.5 * np.pi * meyer_window(3 * w[hi] / (4 * np.pi) - 1.0))
    return out


def wavelet_hat(omega):
    """Meyer mother wavelet transform, ``exp(-i w/2) |psi_hat(w)|``."""
    w = np.asarray(omega, dtype=float)
    return np.exp(-0.5j * w) * wavelet_hat_abs(w)


def _band_edges(j: int, scaling: bool) -> tuple[int, int]:
    """Inclusive integer range of |m| with a nonzero coefficient at level j."""
    if scaling:
        # |m| < 2**(j+1)/3 ; 2**(j+1) is never divisible by 3.
        return 0, (2 ** (j + 1)) // 3
    # 2**j/3 < |m| < 2**(j+2)/3
    return 2**j // 3 + 1, (2 ** (j + 2)) // 3


def band_limit(j0: int, J: int) -> int:
    """Largest |m| touched by the scaling band at j0 and wavelet bands j0..J-1."""
    top = _band_edges(j0, scaling=True)[1]
    if J > j0:
        top = max(top, _band_edges(J - 1, scaling=False)[1])
    return top


@dataclass(frozen=True)
class BandIndexSet:
    """Frequencies ``m`` (both signs, ascending) where level ``level`` is nonzero."""

    level: int
    indices: np.ndarray
    scaling: bool = False

    def __len__(self):
        return int(self.indices.size)

    def __contains__(self, m):
        return bool(np.any(self.indices == m))


@dataclass(frozen=True)
class _LevelTable:
    m: np.ndarray  # band frequencies
    weight: np.ndarray  # psi_mj0 * 2**(j/2): unit-k coefficient without the k phase
    residue: np.ndarray  # m mod 2**j


@dataclass(frozen=True)
class FourierSeries:
    """Coefficients ``f_m`` for ``m = -mmax..mmax`` stored at index ``m + mmax``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.size % 2 == 0:
            raise PreconditionError("FourierSeries needs an odd-length 1-D array")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, mmax: int) -> "FourierSeries":
        return cls(np.zeros(2 * mmax + 1, dtype=np.complex128))

    @classmethod
    def from_dict(cls, values: dict, mmax: int | None = None) -> "FourierSeries":
        if mmax is None:
            mmax = max(abs(int(m)) for m in values) if values else 0
        out = np.zeros(2 * mmax + 1, dtype=np.complex128)
        for m, v in values.items():
            out[int(m) + mmax] = v
        return cls(out)

    @property
    def mmax(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.mmax, self.mmax + 1)

    def __getitem__(self, m: int) -> complex:
        if abs(m) > self.mmax:
            return 0j
        return complex(self.coeffs[m + self.mmax])

    def at(self, m) -> np.ndarray:
        """Vectorized lookup returning 0 outside the stored range."""
        m = np.asarray(m)
        out = np.zeros(m.shape, dtype=np.complex128)
        inside = np.abs(m) <= self.mmax
        out[inside] = self.coeffs[m[inside] + self.mmax]
        return out

    def resized(self, mmax: int) -> "FourierSeries":
        """Truncate or zero-pad to a new half-bandwidth."""
        out = np.zeros(2 * mmax + 1, dtype=np.complex128)
        keep = min(mmax, self.mmax)
        out[mmax - keep : mmax + keep + 1] = self.coeffs[self.mmax - keep : self.mmax + keep + 1]
        return FourierSeries(out)

    def conjugate_asymmetry(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(self.coeffs[::-1])), initial=0.0))

    def is_real(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        return self.conjugate_asymmetry() <= tol * scale

    def energy(self) -> float:
        """Squared L2 norm by Parseval."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def energy_above(self, mmax: int) -> float:
        """Energy carried by frequencies with ``|m| > mmax``."""
        if mmax >= self.mmax:
            return 0.0
        c = self.coeffs
        cut = self.mmax - mmax
        return float(np.sum(np.abs(c[:cut]) ** 2) + np.sum(np.abs(c[-cut:]) ** 2))

    def __add__(self, other: "FourierSeries") -> "FourierSeries":
        mm = max(self.mmax, other.mmax)
        return FourierSeries(self.resized(mm).coeffs + other.resized(mm).coeffs)

    def __sub__(self, other: "FourierSeries") -> "FourierSeries":
        mm = max(self.mmax, other.mmax)
        return FourierSeries(self.resized(mm).coeffs - other.resized(mm).coeffs)

    def __mul__(self, c: float) -> "FourierSeries":
        return FourierSeries(self.coeffs * c)

    __rmul__ = __mul__


@dataclass
class WaveletDecomposition:
    """Scaling coefficients at ``j0`` and wavelet coefficients for ``j0 <= j < J``."""

    j0: int
    J: int
    a: np.ndarray
    b: list = field(default_factory=list)

    def __post_init__(self):
        if self.J < self.j0:
            raise PreconditionError(f"J={self.J} must be >= j0={self.j0}")
        if len(self.a) != 2**self.j0:
            raise PreconditionError("scaling block must hold 2**j0 coefficients")
        if len(self.b) != self.J - self.j0:
            raise PreconditionError("need one wavelet block per level j0..J-1")
        for j, bj in zip(self.levels, self.b):
            if len(bj) != 2**j:
                raise PreconditionError(f"level {j} must hold 2**{j} coefficients")

    @property
    def levels(self) -> range:
        return range(self.j0, self.J)

    def level(self, j: int) -> np.ndarray:
        return self.b[j - self.j0]

    def copy(self) -> "WaveletDecomposition":
        return WaveletDecomposition(self.j0, self.J, self.a.copy(), [bj.copy() for bj in self.b])

    def energy(self) -> float:
        return float(np.sum(np.abs(self.a) ** 2) + sum(np.sum(np.abs(bj) ** 2) for bj in self.b))

    @classmethod
    def zeros(cls, j0: int, J: int, dtype=float) -> "WaveletDecomposition":
        return cls(j0, J, np.zeros(2**j0, dtype=dtype), [np.zeros(2**j, dtype=dtype) for j in range(j0, J)])


class MeyerBasis:
    """Frequency-domain tables for the periodized Meyer basis up to ``max_level``.

    Tables are built on first use under a lock; they are pure functions of
    the level so concurrent readers always see identical values.
    """

    def __init__(self, max_level: int = 22):
        if max_level < 0:
            raise CapacityError("max_level must be nonnegative")
        self.max_level = int(max_level)
        self._tables: dict[tuple[int, bool], _LevelTable] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"MeyerBasis(max_level={self.max_level})"

    def _check_level(self, j: int):
        if j < 0:
            raise PreconditionError(f"level must be nonnegative, got {j}")
        if j > self.max_level:
            raise CapacityError(f"level {j} exceeds basis max_level={self.max_level}")

    def _table(self, j: int, scaling: bool) -> _LevelTable:
        key = (j, scaling)
        table = self._tables.get(key)
        if table is not None:
            return table
        self._check_level(j)
        lo, hi = _band_edges(j, scaling)
        pos = np.arange(max(lo, 1), hi + 1)
        if scaling:
            m = np.concatenate([-pos[::-1], [0], pos]) if lo == 0 else np.concatenate([-pos[::-1], pos])
        else:
            m = np.concatenate([-pos[::-1], pos])
        omega = 2 * np.pi * m / 2**j
        if scaling:
            weight = scaling_hat(omega).astype(np.complex128)
        else:
            weight = wavelet_hat(omega)
        keep = np.abs(weight) > 0
        m, weight = m[keep], weight[keep]
        table = _LevelTable(m=m, weight=weight * 2.0 ** (-j / 2), residue=np.mod(m, 2**j))
        with self._lock:
            self._tables.setdefault(key, table)
        return self._tables[key]

    def band(self, j: int) -> BandIndexSet:
        return BandIndexSet(j, self._table(j, False).m.copy(), scaling=False)

    def scaling_band(self, j0: int) -> BandIndexSet:
        return BandIndexSet(j0, self._table(j0, True).m.copy(), scaling=True)

    def wavelet_fourier_coeff(self, j: int, k: int, m):
        """``psi_mjk``; vectorized over ``m``."""
        return self._coeff(j, k, m, scaling=False)

    def scaling_fourier_coeff(self, j0: int, k: int, m):
        """``phi_m j0 k``; vectorized over ``m``."""
        return self._coeff(j0, k, m, scaling=True)

    def _coeff(self, j, k, m, scaling):
        self._check_level(j)
        if not 0 <= k < 2**j:
            raise PreconditionError(f"translation k={k} outside 0..{2**j - 1}")
        m_arr = np.asarray(m)
        omega = 2 * np.pi * m_arr / 2**j
        amp = scaling_hat(omega).astype(np.complex128) if scaling else wavelet_hat(omega)
        val = 2.0 ** (-j / 2) * amp * np.exp(-2j * np.pi * m_arr * k / 2**j)
        return complex(val) if np.ndim(val) == 0 else val

    # ------------------------------------------------------------ transforms

    def analyze_level(self, f: FourierSeries, j: int, scaling: bool = False) -> np.ndarray:
        """Coefficients ``sum_m f_m conj(basis_mjk)`` for k = 0..2**j-1 (complex)."""
        t = self._table(j, scaling)
        vals = f.at(t.m) * np.conj(t.weight)
        period = 2**j
        folded = _accel.fold_bins(vals, t.residue, period)
        return np.fft.ifft(folded) * period

    def synthesize_level(self, coeffs: np.ndarray, j: int, out: np.ndarray, mmax: int, scaling: bool = False):
        """Accumulate ``sum_k coeffs_k basis_mjk`` into ``out`` (indexed m + mmax)."""
        t = self._table(j, scaling)
        spectrum = np.fft.fft(np.asarray(coeffs, dtype=np.complex128))
        out[t.m + mmax] += t.weight * spectrum[t.residue]


def _required_mmax(j0, J):
    return band_limit(j0, J)


def _drop_imaginary(x: np.ndarray, scale: float) -> np.ndarray:
    residue = float(np.max(np.abs(x.imag), initial=0.0))
    if residue > REAL_RESIDUE_TOL * max(1.0, scale):
        raise PreconditionError(
            f"coefficients of a real function carry imaginary residue {residue:.3e}"
        )
    return np.ascontiguousarray(x.real)


def analyze(f: FourierSeries, j0: int, J: int, basis: MeyerBasis | None = None) -> WaveletDecomposition:
    """Scaling coefficients at ``j0`` and wavelet coefficients for ``j0 <= j < J``.

    Real input (conjugate-symmetric series) yields real coefficient arrays after
    an explicit imaginary-residue check.
    """
    if J < j0:
        raise PreconditionError(f"J={J} must be >= j0={j0}")
    basis = basis or default_basis()
    need = _required_mmax(j0, J)
    if f.mmax < need:
        raise PreconditionError(f"series half-bandwidth {f.mmax} too small: need Mmax >= {need}")
    a = basis.analyze_level(f, j0, scaling=True)
    b = [basis.analyze_level(f, j) for j in range(j0, J)]
    if f.is_real():
        scale = float(np.sqrt(f.energy()))
        a = _drop_imaginary(a, scale)
        b = [_drop_imaginary(bj, scale) for bj in b]
    return WaveletDecomposition(j0, J, a, b)


def synthesize(w: WaveletDecomposition, mmax: int, basis: MeyerBasis | None = None) -> FourierSeries:
    """Fourier series of ``sum a phi + sum b psi`` on ``|m| <= mmax``."""
    basis = basis or default_basis()
    need = _required_mmax(w.j0, w.J)
    if mmax < need:
        raise PreconditionError(f"Mmax={mmax} too small for levels up to J={w.J}: need Mmax >= {need}")
    out = np.zeros(2 * mmax + 1, dtype=np.complex128)
    basis.synthesize_level(w.a, w.j0, out, mmax, scaling=True)
    for j, bj in zip(w.levels, w.b):
        basis.synthesize_level(bj, j, out, mmax)
    return FourierSeries(out)


def evaluate_on_grid(f: FourierSeries, N: int) -> np.ndarray:
    """Samples ``f(i/N)`` for i = 0..N-1 of a real series."""
    if N < 2 * f.mmax + 1:
        raise PreconditionError(f"grid of {N} points aliases a series with Mmax={f.mmax}; need N >= {2 * f.mmax + 1}")
    buf = np.zeros(N, dtype=np.complex128)
    buf[np.mod(f.frequencies, N)] = f.coeffs
    values = np.fft.ifft(buf) * N
    scale = max(1.0, float(np.sum(np.abs(f.coeffs))))
    residue = float(np.max(np.abs(values.imag), initial=0.0))
    if residue > REAL_RESIDUE_TOL * scale:
        raise PreconditionError(f"series is not real: imaginary residue {residue:.3e} on the grid")
    return values.real.copy()


_DEFAULT_BASIS: MeyerBasis | None = None


def default_basis() -> MeyerBasis:
    """Process-wide shared basis (tables are immutable once built)."""
    global _DEFAULT_BASIS
    if _DEFAULT_BASIS is None:
        _DEFAULT_BASIS = MeyerBasis()
    return _DEFAULT_BASIS
