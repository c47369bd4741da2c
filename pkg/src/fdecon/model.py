"""Observation models and the Fourier-domain statistics ``fhat_m``.

Continuous model: ``y(u, t) = (f * g)(u, t) + n^(-1/2) z(u, t)`` with 2-D white
noise. Only the sufficient statistic ``fhat_m`` is simulated, using its exact
law ``fhat_m = f_m + (n tau_1(m))^(-1/2) xi_m`` with ``E|xi_m|^2 = 1``.

Discrete model: ``y(u_l, t_i) = (f * g)(u_l, t_i) + eps_li`` on the grid
``t_i = i/N``, i = 0..N-1, simulated in the time domain. Row spectra use
``y_m(u_l) = N^-1 sum_i y(u_l, t_i) exp(-2 pi i m t_i)`` so the noise in
``y_m(u_l)`` has ``E|.|^2 = 1/N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import IllPosedError, PreconditionError
from .kernels import ConvolutionKernel, log_tau
from .meyer import FourierSeries

# log tau_1 below this is numerically zero: the noise scale would overflow
_LOG_TAU_FLOOR = -1400.0


@dataclass(frozen=True)
class RngSpec:
    """Counter-based randomness: (seed, stream) addresses an infinite tape."""

    seed: int
    stream: int = 0

    def normals(self, counters) -> np.ndarray:
        return _accel.counter_normals(self.seed, self.stream, counters)

    def child(self, salt: int) -> "RngSpec":
        """Independent seed derived from this one (same stream id)."""
        return RngSpec(_accel.stream_key(self.seed, 0x5EED0000 + int(salt)), self.stream)


@dataclass(frozen=True)
class ContinuousObservation:
    fhat: FourierSeries
    n: float
    kernel: ConvolutionKernel
    seed: int | None = None
    stream: int | None = None


@dataclass
class DiscreteObservation:
    samples: np.ndarray  # (M, N)
    kernel: ConvolutionKernel
    seed: int | None = None
    stream: int | None = None
    _rows: np.ndarray | None = field(default=None, repr=False)

    @property
    def M(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.M * self.N

    @property
    def design(self):
        return self.kernel.design

    def fourier_rows(self) -> np.ndarray:
        """``y_m(u_l)`` for m in FFT order (index m mod N)."""
        if self._rows is None:
            self._rows = np.fft.fft(self.samples, axis=1) / self.N
        return self._rows


def _checked_log_tau1(kernel, m):
    lt = log_tau(kernel, 1, m, method="auto")
    bad = ~np.isfinite(lt) | (lt < _LOG_TAU_FLOOR)
    if np.any(bad):
        m_bad = int(np.asarray(m)[bad][0])
        raise IllPosedError(f"tau_1({m_bad}) vanishes for kernel {kernel.name}", m=m_bad)
    return lt


def coefficient_noise(mmax: int, rng: RngSpec) -> np.ndarray:
    """Conjugate-symmetric ``xi_m``, |m| <= mmax, with ``E|xi_m|^2 = 1``.

    Counter 0 feeds the real ``xi_0``; counters 2m and 2m+1 feed the real and
    imaginary parts of ``xi_m`` for m >= 1, so growing ``mmax`` leaves the
    earlier coefficients untouched.
    """
    pos = np.arange(1, mmax + 1, dtype=np.uint64)
    counters = np.empty(2 * mmax + 1, dtype=np.uint64)
    counters[0] = 0
    counters[1::2] = 2 * pos
    counters[2::2] = 2 * pos + 1
    z = rng.normals(counters)
    xi_pos = (z[1::2] + 1j * z[2::2]) / math.sqrt(2.0)
    return np.concatenate([np.conj(xi_pos[::-1]), [z[0] + 0j], xi_pos])


def simulate_continuous(f: FourierSeries, kernel: ConvolutionKernel, n: float, rng: RngSpec,
                        mmax: int | None = None, noise_scale: float = 1.0) -> ContinuousObservation:
    """Draw the statistic ``fhat_m`` for ``|m| <= mmax`` (default ``f.mmax``).

    ``noise_scale=0`` gives the noiseless limit ``fhat_m = f_m``.
    """
    if n <= 0:
        raise PreconditionError("n must be positive")
    mmax = f.mmax if mmax is None else int(mmax)
    m = np.arange(-mmax, mmax + 1)
    truth = f.resized(mmax).coeffs
    if noise_scale == 0:
        return ContinuousObservation(FourierSeries(truth.copy()), float(n), kernel, rng.seed, rng.stream)
    lt1 = _checked_log_tau1(kernel, np.arange(0, mmax + 1))
    lt1 = np.concatenate([lt1[:0:-1], lt1])
    sd = noise_scale * np.exp(-0.5 * (math.log(n) + lt1))
    fhat = truth + sd * coefficient_noise(mmax, rng)
    assert fhat.shape == m.shape
    return ContinuousObservation(FourierSeries(fhat), float(n), kernel, rng.seed, rng.stream)


def simulate_discrete(f: FourierSeries, kernel: ConvolutionKernel, rng: RngSpec, N: int | None = None,
                      noise_scale: float = 1.0) -> DiscreteObservation:
    """Sample ``(f * g)(u_l, i/N) + eps_li`` for every channel of a discrete design."""
    design = kernel.design
    if design.mode != "discrete":
        raise PreconditionError("simulate_discrete needs a kernel with a discrete design")
    N = int(N if N is not None else (design.N or 0))
    if N < 2 * f.mmax + 1:
        raise PreconditionError(f"N={N} aliases a series with Mmax={f.mmax}; need N >= {2 * f.mmax + 1}")
    m = f.frequencies
    G = kernel.channel_coeffs(m)  # (M, 2 mmax + 1)
    spectra = np.zeros((design.M, N), dtype=np.complex128)
    spectra[:, np.mod(m, N)] = G * f.coeffs[None, :]
    clean = np.fft.ifft(spectra, axis=1) * N
    residue = float(np.max(np.abs(clean.imag), initial=0.0))
    if residue > 1e-9 * max(1.0, float(np.max(np.abs(clean.real), initial=0.0))):
        raise PreconditionError(f"blurred signal is not real (imaginary residue {residue:.2e})")
    samples = clean.real
    if noise_scale != 0:
        eps = rng.normals(np.arange(design.M * N, dtype=np.uint64)).reshape(design.M, N)
        samples = samples + noise_scale * eps
    return DiscreteObservation(np.ascontiguousarray(samples), kernel.with_design(design.with_N(N)),
                               rng.seed, rng.stream)


def estimate_fm(obs, mmax: int | None = None) -> FourierSeries:
    """Fourier-domain estimates ``fhat_m``.

    Continuous observations already carry the statistic (pass-through,
    optionally truncated). Discrete observations use the weighted
    least-squares combination ``sum_l conj(g_m(u_l)) y_m(u_l) / sum_l |g_m(u_l)|^2``.
    """
    if isinstance(obs, ContinuousObservation):
        return obs.fhat if mmax is None else obs.fhat.resized(mmax)
    if not isinstance(obs, DiscreteObservation):
        raise TypeError(f"unsupported observation type {type(obs).__name__}")
    top = (obs.N - 1) // 2
    mmax = top if mmax is None else int(mmax)
    if mmax > top:
        raise PreconditionError(f"N={obs.N} only resolves |m| <= {top}")
    m = np.arange(-mmax, mmax + 1)
    rows = obs.fourier_rows()[:, np.mod(m, obs.N)]
    G = obs.kernel.channel_coeffs(m)
    denom = np.sum(np.abs(G) ** 2, axis=0)
    if np.any(denom <= 0):
        bad = int(m[denom <= 0][0])
        raise IllPosedError(f"sum_l |g_m(u_l)|^2 vanishes at m={bad}", m=bad)
    return FourierSeries(np.sum(np.conj(G) * rows, axis=0) / denom)
