"""Hot inner loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``FDECON_DISABLE_NUMBA`` is unset (or set to ``0``/``false``).
Both paths implement identical arithmetic; integer hashing is bit-identical,
floating point results agree to within a few ulps (libm vs numpy SIMD).

Kernels
-------
counter_normals(seed, stream, counters)
    Standard Gaussians addressed by (seed, stream, counter). Each value
    depends only on its own address, so draws never shift when more
    coefficients or replicates are requested.
fold_bins(values, residues, period)
    Complex aliasing sum ``out[r] = sum(values[i] for residues[i] == r)``.
block_energies(x, length)
    Sums of ``|x|**2`` over consecutive blocks of ``length`` entries; the
    last block may be short.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def _flag_disabled() -> bool:
    value = os.environ.get("FDECON_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no")


def stream_key(seed: int, stream: int) -> int:
    """Collapse (seed, stream) into one 64-bit key (pure python, exact)."""

    def mix(z):
        z = (z + _GOLDEN) & _MASK64
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    return mix((int(seed) & _MASK64) ^ mix(int(stream) & _MASK64))


# ---------------------------------------------------------------- numpy path


def _np_mix(z):
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _np_counter_normals(key, counters):
    c = np.asarray(counters, dtype=np.uint64)
    base = np.uint64(key) + np.uint64(2) * c * np.uint64(_GOLDEN)
    h1 = _np_mix(base)
    h2 = _np_mix(base + np.uint64(_GOLDEN))
    u1 = ((h1 >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def _np_fold_bins(values, residues, period):
    re = np.bincount(residues, weights=values.real, minlength=period)
    im = np.bincount(residues, weights=values.imag, minlength=period)
    return re + 1j * im


def _np_block_energies(x, length):
    x2 = (x.real * x.real + x.imag * x.imag) if np.iscomplexobj(x) else x * x
    starts = np.arange(0, x2.shape[0], length)
    return np.add.reduceat(x2, starts) if starts.size else np.zeros(0)


numpy_impl = SimpleNamespace(
    name="numpy",
    counter_normals=_np_counter_normals,
    fold_bins=_np_fold_bins,
    block_energies=_np_block_energies,
)

# ---------------------------------------------------------------- numba path

numba_impl = None
try:
    import numba
    from numba import njit

    _U_GOLDEN = numba.uint64(_GOLDEN)
    _U_MIX1 = numba.uint64(_MIX1)
    _U_MIX2 = numba.uint64(_MIX2)

    @njit(cache=True)
    def _nb_mix(z):
        z = z + _U_GOLDEN
        z = (z ^ (z >> numba.uint64(30))) * _U_MIX1
        z = (z ^ (z >> numba.uint64(27))) * _U_MIX2
        return z ^ (z >> numba.uint64(31))

    @njit(cache=True)
    def _nb_counter_normals_impl(key, counters):
        out = np.empty(counters.shape[0], dtype=np.float64)
        two = numba.uint64(2)
        for i in range(counters.shape[0]):
            base = key + two * counters[i] * _U_GOLDEN
            h1 = _nb_mix(base)
            h2 = _nb_mix(base + _U_GOLDEN)
            u1 = (np.float64(h1 >> numba.uint64(11)) + 1.0) * _INV_2_53
            u2 = np.float64(h2 >> numba.uint64(11)) * _INV_2_53
            out[i] = np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)
        return out

    @njit(cache=True)
    def _nb_fold_bins_impl(re, im, residues, period):
        out_re = np.zeros(period, dtype=np.float64)
        out_im = np.zeros(period, dtype=np.float64)
        for i in range(residues.shape[0]):
            r = residues[i]
            out_re[r] += re[i]
            out_im[r] += im[i]
        return out_re, out_im

    @njit(cache=True)
    def _nb_block_energies_impl(x2, length):
        nblocks = (x2.shape[0] + length - 1) // length
        out = np.zeros(nblocks, dtype=np.float64)
        for r in range(nblocks):
            acc = 0.0
            for i in range(r * length, min((r + 1) * length, x2.shape[0])):
                acc += x2[i]
            out[r] = acc
        return out

    def _nb_counter_normals(key, counters):
        c = np.ascontiguousarray(counters, dtype=np.uint64)
        return _nb_counter_normals_impl(np.uint64(key), c)

    def _nb_fold_bins(values, residues, period):
        values = np.asarray(values, dtype=np.complex128)
        re, im = _nb_fold_bins_impl(
            np.ascontiguousarray(values.real),
            np.ascontiguousarray(values.imag),
            np.ascontiguousarray(residues, dtype=np.int64),
            int(period),
        )
        return re + 1j * im

    def _nb_block_energies(x, length):
        x2 = (x.real * x.real + x.imag * x.imag) if np.iscomplexobj(x) else x * x
        return _nb_block_energies_impl(np.ascontiguousarray(x2, dtype=np.float64), int(length))

    numba_impl = SimpleNamespace(
        name="numba",
        counter_normals=_nb_counter_normals,
        fold_bins=_nb_fold_bins,
        block_energies=_nb_block_energies,
    )
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba_impl = None


def active():
    """Return the implementation namespace selected for this process."""
    if numba_impl is None or _flag_disabled():
        return numpy_impl
    return numba_impl


def counter_normals(seed: int, stream: int, counters) -> np.ndarray:
    return active().counter_normals(stream_key(seed, stream), counters)


def fold_bins(values, residues, period: int) -> np.ndarray:
    return active().fold_bins(values, residues, period)


def block_energies(x, length: int) -> np.ndarray:
    return active().block_energies(x, length)
