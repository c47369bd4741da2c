"""Deterministic text I/O: CSV tables with a metadata line, canonical JSON, configs.

Every CSV starts with one ``# key=value ...`` metadata line followed by a
header row. Floats are written with 17 significant digits so files round-trip
exactly and re-runs produce identical bytes.
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError
from .kernels import ConvolutionKernel
from .meyer import FourierSeries
from .model import ContinuousObservation, DiscreteObservation


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return "%.17g" % x


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def metadata_line(meta: dict) -> str:
    parts = [f"{k}={meta[k]}" for k in sorted(meta)]
    return "# " + " ".join(parts) + "\n"


def parse_metadata_line(line: str) -> dict:
    if not line.startswith("#"):
        raise ConfigError("missing '# key=value' metadata line")
    out = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ConfigError(f"malformed metadata token {token!r}")
        out[key] = value
    return out


def write_csv(path, columns: list[str], rows, meta: dict | None = None):
    """Write rows (iterables of already formatted strings or numbers) with LF endings."""
    meta = dict(meta or {})
    meta.setdefault("version", __version__)
    lines = [metadata_line(meta), ",".join(columns) + "\n"]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    Path(path).write_text("".join(lines), newline="\n")


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    text = Path(path).read_text()
    lines = text.splitlines()
    if len(lines) < 2:
        raise ConfigError(f"{path}: expected a metadata line and a header row")
    meta = parse_metadata_line(lines[0])
    header = lines[1].split(",")
    rows = [ln.split(",") for ln in lines[2:] if ln]
    for i, r in enumerate(rows, start=3):
        if len(r) != len(header):
            raise ConfigError(f"{path}:{i}: expected {len(header)} fields, got {len(r)}")
    return meta, header, rows


def write_json(path, obj, meta: dict | None = None):
    payload = dict(obj)
    payload["meta"] = dict(meta or {}, version=__version__)
    Path(path).write_text(canonical_json(payload), newline="\n")


# ------------------------------------------------------------------ observations

CONTINUOUS_COLUMNS = ["m", "re", "im"]
DISCRETE_COLUMNS = ["l", "i", "u_l", "t_i", "y"]


def observation_meta(obs, seed=None, chash=None) -> dict:
    if isinstance(obs, ContinuousObservation):
        meta = {"model": "continuous", "n": fmt(obs.n), "N": "na", "M": 1}
    else:
        meta = {"model": "discrete", "n": obs.n, "N": obs.N, "M": obs.M}
    meta["kernel"] = obs.kernel.name
    meta["seed"] = obs.seed if seed is None else seed
    if chash is not None:
        meta["config_sha256"] = chash
    return meta


def write_observation(path, obs, seed=None, chash=None):
    meta = observation_meta(obs, seed, chash)
    if isinstance(obs, ContinuousObservation):
        f = obs.fhat
        rows = ((str(int(m)), c.real, c.imag) for m, c in zip(f.frequencies, f.coeffs))
        write_csv(path, CONTINUOUS_COLUMNS, rows, meta)
        return
    pts = obs.design.points
    N = obs.N
    t = np.arange(N) / N

    def rows():
        for l in range(obs.M):
            ul = fmt(pts[l])
            for i in range(N):
                yield (str(l), str(i), ul, t[i], obs.samples[l, i])

    write_csv(path, DISCRETE_COLUMNS, rows(), meta)


def read_observation(path, kernel: ConvolutionKernel):
    """Load an observation written by :func:`write_observation` for ``kernel``."""
    meta, header, rows = read_csv(path)
    if meta.get("kernel") != kernel.name:
        raise ConfigError(f"{path}: observation kernel {meta.get('kernel')!r} does not match {kernel.name!r}")
    seed = meta.get("seed")
    seed = int(seed) if seed not in (None, "None") else None
    if header == CONTINUOUS_COLUMNS:
        if kernel.design.mode != "continuous":
            raise ConfigError(f"{path}: continuous statistics given for a discrete design")
        m = np.array([int(r[0]) for r in rows])
        vals = np.array([complex(float(r[1]), float(r[2])) for r in rows])
        mmax = int(np.max(np.abs(m))) if m.size else 0
        if m.size != 2 * mmax + 1 or np.any(np.sort(m) != np.arange(-mmax, mmax + 1)):
            raise ConfigError(f"{path}: frequencies must cover -Mmax..Mmax exactly once")
        coeffs = np.zeros(2 * mmax + 1, dtype=np.complex128)
        coeffs[m + mmax] = vals
        return ContinuousObservation(FourierSeries(coeffs), float(meta["n"]), kernel, seed, None)
    if header == DISCRETE_COLUMNS:
        if kernel.design.mode != "discrete":
            raise ConfigError(f"{path}: discrete samples given for a continuous design")
        M, N = int(meta["M"]), int(meta["N"])
        if len(rows) != M * N:
            raise ConfigError(f"{path}: expected {M * N} samples, found {len(rows)}")
        if M != kernel.design.M:
            raise ConfigError(f"{path}: file has M={M} channels, design has {kernel.design.M}")
        samples = np.empty((M, N))
        for r in rows:
            samples[int(r[0]), int(r[1])] = float(r[4])
        us = {int(r[0]): float(r[2]) for r in rows}
        if not np.allclose([us[l] for l in range(M)], kernel.design.points, rtol=0, atol=1e-12):
            raise ConfigError(f"{path}: channel positions u_l differ from the configured design")
        return DiscreteObservation(samples, kernel.with_design(kernel.design.with_N(N)), seed, None)
    raise ConfigError(f"{path}: unrecognized columns {header}")


def write_series(path, f: FourierSeries, meta: dict):
    rows = ((str(int(m)), c.real, c.imag) for m, c in zip(f.frequencies, f.coeffs))
    write_csv(path, CONTINUOUS_COLUMNS, rows, meta)


def write_grid(path, values: np.ndarray, meta: dict):
    N = values.size
    write_csv(path, ["t", "value"], ((i / N, v) for i, v in enumerate(values)), meta)


RISK_COLUMNS = ["n", "mean_risk", "se", "replicates", "j0", "J", "degenerate_flag"]


def write_risk_curve(path, curve, meta: dict):
    rows = ((p.n, p.mean, p.se, str(p.replicates), str(p.j0), str(p.J), str(int(p.degenerate)))
            for p in curve.points)
    write_csv(path, RISK_COLUMNS, rows, meta)
