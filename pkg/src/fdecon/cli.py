"""Command line runner driven by one JSON config file.

Subcommands: ``verify-kernel``, ``simulate``, ``estimate``, ``risk-curve`` and
``predict-rate``. Flags override config keys. Exit codes: 0 success,
1 computation failure, 2 usage or configuration error.

Config keys
-----------
kernel      ``{"name": ..., "params": {...}, "design": {...}, "decay": {...}}``;
            a discrete design is ``{"mode": "discrete", "a", "b", "M"}`` (midpoints)
            or ``{"mode": "discrete", "points": [...]}``
truth       ``{"kind", "s", "p", "q", "A", "seed", "max_level", "degree"}``
estimator   ``{"regime", "d", "j0", "J", "loglog"}``; ``d`` may be ``"calibrated"``
model       ``"continuous"`` or ``"discrete"``
n, n_grid   sample size for simulate, grid for risk-curve
replicates, seed, out, workers, noise_scale, verify
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, FdeconError, HypothesisError, ParameterError, PreconditionError, RegimeError
from .estimator import REGIMES, estimate
from .io import (config_hash, read_observation, write_grid, write_json, write_observation, write_risk_curve,
                 write_series)
from .kernels import KernelDecay, SamplingDesign, log_delta_stat, make_kernel, verify_decay
from .meyer import evaluate_on_grid
from .model import ContinuousObservation, RngSpec, estimate_fm, simulate_continuous, simulate_discrete
from .risk import TEST_FUNCTION_KINDS, BesovParams, PlanSpec, _check_span, make_test_function, predicted_rate, risk_curve

DEFAULTS = {
    "kernel": {"name": None, "params": {}, "design": None, "decay": None},
    "truth": {"kind": "besov_dense", "s": 2.0, "p": 2.0, "q": 2.0, "A": 1.0, "seed": 1, "max_level": 10,
              "degree": 8},
    "estimator": {"regime": "auto", "d": 1.0, "j0": None, "J": None, "loglog": False},
    "model": "continuous",
    "n": None,
    "n_grid": None,
    "replicates": 200,
    "seed": 0,
    "out": "out",
    "workers": 1,
    "noise_scale": 1.0,
    "verify": {"m_range": [2, 64], "j_range": [2, 8], "max_spread": 10.0},
}

USAGE_ERRORS = (ConfigError, ParameterError, PreconditionError, HypothesisError, RegimeError, FileNotFoundError)


class _Config:
    """Validated config plus the source text for line-level diagnostics."""

    def __init__(self, data: dict, source: str = "", path: str = "<config>"):
        self.data = data
        self.source = source
        self.path = path

    def line_of(self, key: str) -> int | None:
        needle = f'"{key}"'
        for i, line in enumerate(self.source.splitlines(), start=1):
            if needle in line:
                return i
        return None

    def error(self, keypath: str, message: str) -> ConfigError:
        line = self.line_of(keypath.split(".")[-1])
        where = f"{self.path}:{line}" if line else self.path
        return ConfigError(f"{where}: {keypath}: {message}")

    def __getitem__(self, key):
        return self.data[key]


def _merge(defaults: dict, given: dict, cfg: _Config, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise cfg.error(path, "unknown key")
        if isinstance(defaults[key], dict) and key not in ("params",) and defaults[key]:
            if not isinstance(value, dict):
                raise cfg.error(path, "expected an object")
            out[key] = _merge(defaults[key], value, cfg, path + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | None, overrides: dict) -> _Config:
    source, raw = "", {}
    if path is not None:
        source = Path(path).read_text()
        try:
            raw = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    cfg = _Config({}, source, path or "<flags>")
    data = _merge(DEFAULTS, raw, cfg)
    for keypath, value in overrides.items():
        if value is None:
            continue
        node = data
        *head, last = keypath.split(".")
        for k in head:
            node = node[k]
        node[last] = value
    cfg.data = data
    _validate(cfg)
    return cfg


def _validate(cfg: _Config):
    d = cfg.data
    if not d["kernel"]["name"]:
        raise cfg.error("kernel.name", "required")
    if d["model"] not in ("continuous", "discrete"):
        raise cfg.error("model", "must be 'continuous' or 'discrete'")
    est = d["estimator"]
    if est["regime"] not in REGIMES:
        raise cfg.error("estimator.regime", f"must be one of {REGIMES}")
    if not (est["d"] == "calibrated" or (isinstance(est["d"], (int, float)) and est["d"] >= 0)):
        raise cfg.error("estimator.d", "must be a nonnegative number or 'calibrated'")
    if d["truth"]["kind"] not in TEST_FUNCTION_KINDS:
        raise cfg.error("truth.kind", f"must be one of {TEST_FUNCTION_KINDS}")
    for key in ("replicates", "workers", "seed"):
        if not isinstance(d[key], int) or isinstance(d[key], bool) or d[key] < 0:
            raise cfg.error(key, "must be a nonnegative integer")
    if d["replicates"] < 2:
        raise cfg.error("replicates", "must be at least 2")
    if d["n_grid"] is not None:
        if not isinstance(d["n_grid"], list) or not all(isinstance(v, (int, float)) and v > 0 for v in d["n_grid"]):
            raise cfg.error("n_grid", "must be a list of positive numbers")
    if d["n"] is not None and not (isinstance(d["n"], (int, float)) and d["n"] > 0):
        raise cfg.error("n", "must be a positive number")
    design = d["kernel"]["design"]
    if design is not None:
        if not isinstance(design, dict) or design.get("mode") not in ("continuous", "discrete"):
            raise cfg.error("design", "needs mode 'continuous' or 'discrete'")
        if design["mode"] == "discrete" and "points" not in design and not {"a", "b", "M"} <= set(design):
            raise cfg.error("design", "discrete design needs 'points' or 'a', 'b', 'M'")
    if d["model"] == "discrete" and (design is None or design.get("mode") != "discrete"):
        raise cfg.error("model", "discrete model needs a discrete kernel.design")
    try:
        build_kernel(d)
        build_bp(d)
    except (ParameterError, HypothesisError) as exc:
        raise cfg.error("kernel" if isinstance(exc, ParameterError) else "truth", str(exc)) from None


def build_kernel(d: dict):
    spec = d["kernel"]
    design = None
    ds = spec.get("design")
    if ds is not None:
        if ds["mode"] == "continuous":
            design = SamplingDesign.continuous(ds["a"], ds["b"]) if "a" in ds else None
        elif "points" in ds:
            design = SamplingDesign.discrete(ds["points"], N=ds.get("N"), a=ds.get("a"), b=ds.get("b"))
        else:
            design = SamplingDesign.midpoints(ds["a"], ds["b"], int(ds["M"]), N=ds.get("N"))
    decay = KernelDecay(**spec["decay"]) if spec.get("decay") else None
    return make_kernel(spec["name"], design=design, decay=decay, **spec.get("params", {}))


def build_bp(d: dict) -> BesovParams:
    t = d["truth"]
    return BesovParams(float(t["s"]), float(t["p"]), float(t["q"]), float(t["A"]))


def build_truth(d: dict):
    t = d["truth"]
    return make_test_function(t["kind"], build_bp(d), seed=int(t["seed"]), max_level=int(t["max_level"]),
                              degree=int(t["degree"]))


def plan_spec(d: dict) -> PlanSpec:
    e = d["estimator"]
    return PlanSpec(e["regime"], e["d"], e["j0"], e["J"], bool(e["loglog"]))


def _experiment_hash(d: dict) -> str:
    # where outputs land does not change them, so "out" stays out of the hash
    return config_hash({k: v for k, v in d.items() if k != "out"})


def _meta(cfg: _Config, **extra) -> dict:
    meta = {"config_sha256": _experiment_hash(cfg.data), "seed": cfg["seed"], "kernel": cfg["kernel"]["name"]}
    meta.update(extra)
    return meta


def _outdir(cfg: _Config) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------ commands


def cmd_verify_kernel(cfg: _Config) -> dict:
    kernel = build_kernel(cfg.data)
    v = cfg["verify"]
    report = verify_decay(kernel, m_range=tuple(v["m_range"]), max_spread=float(v["max_spread"]))
    nu = kernel.decay.nu
    growth = []
    for j in range(int(v["j_range"][0]), int(v["j_range"][1]) + 1):
        ld = log_delta_stat(kernel, 1, j)
        growth.append({"j": j, "log_delta1": ld, "log_ratio_to_4nu_j": ld - 2 * nu * j * math.log(2.0)})
    ratios = [g["log_ratio_to_4nu_j"] for g in growth]
    bounded = bool(max(ratios) - min(ratios) <= math.log(float(v["max_spread"]))) if kernel.decay.alpha == 0 else None
    result = {"decay": report.to_dict(), "delta1_growth": growth, "delta1_bounded": bounded,
              "passed": bool(report.passed and bounded is not False), "config": cfg.data}
    write_json(_outdir(cfg) / "verify_kernel.json", result, _meta(cfg))
    print(f"verify-kernel {kernel.name}: {'PASS' if result['passed'] else 'FAIL'} "
          f"(K1={report.K1:.6g}, K2={report.K2:.6g})")
    return result


def cmd_simulate(cfg: _Config) -> Path:
    d = cfg.data
    kernel = build_kernel(d)
    truth = build_truth(d)
    n = d["n"]
    rng = RngSpec(int(d["seed"]), 0)
    out = _outdir(cfg) / "observation.csv"
    if d["model"] == "continuous":
        if n is None:
            raise cfg.error("n", "required for simulate")
        mmax = plan_spec(d).resolve(kernel, float(n)).mmax
        obs = simulate_continuous(truth, kernel, float(n), rng, mmax=mmax, noise_scale=float(d["noise_scale"]))
    else:
        N = kernel.design.N if n is None else int(round(n / kernel.design.M))
        if N is None:
            raise cfg.error("n", "discrete simulate needs n or design.N")
        obs = simulate_discrete(truth, kernel, rng, N=N, noise_scale=float(d["noise_scale"]))
    write_observation(out, obs, seed=d["seed"], chash=_experiment_hash(d))
    print(f"simulate: wrote {out}")
    return out


def cmd_estimate(cfg: _Config, observation: str) -> dict:
    d = cfg.data
    kernel = build_kernel(d)
    obs = read_observation(observation, kernel)
    n = obs.n
    ps = plan_spec(d)
    plan = ps.resolve(obs.kernel, n)
    if isinstance(obs, ContinuousObservation):
        if obs.fhat.mmax < plan.mmax:
            raise PreconditionError(f"observation resolves |m| <= {obs.fhat.mmax}; plan needs {plan.mmax}")
        fhat = obs.fhat
    else:
        fhat = estimate_fm(obs, mmax=plan.mmax)
    est = estimate(fhat, plan)
    outdir = _outdir(cfg)
    meta = _meta(cfg, n=n)
    write_series(outdir / "estimate.csv", est, meta)
    grid = 1 << max(8, int(math.ceil(math.log2(2 * est.mmax + 1))))
    write_grid(outdir / "estimate_grid.csv", evaluate_on_grid(est, grid), meta)
    write_json(outdir / "plan.json", {"plan": plan.to_dict(), "config": d}, meta)
    print(f"estimate: regime={plan.regime} j0={plan.j0} J={plan.J} -> {outdir}")
    return plan.to_dict()


def cmd_risk_curve(cfg: _Config):
    d = cfg.data
    ns = d["n_grid"]
    if not ns:
        raise cfg.error("n_grid", "required for risk-curve")
    _check_span(ns)
    kernel = build_kernel(d)
    truth = build_truth(d)
    bp = build_bp(d)
    curve = risk_curve(truth, kernel, plan_spec(d), [float(v) for v in ns], int(d["replicates"]), int(d["seed"]),
                       model=d["model"], workers=int(d["workers"]), bp=bp)
    outdir = _outdir(cfg)
    meta = _meta(cfg)
    write_risk_curve(outdir / "risk_curve.csv", curve, meta)
    summary = {"fit": curve.fit.to_dict(), "predicted": curve.predicted.to_dict(),
               "predicted_slope": -curve.predicted.exponent, "config": d}
    write_json(outdir / "fit.json", summary, meta)
    print(f"risk-curve: slope {curve.fit.slope:.4f} [{curve.fit.ci_low:.4f}, {curve.fit.ci_high:.4f}] "
          f"predicted {-curve.predicted.exponent:.4f} ({curve.predicted.case})")
    return curve


def cmd_predict_rate(cfg: _Config) -> dict:
    kernel = build_kernel(cfg.data)
    pred = predicted_rate(build_bp(cfg.data), kernel.decay)
    result = {"prediction": pred.to_dict(), "axis": pred.axis, "config": cfg.data}
    write_json(_outdir(cfg) / "predict_rate.json", result, _meta(cfg))
    print(f"predict-rate: {pred.case} exponent {pred.exponent:.6g} on {pred.axis}, log factor {pred.log_factor:.6g}")
    return result


# ------------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fdecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fdecon {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("verify-kernel", "simulate", "estimate", "risk-curve", "predict-rate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--replicates", type=int)
        p.add_argument("--d", dest="d", help="threshold constant (number or 'calibrated')")
        p.add_argument("--regime", choices=REGIMES)
        if name == "estimate":
            p.add_argument("observation", help="observation CSV written by 'simulate'")
    return parser


def _parse_d(value):
    if value is None or value == "calibrated":
        return value
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"--d expects a number or 'calibrated', got {value!r}") from None


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {"seed": args.seed, "out": args.out, "replicates": args.replicates,
                     "estimator.d": _parse_d(args.d), "estimator.regime": args.regime}
        cfg = load_config(args.config, overrides)
        if args.command == "verify-kernel":
            cmd_verify_kernel(cfg)
        elif args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "estimate":
            if not Path(args.observation).is_file():
                raise FileNotFoundError(f"observation file not found: {args.observation}")
            cmd_estimate(cfg, args.observation)
        elif args.command == "risk-curve":
            cmd_risk_curve(cfg)
        else:
            cmd_predict_rate(cfg)
    except USAGE_ERRORS as exc:
        print(f"fdecon: error: {exc}", file=sys.stderr)
        return 2
    except (FdeconError, ArithmeticError, ValueError) as exc:
        print(f"fdecon: computation failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
