"""Command-line interface: generate, estimate, optimize, bench.

Configuration can come from a TOML file (``--config``); explicit flags
override file values, which override built-in defaults.  Unknown config
keys are rejected.  Exit codes: 0 success, 2 validation error, 3 numerical
failure, 4 partial benchmark failure.

All primary outputs are byte-identical across reruns with the same seed.
The one exception is ``bench_timings.csv``, which records wall-clock times
and is therefore excluded from that guarantee.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .baselines import (
    ATE_BASELINE_KINDS,
    estimate_ate_baseline,
    fit_sma,
    random_policy,
    sma_policy_from_model,
)
from .data import (
    Dataset,
    GroundTruth,
    SyntheticSpec,
    load_csv,
    make_synthetic,
    train_test_split,
    write_csv,
)
from .errors import NoGroundTruth, NumericalError, ValidationError
from .estimator import (
    InfluenceArrays,
    ate_error,
    estimate_sie,
    prepare_influence,
)
from .nuisance import NuisanceSpec, OutcomeConfig, fit_pair
from .optimizer import RsConfig, delta_to_policy, optimize, policy_value

BASIS_FLAG_TO_KIND = {
    "raw": "raw",
    "poly2": "polynomial2",
    "poly2rbf": "polynomial2_plus_rbf",
}

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

SHARED_DEFAULTS = {
    "input": None,
    "out_dir": ".",
    "seed": 0,
    "k": 5,
    "delta": 1.0,
    "basis": "poly2",
    "outcome": "gbstumps",
    "oracle_nuisance": False,
    "within_fold": False,
    "jobs": 1,
    "t_col": "t",
    "y_col": "y",
    "config": None,
}

COMMAND_DEFAULTS = {
    "generate": {
        **SHARED_DEFAULTS,
        "n": 2000,
        "dgp": "default",
        "sigma": 0.1,
        "out": "synthetic.csv",
    },
    "estimate": {
        **SHARED_DEFAULTS,
        "baselines": "",
        "delta_grid": "",
        "misspecify_propensity": False,
        "misspecify_outcome": False,
    },
    "optimize": {
        **SHARED_DEFAULTS,
        "steps": 100,
        "alpha": 0.25,
        "nu": 0.05,
        "directions": 32,
        "top_directions": 8,
        "once_only_directions": False,
        "normalize_rewards": False,
        "raw_delta": False,
        "threshold": 0.5,
        "test_frac": 0.2,
    },
    "bench": {
        **SHARED_DEFAULTS,
        "input_dir": None,
        "estimators": "sie,ols,ipw,aipw",
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochint",
        description="Stochastic-intervention effect estimation and optimization.",
    )
    parser.add_argument("--version", action="version", version=f"stochint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--config", help="TOML config file mirroring the flags")
        p.add_argument("--input", help="input dataset CSV")
        p.add_argument("--out-dir", dest="out_dir", help="directory for outputs")
        p.add_argument("--seed", type=int, help="global random seed")
        p.add_argument("--k", type=int, help="number of cross-fitting folds")
        p.add_argument("--delta", type=float, help="stochastic intervention degree")
        p.add_argument("--basis", choices=sorted(BASIS_FLAG_TO_KIND),
                       help="propensity basis expansion")
        p.add_argument("--outcome", choices=["linear", "gbstumps"],
                       help="potential-outcome learner")
        p.add_argument("--oracle-nuisance", dest="oracle_nuisance", action="store_true",
                       help="replace fitted nuisances with ground-truth columns")
        p.add_argument("--within-fold", dest="within_fold", action="store_true",
                       help="fit nuisances on each fold itself instead of its complement")
        p.add_argument("--jobs", type=int, help="parallel workers (bench only)")
        p.add_argument("--t-col", dest="t_col", help="treatment column name")
        p.add_argument("--y-col", dest="y_col", help="outcome column name")

    gen = sub.add_parser("generate", help="write a synthetic dataset CSV",
                         argument_default=argparse.SUPPRESS)
    shared(gen)
    gen.add_argument("--n", type=int, help="number of units")
    gen.add_argument("--dgp", choices=["default", "linear", "randomized"],
                     help="data-generating process")
    gen.add_argument("--sigma", type=float, help="outcome noise scale")
    gen.add_argument("--out", help="output CSV path")

    est = sub.add_parser("estimate", help="estimate effects on a dataset",
                         argument_default=argparse.SUPPRESS)
    shared(est)
    est.add_argument("--baselines",
                     help="comma list from {ols,ipw,aipw} or 'all'")
    est.add_argument("--delta-grid", dest="delta_grid",
                     help="comma list of degrees for a psi-hat sweep CSV")
    est.add_argument("--misspecify-propensity", dest="misspecify_propensity",
                     action="store_true", help="intercept-only propensity (testing)")
    est.add_argument("--misspecify-outcome", dest="misspecify_outcome",
                     action="store_true", help="global-mean outcome model (testing)")

    opt = sub.add_parser("optimize", help="search per-unit intervention degrees",
                         argument_default=argparse.SUPPRESS)
    shared(opt)
    opt.add_argument("--steps", type=int, help="optimization steps")
    opt.add_argument("--alpha", type=float, help="step size")
    opt.add_argument("--nu", type=float, help="exploration noise scale")
    opt.add_argument("--directions", type=int, help="random directions per step")
    opt.add_argument("--top-directions", dest="top_directions", type=int,
                     help="directions kept for each update")
    opt.add_argument("--once-only-directions", dest="once_only_directions",
                     action="store_true", help="draw directions once before the loop")
    opt.add_argument("--normalize-rewards", dest="normalize_rewards",
                     action="store_true", help="scale updates by reward std")
    opt.add_argument("--raw-delta", dest="raw_delta", action="store_true",
                     help="optimize clamped raw degrees instead of log-degrees")
    opt.add_argument("--threshold", type=float, help="policy threshold on q")
    opt.add_argument("--test-frac", dest="test_frac", type=float,
                     help="held-out fraction for policy evaluation")

    ben = sub.add_parser("bench", help="aggregate estimates over replication CSVs",
                         argument_default=argparse.SUPPRESS)
    shared(ben)
    ben.add_argument("--input-dir", dest="input_dir",
                     help="directory of replication CSVs")
    ben.add_argument("--estimators", help="comma list from {sie,ols,ipw,aipw}")

    return parser


def resolve_config(command: str, explicit: dict) -> dict:
    """Merge defaults, TOML config, and explicit flags (later wins)."""
    merged = dict(COMMAND_DEFAULTS[command])
    config_path = explicit.get("config") or merged.get("config")
    if config_path:
        with open(config_path, "rb") as fh:
            doc = tomllib.load(fh)
        section = doc.get(command, {k: v for k, v in doc.items() if not isinstance(v, dict)})
        for key, value in section.items():
            key = key.replace("-", "_")
            if key not in merged:
                raise ValidationError(f"unknown config key {key!r} for command {command!r}")
            merged[key] = value
    merged.update(explicit)
    return merged


def _nuisance_spec(cfg: dict) -> NuisanceSpec:
    basis = BASIS_FLAG_TO_KIND[cfg["basis"]]
    outcome = OutcomeConfig(
        learner=cfg["outcome"],
        misspecified=bool(cfg.get("misspecify_outcome", False)),
    )
    return NuisanceSpec(
        basis=basis,
        propensity_misspecified=bool(cfg.get("misspecify_propensity", False)),
        outcome=outcome,
    )


def _load_input(cfg: dict) -> tuple[Dataset, GroundTruth | None]:
    if not cfg.get("input"):
        raise ValidationError("--input is required")
    return load_csv(cfg["input"], t_col=cfg["t_col"], y_col=cfg["y_col"])


def _require_oracle(gt: GroundTruth | None) -> GroundTruth:
    if gt is None or gt.p_true is None:
        raise NoGroundTruth("--oracle-nuisance needs mu0, mu1 and p_true columns")
    return gt


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(cfg: dict) -> int:
    if cfg["dgp"] == "default":
        spec = SyntheticSpec.default(sigma=cfg["sigma"])
    elif cfg["dgp"] == "linear":
        spec = SyntheticSpec.linear(sigma=cfg["sigma"])
    else:
        spec = SyntheticSpec.randomized(sigma=cfg["sigma"])
    ds, gt = make_synthetic(spec, cfg["n"], cfg["seed"])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, ds, gt)
    print(f"wrote {ds.n} units x {ds.d} covariates to {out}")
    return EXIT_OK


def cmd_estimate(cfg: dict) -> int:
    ds, gt = _load_input(cfg)
    nuisance = _nuisance_spec(cfg)
    oracle = _require_oracle(gt) if cfg["oracle_nuisance"] else None
    prepared = prepare_influence(
        ds, k=cfg["k"], nuisance=nuisance, seed=cfg["seed"],
        oracle=oracle, within_fold=cfg["within_fold"],
    )
    report = estimate_sie(
        ds, delta=cfg["delta"], k=cfg["k"], nuisance=nuisance,
        seed=cfg["seed"], prepared=prepared,
    )

    requested = [b for b in cfg["baselines"].replace("all", "ols,ipw,aipw").split(",") if b]
    alias = {"ols": "ols_plugin", "ipw": "ipw", "aipw": "aipw"}
    baseline_values = {}
    for name in requested:
        kind = alias.get(name)
        if kind is None or kind not in ATE_BASELINE_KINDS:
            raise ValidationError(f"unknown baseline {name!r}")
        baseline_values[name] = estimate_ate_baseline(
            kind, ds, k=cfg["k"], seed=cfg["seed"], nuisance=nuisance
        )

    doc = {"sie": report.to_dict(), "baselines": baseline_values}
    if gt is not None:
        eps = {"sie": ate_error(report.tau_ate_plugin, gt)}
        for name, value in baseline_values.items():
            eps[name] = ate_error(value, gt)
        doc["epsilon_ate"] = eps
        doc["oracle_ate"] = gt.ate()

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "report.json", doc)

    if cfg["delta_grid"]:
        grid = [float(v) for v in cfg["delta_grid"].split(",") if v]
        lines = ["delta,psi_hat"]
        for dv in grid:
            psi = float(np.mean(prepared.arrays.phi(math.log(dv))))
            lines.append(f"{_fmt(dv)},{_fmt(psi)}")
        (out_dir / "delta_grid.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    print(f"psi_hat={report.psi_hat:.6g} tau_sie={report.tau_sie:.6g} "
          f"tau_ate_plugin={report.tau_ate_plugin:.6g}")
    return EXIT_OK


def cmd_optimize(cfg: dict) -> int:
    ds, gt = _load_input(cfg)
    nuisance = _nuisance_spec(cfg)
    train_idx, test_idx = train_test_split(ds, cfg["test_frac"], cfg["seed"])
    ds_train, ds_test = ds.subset(train_idx), ds.subset(test_idx)

    if cfg["oracle_nuisance"]:
        gt_test = _require_oracle(gt).subset(test_idx)
        arrays = InfluenceArrays.from_oracle(ds_test, gt_test)
    else:
        pair = fit_pair(ds_train, np.arange(ds_train.n), nuisance, seed=cfg["seed"])
        arrays = InfluenceArrays.from_single_pair(ds_test, pair)

    rs_cfg = RsConfig(
        alpha=cfg["alpha"],
        nu=cfg["nu"],
        steps=cfg["steps"],
        directions=cfg["directions"],
        top_directions=cfg["top_directions"],
        resample_directions=not cfg["once_only_directions"],
        normalize_rewards=cfg["normalize_rewards"],
        param_mode="raw" if cfg["raw_delta"] else "log",
        seed=cfg["seed"],
    )
    result = optimize(arrays, rs_cfg)

    policies = {
        "rs_sio": delta_to_policy(result.param.lam, arrays.p_hat, cfg["threshold"]),
        "sma_linear": sma_policy_from_model(
            fit_sma(ds_train, "linear", seed=cfg["seed"]), ds_test.x
        ),
        "sma_gbstumps": sma_policy_from_model(
            fit_sma(ds_train, "gbstumps", seed=cfg["seed"]), ds_test.x
        ),
        "random": random_policy(ds_test.n, 0.5, seed=cfg["seed"]),
    }
    values = {
        name: policy_value(ds_test.t, ds_test.y, arrays.p_hat, pol)
        for name, pol in policies.items()
    }

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    lam_lines = ["unit,lambda"]
    for unit, lam in zip(test_idx, result.param.lam):
        lam_lines.append(f"{int(unit)},{_fmt(float(lam))}")
    (out_dir / "lambda.csv").write_text("\n".join(lam_lines) + "\n", encoding="utf-8")
    with open(out_dir / "log.jsonl", "w", encoding="utf-8") as fh:
        for record in result.steps:
            fh.write(json.dumps(record.to_dict()) + "\n")
    _write_json(
        out_dir / "policy_report.json",
        {
            "policy_value": values,
            "initial_reward": result.initial_reward,
            "final_reward": result.final_reward,
            "n_train": int(ds_train.n),
            "n_test": int(ds_test.n),
            "treated_fraction": {
                name: float(np.mean(pol)) for name, pol in policies.items()
            },
            "config": {
                "alpha": rs_cfg.alpha, "nu": rs_cfg.nu, "steps": rs_cfg.steps,
                "directions": rs_cfg.directions,
                "top_directions": rs_cfg.top_directions,
                "param_mode": rs_cfg.param_mode, "seed": rs_cfg.seed,
                "threshold": cfg["threshold"], "oracle_nuisance": cfg["oracle_nuisance"],
            },
        },
    )
    print("policy values: " + ", ".join(f"{k}={v:.6g}" for k, v in values.items()))
    return EXIT_OK


def _bench_one(task) -> dict:
    """One replication of the benchmark; runs in a worker process."""
    path, rep, estimators, cfg = task
    out = {"replication": rep, "file": Path(path).name, "results": {}, "error": None}
    try:
        ds, gt = load_csv(path, t_col=cfg["t_col"], y_col=cfg["y_col"])
        nuisance = _nuisance_spec(cfg)
        seed = cfg["seed"] + rep  # re-seed per replication
        oracle = _require_oracle(gt) if cfg["oracle_nuisance"] else None
        has_gt = gt is not None
        for name in estimators:
            start = time.perf_counter()
            if name == "sie":
                report = estimate_sie(
                    ds, delta=cfg["delta"], k=cfg["k"], nuisance=nuisance,
                    seed=seed, oracle=oracle, within_fold=cfg["within_fold"],
                )
                tau = report.tau_ate_plugin
                extra = {"psi_hat": report.psi_hat, "tau_sie": report.tau_sie}
            else:
                kind = {"ols": "ols_plugin", "ipw": "ipw", "aipw": "aipw"}[name]
                tau = estimate_ate_baseline(kind, ds, k=cfg["k"], seed=seed,
                                            nuisance=nuisance)
                extra = {}
            elapsed = time.perf_counter() - start
            entry = {"tau": float(tau), **extra, "seconds": elapsed}
            if has_gt:
                entry["eps_ate"] = ate_error(tau, gt)
            out["results"][name] = entry
    except (ValidationError, NumericalError, OSError) as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


def cmd_bench(cfg: dict) -> int:
    if not cfg.get("input_dir"):
        raise ValidationError("--input-dir is required")
    files = sorted(Path(cfg["input_dir"]).glob("*.csv"))
    if not files:
        raise ValidationError(f"no CSV files found in {cfg['input_dir']}")
    estimators = [e for e in cfg["estimators"].split(",") if e]
    for name in estimators:
        if name not in ("sie", "ols", "ipw", "aipw"):
            raise ValidationError(f"unknown estimator {name!r}")

    tasks = [(str(path), rep, estimators, cfg) for rep, path in enumerate(files)]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as pool:
            rep_results = list(pool.map(_bench_one, tasks))
    else:
        rep_results = [_bench_one(task) for task in tasks]

    failures = [r for r in rep_results if r["error"]]
    completed = [r for r in rep_results if not r["error"]]
    have_eps = bool(completed) and all(
        "eps_ate" in r["results"][name] for r in completed for name in estimators
    )

    def collect(name, key):
        return np.array([r["results"][name][key] for r in completed])

    summary = {}
    for name in estimators:
        if not completed:
            break
        taus = collect(name, "tau")
        entry = {
            "n_reps": len(completed),
            "tau_mean": float(np.mean(taus)),
            "tau_std": float(np.std(taus, ddof=1)) if len(taus) > 1 else 0.0,
        }
        if have_eps:
            eps = collect(name, "eps_ate")
            entry["eps_ate_mean"] = float(np.mean(eps))
            entry["eps_ate_std"] = float(np.std(eps, ddof=1)) if len(eps) > 1 else 0.0
        if name == "sie":
            psi = collect(name, "psi_hat")
            entry["psi_hat_mean"] = float(np.mean(psi))
            entry["psi_hat_std"] = float(np.std(psi, ddof=1)) if len(psi) > 1 else 0.0
        summary[name] = entry

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)

    columns = ["estimator", "n_reps", "tau_mean", "tau_std"]
    if have_eps:
        columns += ["eps_ate_mean", "eps_ate_std"]
    columns += ["psi_hat_mean", "psi_hat_std"]
    lines = [",".join(columns)]
    for name in estimators:
        if name not in summary:
            continue
        entry = summary[name]
        row = [name, str(entry["n_reps"]), _fmt(entry["tau_mean"]), _fmt(entry["tau_std"])]
        if have_eps:
            row += [_fmt(entry["eps_ate_mean"]), _fmt(entry["eps_ate_std"])]
        row += [
            _fmt(entry.get("psi_hat_mean", "")) if "psi_hat_mean" in entry else "",
            _fmt(entry.get("psi_hat_std", "")) if "psi_hat_std" in entry else "",
        ]
        lines.append(",".join(row))
    (out_dir / "bench_results.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    tidy = ["replication,estimator,metric,value"]
    for r in completed:
        for name in estimators:
            entry = r["results"][name]
            for metric in ("tau", "psi_hat", "tau_sie", "eps_ate"):
                if metric in entry:
                    tidy.append(
                        f"{r['replication']},{name},{metric},{_fmt(entry[metric])}"
                    )
    (out_dir / "tidy.csv").write_text("\n".join(tidy) + "\n", encoding="utf-8")

    timing = ["estimator,total_seconds,mean_seconds"]
    for name in estimators:
        secs = [r["results"][name]["seconds"] for r in completed if name in r["results"]]
        total = sum(secs)
        mean = total / len(secs) if secs else 0.0
        timing.append(f"{name},{total!r},{mean!r}")
    (out_dir / "bench_timings.csv").write_text("\n".join(timing) + "\n", encoding="utf-8")

    _write_json(
        out_dir / "bench_report.json",
        {
            "summary": summary,
            "failures": [
                {"replication": r["replication"], "file": r["file"], "error": r["error"]}
                for r in failures
            ],
            "n_files": len(files),
            "estimators": estimators,
        },
    )

    for name, entry in summary.items():
        eps_part = (
            f" eps_ate={entry['eps_ate_mean']:.4f}+-{entry['eps_ate_std']:.4f}"
            if have_eps else ""
        )
        print(f"{name}: tau={entry['tau_mean']:.4f}+-{entry['tau_std']:.4f}{eps_part}")
    if failures:
        print(f"{len(failures)} replication(s) failed; see bench_report.json",
              file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "optimize": cmd_optimize,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    explicit = {k: v for k, v in vars(namespace).items() if k != "command"}
    try:
        cfg = resolve_config(namespace.command, explicit)
        return COMMANDS[namespace.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
