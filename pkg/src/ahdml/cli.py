"""Command-line entry points: estimate, simulate, truth, summarize.

Every command resolves one configuration (JSON file plus flag overrides,
flags win), embeds the resolved config and its fingerprint in each output,
and exits nonzero with a machine-readable JSON error on failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .data import read_dataset_csv
from .errors import AhdmlError, ConfigError, DataFormatError, DegenerateEstimandError
from .estimators import CrossFitPlan, ah_dml, cox_marginal, g_computation
from .harness import emit_plotdata, result_table, run_grid, summaries_frame, summarize
from .influence import write_eif_csv
from .simulate import make_dgm, truth_theta

TRUTH_CACHE_VERSION = 1


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ahdml",
        description="Causal average-hazard estimation and simulation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("estimate", "estimate the log average-hazard ratio from a CSV dataset"),
        ("simulate", "run the Monte Carlo grid"),
        ("truth", "compute (and cache) the true estimand for a mechanism"),
        ("summarize", "aggregate grid rows into per-cell summaries"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--data", default=None, help="input dataset CSV (estimate)")
        p.add_argument("--tau", default=None,
                       help="horizon(s), comma separated, e.g. 12 or 24,36")
        p.add_argument("--folds", type=int, default=None, help="outer cross-fit folds")
        p.add_argument("--seed", type=int, default=None, help="base seed")
        p.add_argument("--workers", type=int, default=None, help="parallel workers")
        p.add_argument("--out", default=None, help="output path")
        if name == "simulate":
            p.add_argument("--replicates", type=int, default=None)
            p.add_argument("--checkpoint", default=None, help="row log (ndjson)")
        if name == "truth":
            p.add_argument("--dgm", default=None)
            p.add_argument("--n-oracle", dest="n_oracle", type=int, default=None)
            p.add_argument("--cache-dir", dest="cache_dir", default=None)
        if name == "summarize":
            p.add_argument("--rows", default=None, help="checkpoint or results file")
            p.add_argument("--cache-dir", dest="cache_dir", default=None)
            p.add_argument("--n-oracle", dest="n_oracle", type=int, default=None)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("data", "seed", "workers", "out", "replicates", "checkpoint",
            "dgm", "n_oracle", "cache_dir", "rows")
    out = {"mode": args.command}
    for key in keys:
        if hasattr(args, key) and getattr(args, key) is not None:
            out[key] = getattr(args, key)
    if args.tau is not None:
        out["tau"] = [float(t) for t in str(args.tau).split(",")]
    if args.folds is not None:
        out["k_folds"] = args.folds
    return out


def _emit(obj: dict, path=None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _fail(exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, DataFormatError) and exc.line is not None:
        payload["line"] = exc.line
    if isinstance(exc, DegenerateEstimandError):
        payload["advice"] = ("no events or person-time by the requested horizon; "
                             "try a smaller tau with adequate follow-up")
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return 1


def cmd_estimate(cfg: dict) -> int:
    if not cfg["data"]:
        raise ConfigError("estimate mode requires --data or a 'data' config entry")
    data = read_dataset_csv(cfg["data"])
    learner = cfgmod.learner_config_from(cfg)
    seed = int(cfg["seed"] or 0)
    estimates = []
    eif_dump = []
    for tau in cfg["tau"]:
        fit = ah_dml(data, tau, CrossFitPlan(int(cfg["k_folds"]), seed),
                     learner, float(cfg["alpha"]))
        estimates.append(fit.to_dict())
        if cfg["eif_csv"]:
            eif_dump.append(fit)
        for warning in fit.warnings:
            print(f"warning: {warning}", file=sys.stderr)
        for comparator in cfg["comparators"]:
            if comparator == "g-comp":
                comp = g_computation(data, tau, learner, int(cfg["bootstrap_reps"]),
                                     float(cfg["alpha"]), seed)
            elif comparator == "cox-marginal":
                comp = cox_marginal(data, tau, int(cfg["bootstrap_reps"]),
                                    float(cfg["alpha"]), seed)
            else:
                raise ConfigError(f"unknown comparator {comparator!r}")
            estimates.append(comp.to_dict())
    if cfg["eif_csv"]:
        fit = eif_dump[0]
        write_eif_csv(cfg["eif_csv"], np.arange(data.n),
                      np.zeros(data.n, dtype=int), fit.eif_values)
    _emit({"config": cfg, "fingerprint": cfgmod.fingerprint(cfg),
           "estimates": estimates}, cfg["out"])
    return 0


def _truth_cache_path(cfg: dict, name: str, tau: float) -> str:
    spec = make_dgm(name)
    key = json.dumps({"v": TRUTH_CACHE_VERSION, "dgm": spec.to_dict(), "tau": tau,
                      "n_oracle": cfg["n_oracle"], "seed": cfg["seed"]},
                     sort_keys=True)
    import hashlib

    digest = hashlib.sha256(key.encode()).hexdigest()[:20]
    return os.path.join(cfg["cache_dir"], f"truth-{name}-{digest}.json")


def _truth_record(cfg: dict, name: str, tau: float):
    path = _truth_cache_path(cfg, name, tau)
    if os.path.exists(path):
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") == TRUTH_CACHE_VERSION:
            return payload, True
        print(f"notice: truth cache {path} has a stale version; recomputing",
              file=sys.stderr)
    record = truth_theta(make_dgm(name), tau, n_oracle=int(cfg["n_oracle"]),
                         seed=int(cfg["seed"]))
    payload = {"version": TRUTH_CACHE_VERSION, "dgm": name, "tau": tau,
               "n_oracle": record.n_oracle,
               "eta0": record.eta0, "eta1": record.eta1, "theta": record.theta,
               "se_eta0": record.se_eta0, "se_eta1": record.se_eta1,
               "se_theta": record.se_theta}
    os.makedirs(cfg["cache_dir"], exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
    return payload, False


def cmd_truth(cfg: dict) -> int:
    tau = float(cfg["tau"][0])
    payload, cached = _truth_record(cfg, cfg["dgm"], tau)
    _emit({"config": cfg, "fingerprint": cfgmod.fingerprint(cfg),
           "cached": cached, "truth": payload}, cfg["out"])
    return 0


def cmd_simulate(cfg: dict) -> int:
    grid = cfgmod.grid_spec_from(cfg)
    table = run_grid(grid, workers=int(cfg["workers"]),
                     checkpoint_path=cfg["checkpoint"])
    out = cfg["out"] or "results.csv"
    table.to_csv(out, index=False)
    meta = {"config": cfg, "fingerprint": cfgmod.fingerprint(cfg),
            "rows": int(len(table)), "results": out}
    _emit(meta, out + ".meta.json")
    print(f"wrote {len(table)} rows to {out}")
    return 0


def cmd_summarize(cfg: dict) -> int:
    if not cfg["rows"]:
        raise ConfigError("summarize mode requires --rows (checkpoint or results CSV)")
    import pandas as pd

    if cfg["rows"].endswith(".csv"):
        df = pd.read_csv(cfg["rows"], keep_default_na=False,
                         na_values=[""], dtype={"error": str})
        rows = df.to_dict("records")
    else:
        with open(cfg["rows"]) as fh:
            rows = [json.loads(line) for line in fh]
    table = result_table(rows)
    tau = float(cfg["tau"][0])
    truths = {}
    for name in sorted(table["dgm"].unique()):
        payload, _ = _truth_record(cfg, name, tau)
        truths[name] = {"eta0": payload["eta0"], "eta1": payload["eta1"],
                        "theta": payload["theta"]}
    cells = summarize(rows, truths)
    out = cfg["out"] or "summaries.csv"
    summaries_frame(cells).to_csv(out, index=False)
    if cfg["plotdata_out"]:
        emit_plotdata(cells, cfg["plot_layout"]).to_csv(cfg["plotdata_out"], index=False)
    print(f"wrote {len(cells)} cell summaries to {out}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config, _overrides(args))
        if cfg["mode"] == "estimate":
            return cmd_estimate(cfg)
        if cfg["mode"] == "truth":
            return cmd_truth(cfg)
        if cfg["mode"] == "simulate":
            return cmd_simulate(cfg)
        return cmd_summarize(cfg)
    except AhdmlError as exc:
        return _fail(exc)
    except OSError as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
