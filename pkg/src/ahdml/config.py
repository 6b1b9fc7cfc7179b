"""Run configuration: one JSON key-value file, CLI flags win on conflict.

Unknown keys are rejected before any compute.  The fully resolved
configuration (defaults filled in) is echoed into every output artifact
together with its fingerprint, a sha256 of the canonical JSON encoding, so
artifacts are reproducible bit-exactly from the fingerprinted config.
"""

from __future__ import annotations

import hashlib
import json

from .errors import ConfigError
from .harness import GridSpec
from .nuisance import LearnerConfig, LearnerSpec
from .simulate import DGM_NAMES

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "mode": None,                 # estimate | simulate | truth | summarize
    "data": None,                 # estimate: input CSV path
    "tau": [12.0],
    "k_folds": 5,
    "alpha": 0.05,
    "seed": None,
    "epsilon": 0.025,
    "floor_s": 0.005,
    "propensity_basis": "poly2",
    "event_learners": [{"kind": "cox-ph-interactions"}, {"kind": "weibull-aft"}],
    "censor_learners": [{"kind": "exponential-aft"}, {"kind": "weibull-aft"}],
    "v_folds": 3,
    "comparators": [],            # optional: g-comp, cox-marginal
    "bootstrap_reps": 200,
    "workers": 1,
    "out": None,
    "eif_csv": None,
    # simulate / summarize
    "dgms": ["non-ph", "ph"],
    "sample_sizes": [500, 1000],
    "replicates": 200,
    "estimators": ["ah-dml", "g-comp", "cox-marginal"],
    "checkpoint": None,
    "rows": None,                 # summarize: checkpoint or results file
    "plot_layout": "ratio-grid",
    "plotdata_out": None,
    # truth
    "dgm": "ph",
    "n_oracle": 2_000_000,
    "cache_dir": ".ahdml-truth-cache",
}

_MODES = ("estimate", "simulate", "truth", "summarize")


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Merge defaults, an optional JSON file and flag overrides; validate."""
    cfg = dict(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        unknown = sorted(set(file_cfg) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(file_cfg)
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key: {key}")
        if value is not None:
            cfg[key] = value
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["mode"] not in _MODES:
        raise ConfigError(f"mode must be one of {_MODES}, got {cfg['mode']!r}")
    if not (0.0 < float(cfg["alpha"]) <= 1.0):
        raise ConfigError(f"alpha must be in (0, 1], got {cfg['alpha']}")
    taus = cfg["tau"] if isinstance(cfg["tau"], (list, tuple)) else [cfg["tau"]]
    cfg["tau"] = [float(t) for t in taus]
    if any(t <= 0 for t in cfg["tau"]):
        raise ConfigError("every tau must be > 0")
    if int(cfg["k_folds"]) < 2:
        raise ConfigError("k_folds must be >= 2")
    if cfg["mode"] in ("simulate", "truth") and cfg["seed"] is None:
        raise ConfigError(f"{cfg['mode']} mode requires an explicit seed")
    for key in ("dgms",):
        for name in cfg[key]:
            if name not in DGM_NAMES:
                raise ConfigError(f"unknown mechanism {name!r}; known: {DGM_NAMES}")
    if cfg["mode"] == "truth" and cfg["dgm"] not in DGM_NAMES:
        raise ConfigError(f"unknown mechanism {cfg['dgm']!r}")
    if not (0.0 < float(cfg["epsilon"]) < 0.5):
        raise ConfigError("epsilon must be in (0, 0.5)")
    if not (0.0 < float(cfg["floor_s"]) < 1.0):
        raise ConfigError("floor_s must be in (0, 1)")


def fingerprint(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def learner_config_from(cfg: dict) -> LearnerConfig:
    def specs(items):
        return tuple(LearnerSpec(kind=i["kind"], features=i.get("features", "raw"))
                     for i in items)

    return LearnerConfig(
        propensity_basis=cfg["propensity_basis"],
        epsilon=float(cfg["epsilon"]),
        floor_s=float(cfg["floor_s"]),
        event_candidates=specs(cfg["event_learners"]),
        censor_candidates=specs(cfg["censor_learners"]),
        v_folds=int(cfg["v_folds"]),
    )


def grid_spec_from(cfg: dict) -> GridSpec:
    return GridSpec(
        dgms=tuple(cfg["dgms"]),
        sample_sizes=tuple(int(n) for n in cfg["sample_sizes"]),
        replicates=int(cfg["replicates"]),
        tau=float(cfg["tau"][0]),
        estimators=tuple(cfg["estimators"]),
        base_seed=int(cfg["seed"]),
        k_folds=int(cfg["k_folds"]),
        bootstrap_reps=int(cfg["bootstrap_reps"]),
        alpha=float(cfg["alpha"]),
        n_oracle=int(cfg["n_oracle"]),
        learner=learner_config_from(cfg),
    )
