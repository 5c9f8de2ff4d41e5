"""Experiment configuration: search spaces and per-experiment defaults."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .data import NOISE_GRID
from .optim import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("e1", "e2", "e3", "e4", "e5")
TS_POLICIES = ("always", "safety_switch")
ANCHOR_RULES = ("test_nll", "val_nll", "none")
IKC = "ikc"
LOGREG_PRODUCTS = "logreg_products"
LOGREG_SQUARES = "logreg_squares"
EXTERNAL = "external"
BASELINES = (LOGREG_PRODUCTS, LOGREG_SQUARES)


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


@dataclass(frozen=True)
class HpoSpace:
    budget: int = 20
    learning_rate: tuple = (1e-4, 1e-1)
    weight_decay: tuple = (1e-6, 1e-1)
    l2: tuple = (1e-6, 1e-1)
    optimizers: tuple = ("adam", "sgd")
    max_epochs: tuple = (100, 200, 500)
    batch_sizes: tuple = (0,)
    early_stop_patience: int = 20

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("HPO budget must be >= 1")
        for name in ("learning_rate", "weight_decay", "l2"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} range must satisfy 0 < lo <= hi, got {(lo, hi)}")

    def sample(self, rng: np.random.Generator, train_seed: int) -> tuple[TrainConfig, float]:
        """Draw one trial: a TrainConfig and a baseline L2 coefficient.

        Every field is drawn for every model kind, so the stream consumed per
        trial is identical across kinds.
        """
        lr = _log_uniform(rng, *self.learning_rate)
        wd = _log_uniform(rng, *self.weight_decay)
        l2 = _log_uniform(rng, *self.l2)
        opt = self.optimizers[int(rng.integers(len(self.optimizers)))]
        epochs = int(self.max_epochs[int(rng.integers(len(self.max_epochs)))])
        bs = int(self.batch_sizes[int(rng.integers(len(self.batch_sizes)))])
        cfg = TrainConfig(
            learning_rate=lr, weight_decay=wd, max_epochs=epochs, batch_size=bs, optimizer=opt,
            early_stop_patience=self.early_stop_patience, seed=train_seed,
        )
        return cfg, l2


# per-experiment protocol defaults
_DEFAULTS = {
    "e1": dict(dataset="sweep", n_seeds=1, anchor_rule="none", retrain=False, ts_policy="always"),
    "e2": dict(dataset="xor", n_seeds=10, anchor_rule="test_nll", retrain=False, ts_policy="always",
               fixed_test=True, budget=20),
    "e3": dict(n_seeds=20, anchor_rule="val_nll", retrain=True, ts_policy="safety_switch",
               fixed_test=False, budget=20, noise_grid=NOISE_GRID),
    "e4": dict(n_seeds=20, anchor_rule="none", retrain=True, ts_policy="safety_switch",
               fixed_test=False, budget=20, systems=("ikc",)),
    "e5": dict(n_seeds=20, anchor_rule="test_nll", retrain=True, ts_policy="safety_switch",
               fixed_test=False, budget=25),
}


@dataclass(frozen=True)
class SweepConfig:
    r0: float = 0.20
    rA: float = 0.35
    rB: float = 0.35
    n_points: int = 121
    n_per_cell: int = 2000
    n_boot: int = 5000
    seed: int = 108


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dataset: str = "xor"
    data_paths: tuple = ()
    schema: Optional[str] = None
    n_samples: int = 20000
    n_seeds: int = 10
    seed: int = 0
    hpo: HpoSpace = field(default_factory=HpoSpace)
    ts_policy: str = "safety_switch"
    anchor_rule: str = "test_nll"
    retrain: bool = True
    noise_grid: tuple = (0.0,)
    fixed_test: bool = True
    n_boot: int = 5000
    systems: tuple = (IKC, LOGREG_PRODUCTS, LOGREG_SQUARES)
    external_preds: Optional[str] = None
    workers: int = 1
    output_dir: str = "results"
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.ts_policy not in TS_POLICIES:
            raise ValueError(f"ts_policy must be one of {TS_POLICIES}")
        if self.anchor_rule not in ANCHOR_RULES:
            raise ValueError(f"anchor_rule must be one of {ANCHOR_RULES}")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.experiment in ("e2", "e3", "e5") and IKC not in self.systems:
            raise ValueError("comparative experiments need the ikc system")
        unknown = set(self.systems) - {IKC, *BASELINES}
        if unknown:
            raise ValueError(f"unknown systems {sorted(unknown)}")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.n_seeds)]

    def to_dict(self) -> dict:
        return asdict(self)

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _tuplify(doc: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """Protocol defaults for one experiment, with keyword overrides."""
    base = dict(_DEFAULTS[experiment])
    budget = base.pop("budget", 20)
    hpo = overrides.pop("hpo", None) or HpoSpace(budget=budget)
    base.update(overrides)
    return ExperimentConfig(experiment=experiment, hpo=hpo, **_tuplify(base))


def load_config(path, experiment: Optional[str] = None) -> ExperimentConfig:
    """Read a TOML config; keys mirror ExperimentConfig, with [hpo] and [sweep] tables."""
    doc = tomllib.loads(Path(path).read_text()) if path else {}
    exp = experiment or doc.get("experiment")
    if exp is None:
        raise ValueError("experiment not given on the command line or in the config")
    if experiment and doc.get("experiment", experiment) != experiment:
        raise ValueError(f"config is for {doc['experiment']!r}, not {experiment!r}")
    doc = {k: v for k, v in doc.items() if k != "experiment"}
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    hpo_doc = doc.pop("hpo", None)
    sweep_doc = doc.pop("sweep", None)
    budget = _DEFAULTS[exp].get("budget", 20)
    hpo = HpoSpace(**_tuplify({"budget": budget, **(hpo_doc or {})}))
    kw = dict(doc)
    if sweep_doc:
        kw["sweep"] = SweepConfig(**sweep_doc)
    return default_config(exp, hpo=hpo, **kw)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Inverse of ``ExperimentConfig.to_dict`` (used by ``report``)."""
    doc = dict(doc)
    hpo = HpoSpace(**_tuplify(doc.pop("hpo")))
    sweep = SweepConfig(**doc.pop("sweep"))
    return ExperimentConfig(hpo=hpo, sweep=sweep, **_tuplify(doc))
