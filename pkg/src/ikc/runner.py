"""Experiment orchestration: HPO, retraining, per-experiment drivers, reports.

A run is a grid of independent cells ``(noise, seed)``. Every random draw
inside a cell comes from a stream keyed on the cell identity, so the order
in which cells execute (or which worker runs them) never changes a result.
All files are written by the parent process, in grid order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines as lr
from . import model as ikc
from .calibration import (
    METRIC_COLUMNS, apply_temperature, coherent_gain, fit_temperature, kl_rows, metrics,
)
from .config import (
    EXTERNAL, IKC, LOGREG_PRODUCTS, LOGREG_SQUARES, ExperimentConfig, HpoSpace, config_from_dict,
)
from .data import (
    Dataset, NoiseSpec, RawTable, SplitSpec, TabularPreprocessor, gen_xor, inject_label_noise,
    load_schema, read_matrix, read_tabular, split_indices,
)
from .identity import SWEEP_COLUMNS, read_sweep_csv, simulate_sweep, write_sweep_csv
from .optim import DivergedTraining, History, TrainConfig
from .rng import stream
from .stats import MAX_EXACT_N, bootstrap_ci, holm_adjust, sign_flip_test

log = logging.getLogger(__name__)

EXPANSIONS = {LOGREG_PRODUCTS: lr.WITH_PRODUCTS, LOGREG_SQUARES: lr.SQUARES_ONLY}
NO_MODE = "-"
DELTA_METRICS = ("nll", "brier", "ece", "accuracy")

SELECTION_COLUMNS = (
    "system", "dataset", "seed", "noise", "mode", "hpo_seed", "n_trials", "best_trial", "val_nll",
    "learning_rate", "weight_decay", "l2", "optimizer", "max_epochs", "best_epoch", "retrain_epochs",
    "checkpoint", "test_fingerprint", "cal_raw_nll", "cal_scaled_nll", "t_applied", "temperature",
    "raw_test_hash", "test_hash",
)
DIAGNOSTIC_COLUMNS = (
    "system", "dataset", "seed", "noise", "checkpoint", "nll_coh", "nll_inc", "g_coh", "j_int",
    "j_min", "bookkeeping_residual",
)
TRIAL_COLUMNS = (
    "system", "dataset", "seed", "noise", "trial", "train_seed", "learning_rate", "weight_decay", "l2",
    "optimizer", "max_epochs", "batch_size", "val_nll", "best_epoch", "error",
)
FAILURE_COLUMNS = ("dataset", "seed", "noise", "system", "stage", "error")
PAIRED_COLUMNS = (
    "dataset", "noise", "comparison", "metric", "mean", "ci_lo", "ci_hi", "p_exact", "p_holm", "n_seeds",
)
ANCHOR_COLUMNS = ("dataset", "noise", "seed", "rule", "anchor", "candidates")
FIGURE_COLUMNS = {
    "figure_e1_sweep.csv": SWEEP_COLUMNS,
    "figure_e3_noise.csv": ("dataset", "noise", "metric", "mean", "ci_lo", "ci_hi"),
    "figure_e5_deltas.csv": ("dataset", "metric", "mean", "half_width", "ci_lo", "ci_hi"),
}


class HpoFailed(RuntimeError):
    """Every trial of a search diverged."""


class PairingError(RuntimeError):
    """Systems being compared were not evaluated on identical test rows."""


# --------------------------------------------------------------------------
# model-kind adapters


def _features(kind: str, X):
    return X if kind == IKC else lr.expand(X, EXPANSIONS[kind])


def _train(kind, cfg: TrainConfig, l2, X, y, X_val=None, y_val=None):
    if kind == IKC:
        return ikc.fit(cfg, X, y, X_val, y_val)
    return lr.fit_logistic(X, y, l2, cfg, X_val, y_val)


def _predict(kind, params, X, mode=ikc.COHERENT) -> np.ndarray:
    if kind == IKC:
        return ikc.predict_proba(params, X, mode)
    return lr.predict_logistic(params, X)


def _checkpoint(kind, params) -> dict:
    return ikc.to_json_dict(params) if kind == IKC else lr.to_json_dict(params, EXPANSIONS[kind])


def _doc_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _array_hash(a) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype=np.float64).tobytes()).hexdigest()


@dataclass
class Trial:
    index: int
    train_seed: int
    config: TrainConfig
    l2: float
    val_nll: float = math.inf
    best_epoch: int = -1
    error: str = ""


@dataclass
class HpoResult:
    kind: str
    seed: int
    best: Trial
    params: object
    history: History
    trials: list = field(default_factory=list)


def hpo_search(space: HpoSpace, model_kind: str, splits: dict, seed: int) -> HpoResult:
    """Randomized search, ``space.budget`` trials, winner by raw validation NLL.

    ``splits`` holds Datasets under ``"train"`` and ``"val"``. Trial ``t``
    draws its configuration and training seed from the stream
    ``(seed, "hpo", model_kind, t)``. Ties go to the earliest trial.
    """
    if space.budget < 1:
        raise ValueError("budget must be >= 1")
    tr, va = splits["train"], splits["val"]
    X, Xv = _features(model_kind, tr.X), _features(model_kind, va.X)
    trials, best_fit, best = [], None, None
    for t in range(space.budget):
        rng = stream(seed, "hpo", model_kind, t)
        train_seed = int(rng.integers(2**31 - 1))
        cfg, l2 = space.sample(rng, train_seed)
        trial = Trial(t, train_seed, cfg, l2)
        trials.append(trial)
        try:
            params, hist = _train(model_kind, cfg, l2, X, tr.y, Xv, va.y)
        except DivergedTraining as exc:
            trial.error = f"diverged at epoch {exc.epoch}: {exc}"
            continue
        # re-score the returned parameters rather than trusting the history
        pv = _predict(model_kind, params, Xv)
        trial.val_nll = float(np.mean(-np.log(np.where(va.y == 1, pv, 1.0 - pv))))
        trial.best_epoch = hist.best_epoch
        if best is None or trial.val_nll < best.val_nll:
            best, best_fit = trial, (params, hist)
    if best is None:
        raise HpoFailed(f"all {space.budget} {model_kind} trials diverged")
    return HpoResult(model_kind, seed, best, best_fit[0], best_fit[1], trials)


def retrain(kind: str, result: HpoResult, data: Dataset):
    """Refit the winning configuration on ``data`` for the winner's best-epoch count."""
    epochs = max(result.best.best_epoch, 1)
    cfg = result.best.config.with_(max_epochs=epochs)
    params, _ = _train(kind, cfg, result.best.l2, _features(kind, data.X), data.y)
    return params, epochs


# --------------------------------------------------------------------------
# data


def load_source(cfg: ExperimentConfig):
    """The pre-split data for a run: a Dataset, or a RawTable for UCI files."""
    if cfg.dataset == "xor":
        return gen_xor(cfg.n_samples, cfg.seed)
    if not cfg.data_paths:
        raise FileNotFoundError(f"dataset {cfg.dataset!r} needs data_paths (see tools/fetch_data.py)")
    if cfg.dataset == "matrix":
        return read_matrix(cfg.data_paths[0])
    schema = load_schema(cfg.schema or cfg.dataset)
    return read_tabular(list(cfg.data_paths), schema)


def _split_cell(source, cfg: ExperimentConfig, seed: int) -> dict[str, Dataset]:
    spec = SplitSpec(seed=seed, fixed_test=cfg.fixed_test, test_seed=cfg.seed)
    idx = split_indices(len(source), spec)
    if isinstance(source, RawTable):
        source = TabularPreprocessor(source.schema).fit(source, idx["train"]).transform(source)
    return {k: source.take(v) for k, v in idx.items()}


def _external_path(template: str, seed: int) -> str:
    return template.format(seed=seed) if "{seed}" in template else template


# --------------------------------------------------------------------------
# one cell


@dataclass
class CellOutput:
    metrics: list = field(default_factory=list)
    selection: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)


def _evaluate(cfg, out, base, system, mode, p_cal, p_test, parts, extra):
    temp = fit_temperature(p_cal, parts["cal"].y, force=cfg.ts_policy == "always")
    p_final = apply_temperature(p_test, temp)
    rep = metrics(p_final, parts["test"].y)
    out.metrics.append({
        **base, "system": system, "mode": mode, "nll": rep.nll, "brier": rep.brier, "ece": rep.ece,
        "accuracy": rep.accuracy, "t_applied": temp.applied, "temperature": temp.t,
    })
    out.selection.append({
        **base, **extra, "system": system, "mode": mode,
        "test_fingerprint": parts["test"].fingerprint(),
        "cal_raw_nll": temp.raw_nll, "cal_scaled_nll": temp.scaled_nll, "t_applied": temp.applied,
        "temperature": temp.t, "raw_test_hash": _array_hash(p_test), "test_hash": _array_hash(p_final),
    })


def _diagnose(out, base, params, test: Dataset, ckpt: str):
    pc = ikc.predict_proba(params, test.X, ikc.COHERENT)
    pi = ikc.predict_proba(params, test.X, ikc.INCOHERENT)
    nll_c = ikc.nll(params, test.X, test.y, ikc.COHERENT)
    nll_i = ikc.nll(params, test.X, test.y, ikc.INCOHERENT)
    g = coherent_gain(params, test.X, test.y)
    kl = kl_rows(pc, pi)
    out.diagnostics.append({
        **base, "system": IKC, "checkpoint": ckpt, "nll_coh": nll_c, "nll_inc": nll_i, "g_coh": g,
        "j_int": float(np.mean(kl)), "j_min": float(np.min(kl)),
        "bookkeeping_residual": g + nll_c - nll_i,
    })


def _fail(out, base, system, stage, exc):
    log.warning("%s seed=%s noise=%s %s failed at %s: %s", base["dataset"], base["seed"], base["noise"],
                system, stage, exc)
    out.failures.append({**base, "system": system, "stage": stage, "error": f"{type(exc).__name__}: {exc}"})


def run_cell(cfg: ExperimentConfig, source, seed: int, noise: float) -> CellOutput:
    """Everything for one (noise, seed) cell; failures are recorded, not raised."""
    out = CellOutput()
    base = {"dataset": cfg.dataset, "seed": seed, "noise": noise}
    try:
        parts = _split_cell(source, cfg, seed)
        if noise > 0:
            parts["train"] = inject_label_noise(parts["train"], NoiseSpec(noise), seed)
    except Exception as exc:  # noqa: BLE001 - recorded as a failure row
        _fail(out, base, "*", "data", exc)
        return out

    for system in cfg.systems:
        stage = "hpo"
        try:
            res = hpo_search(cfg.hpo, system, parts, seed)
            for t in res.trials:
                out.trials.append({
                    **base, "system": system, "trial": t.index, "train_seed": t.train_seed,
                    "learning_rate": t.config.learning_rate, "weight_decay": t.config.weight_decay,
                    "l2": t.l2, "optimizer": t.config.optimizer, "max_epochs": t.config.max_epochs,
                    "batch_size": t.config.batch_size, "val_nll": t.val_nll, "best_epoch": t.best_epoch,
                    "error": t.error,
                })
            params, retrain_epochs = res.params, 0
            if cfg.retrain:
                stage = "retrain"
                params, retrain_epochs = retrain(system, res, parts["train"].concat(parts["val"]))
            stage = "evaluate"
            doc = _checkpoint(system, params)
            ckpt = _doc_hash(doc)
            out.checkpoints[f"{cfg.dataset}_n{noise!r}_s{seed}_{system}"] = doc
            best = res.best
            extra = {
                "hpo_seed": seed, "n_trials": len(res.trials), "best_trial": best.index,
                "val_nll": best.val_nll, "learning_rate": best.config.learning_rate,
                "weight_decay": best.config.weight_decay, "l2": best.l2, "optimizer": best.config.optimizer,
                "max_epochs": best.config.max_epochs, "best_epoch": best.best_epoch,
                "retrain_epochs": retrain_epochs, "checkpoint": ckpt,
            }
            Xc, Xt = _features(system, parts["cal"].X), _features(system, parts["test"].X)
            if system == IKC:
                modes = ikc.MODES if cfg.experiment == "e4" else (ikc.COHERENT,)
                for mode in modes:
                    _evaluate(cfg, out, base, system, mode, _predict(system, params, Xc, mode),
                              _predict(system, params, Xt, mode), parts, extra)
                stage = "diagnostics"
                _diagnose(out, base, params, parts["test"], ckpt)
            else:
                _evaluate(cfg, out, base, system, NO_MODE, _predict(system, params, Xc),
                          _predict(system, params, Xt), parts, extra)
        except Exception as exc:  # noqa: BLE001
            _fail(out, base, system, stage, exc)

    if cfg.external_preds and cfg.experiment != "e4":
        try:
            path = _external_path(cfg.external_preds, seed)
            table = lr.import_external_predictions(path)
            p_cal = lr.import_external_predictions(path, parts["cal"].row_ids)
            p_test = lr.import_external_predictions(path, parts["test"].row_ids)
            val_ids = parts["val"].row_ids
            val_nll = math.nan
            if all(int(r) in table for r in val_ids):
                pv = lr.import_external_predictions(path, val_ids)
                val_nll = float(np.mean(-np.log(np.where(parts["val"].y == 1, pv, 1.0 - pv))))
            extra = {"hpo_seed": seed, "n_trials": 0, "val_nll": val_nll, "checkpoint": _doc_hash({"path": path})}
            _evaluate(cfg, out, base, EXTERNAL, NO_MODE, p_cal, p_test, parts, extra)
        except Exception as exc:  # noqa: BLE001
            _fail(out, base, EXTERNAL, "import", exc)
    return out


# --------------------------------------------------------------------------
# writing


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return "" if v is None else str(v)


def write_rows(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _cells(cfg: ExperimentConfig) -> list[tuple[float, int]]:
    noises = cfg.noise_grid if cfg.experiment == "e3" else (0.0,)
    return [(float(n), s) for n in noises for s in cfg.seeds]


def _run_sweep(cfg: ExperimentConfig, out_dir: Path) -> dict:
    s = cfg.sweep
    points = simulate_sweep(s.r0, s.rA, s.rB, n_points=s.n_points, n_per_cell=s.n_per_cell,
                            n_boot=s.n_boot, seed=s.seed, workers=cfg.workers)
    write_sweep_csv(points, out_dir / "sweep.csv")
    write_rows(out_dir / "metrics.csv", METRIC_COLUMNS, [])
    return {"cells_total": 1, "cells_failed": 0, "sweep_points": len(points)}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> Path:
    """Run one experiment and write its result bundle; returns the bundle path."""
    out_dir = Path(out_dir or cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "seeds": cfg.seeds,
        "rng": "numpy Philox seeded by SeedSequence([seed, *keys]); keys: "
               "('split-test'), ('split'), ('label-noise', p), ('hpo', system, trial), "
               "('ikc-init'), ('batches'), ('bootstrap:<comparison>:<noise>:<metric>')",
    }
    if cfg.experiment == "e1":
        manifest.update(_run_sweep(cfg, out_dir))
        _write_manifest(out_dir, manifest)
        emit_plot_data(out_dir)
        return out_dir

    source = load_source(cfg)
    cells = _cells(cfg)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            futures = [ex.submit(run_cell, cfg, source, s, n) for n, s in cells]
            results = [f.result() for f in futures]
    else:
        results = [run_cell(cfg, source, s, n) for n, s in cells]

    merged = CellOutput()
    for r in results:
        for name in ("metrics", "selection", "diagnostics", "trials", "failures"):
            getattr(merged, name).extend(getattr(r, name))
        merged.checkpoints.update(r.checkpoints)

    write_rows(out_dir / "metrics.csv", METRIC_COLUMNS, merged.metrics)
    write_rows(out_dir / "selection.csv", SELECTION_COLUMNS, merged.selection)
    write_rows(out_dir / "diagnostics.csv", DIAGNOSTIC_COLUMNS, merged.diagnostics)
    write_rows(out_dir / "trials.csv", TRIAL_COLUMNS, merged.trials)
    write_rows(out_dir / "failures.csv", FAILURE_COLUMNS, merged.failures)
    ck_dir = out_dir / "checkpoints"
    ck_dir.mkdir(exist_ok=True)
    for name, doc in merged.checkpoints.items():
        with open(ck_dir / f"{name}.json", "w") as fh:
            json.dump(doc, fh, sort_keys=True, indent=1)

    failed = {(f["noise"], f["seed"]) for f in merged.failures}
    manifest.update({
        "cells_total": len(cells),
        "cells_failed": len(failed),
        "complete": not merged.failures,
        "checkpoints": {k: _doc_hash(v) for k, v in sorted(merged.checkpoints.items())},
        "trials_per_system": _trial_counts(merged.trials),
        "anchor_rule": cfg.anchor_rule,
        "anchor_candidates": [s for s in (*cfg.systems, EXTERNAL if cfg.external_preds else None)
                              if s and s != IKC],
        "anchor_fallback": "without external predictions the anchor is chosen among the in-repo "
                           "logistic baselines only; under val_nll an external system competes only "
                           "if its file covers the validation rows",
    })
    _write_manifest(out_dir, manifest)
    build_report(out_dir)
    return out_dir


def _trial_counts(trials) -> dict:
    counts = defaultdict(int)
    for t in trials:
        counts[t["system"]] += 1
    return dict(sorted(counts.items()))


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


# --------------------------------------------------------------------------
# report


def _delta_rows(dataset, noise, comparison, per_seed: dict, n_boot, seed) -> list[dict]:
    """``per_seed`` maps metric -> list of deltas ordered by seed."""
    rows = []
    for metric, deltas in per_seed.items():
        d = np.asarray(deltas, dtype=np.float64)
        if d.size == 0 or not np.all(np.isfinite(d)):
            continue
        ci = bootstrap_ci(d, n_boot, seed, key=f"bootstrap:{comparison}:{noise!r}:{metric}")
        rows.append({
            "dataset": dataset, "noise": noise, "comparison": comparison, "metric": metric,
            "mean": ci.mean, "ci_lo": ci.lo, "ci_hi": ci.hi,
            "p_exact": sign_flip_test(d) if d.size <= MAX_EXACT_N else math.nan,
            "n_seeds": int(d.size),
        })
    return rows


def _check_pairing(selection) -> None:
    prints = defaultdict(set)
    for r in selection:
        prints[(r["dataset"], r["seed"])].add(r["test_fingerprint"])
    bad = [k for k, v in prints.items() if len(v) > 1]
    if bad:
        raise PairingError(f"systems saw different test rows in cells {bad[:3]}")


def build_report(bundle) -> list[dict]:
    """Recompute ``paired_report.csv`` (and the figure CSVs) from a bundle."""
    bundle = Path(bundle)
    with open(bundle / "manifest.json") as fh:
        manifest = json.load(fh)
    cfg = config_from_dict(manifest["config"])
    if cfg.experiment == "e1":
        emit_plot_data(bundle)
        return []
    metric_rows = read_rows(bundle / "metrics.csv")
    selection = read_rows(bundle / "selection.csv")
    diagnostics = read_rows(bundle / "diagnostics.csv")
    _check_pairing(selection)

    by_cell = defaultdict(dict)  # (dataset, noise) -> seed -> (system, mode) -> row
    for r in metric_rows:
        by_cell[(r["dataset"], r["noise"])].setdefault(int(r["seed"]), {})[(r["system"], r["mode"])] = r
    val_nll = {(r["dataset"], r["noise"], int(r["seed"]), r["system"]): r["val_nll"] for r in selection}

    report, anchors = [], []
    for (dataset, noise), seeds in sorted(by_cell.items(), key=lambda kv: (kv[0][0], float(kv[0][1]))):
        nz = float(noise)
        if cfg.experiment == "e4":
            deltas = defaultdict(list)
            for s in sorted(seeds):
                coh, inc = seeds[s].get((IKC, ikc.COHERENT)), seeds[s].get((IKC, ikc.INCOHERENT))
                if coh and inc:
                    for m in DELTA_METRICS:
                        deltas[m].append(float(coh[m]) - float(inc[m]))
            report += _delta_rows(dataset, nz, "coherent-incoherent", deltas, cfg.n_boot, cfg.seed)
        elif cfg.anchor_rule != "none":
            deltas = defaultdict(list)
            for s in sorted(seeds):
                rows = seeds[s]
                mine = rows.get((IKC, ikc.COHERENT))
                cands = [(sys_, r) for (sys_, _), r in rows.items() if sys_ != IKC]
                if cfg.anchor_rule == "val_nll":
                    cands = [(k, r) for k, r in cands if val_nll.get((dataset, noise, s, k), "")]
                    score = lambda k, r: float(val_nll[(dataset, noise, s, k)])  # noqa: E731
                else:
                    score = lambda k, r: float(r["nll"])  # noqa: E731
                if mine is None or not cands:
                    continue
                # min over candidates; system order breaks exact ties
                anchor, arow = min(cands, key=lambda kr: score(*kr))
                anchors.append({"dataset": dataset, "noise": nz, "seed": s, "rule": cfg.anchor_rule,
                                "anchor": anchor, "candidates": ";".join(k for k, _ in cands)})
                for m in DELTA_METRICS:
                    deltas[m].append(float(mine[m]) - float(arow[m]))
            report += _delta_rows(dataset, nz, "ikc-anchor", deltas, cfg.n_boot, cfg.seed)

        diag = defaultdict(list)
        for r in sorted((r for r in diagnostics if (r["dataset"], r["noise"]) == (dataset, noise)),
                        key=lambda r: int(r["seed"])):
            diag["g_coh"].append(float(r["g_coh"]))
            diag["j_int"].append(float(r["j_int"]))
        report += _delta_rows(dataset, nz, "ikc-diagnostic", diag, cfg.n_boot, cfg.seed)

    # Holm within each (dataset, comparison, metric) family across noise levels
    families = defaultdict(list)
    for i, r in enumerate(report):
        if not math.isnan(r["p_exact"]):
            families[(r["dataset"], r["comparison"], r["metric"])].append(i)
    for idx in families.values():
        for i, p in zip(idx, holm_adjust([report[i]["p_exact"] for i in idx])):
            report[i]["p_holm"] = float(p)

    write_rows(bundle / "paired_report.csv", PAIRED_COLUMNS, report)
    write_rows(bundle / "anchors.csv", ANCHOR_COLUMNS, anchors)
    emit_plot_data(bundle)
    return report


def emit_plot_data(bundle) -> dict[str, int]:
    """Figure CSVs from whatever the bundle holds; missing parts give headers only."""
    bundle = Path(bundle)
    rows = {name: [] for name in FIGURE_COLUMNS}
    if (bundle / "sweep.csv").exists():
        rows["figure_e1_sweep.csv"] = [p._asdict() for p in read_sweep_csv(bundle / "sweep.csv")]
    experiment = None
    if (bundle / "manifest.json").exists():
        with open(bundle / "manifest.json") as fh:
            experiment = json.load(fh).get("experiment")
    for r in read_rows(bundle / "paired_report.csv"):
        if r["comparison"] != "ikc-anchor":
            continue
        mean, lo, hi = float(r["mean"]), float(r["ci_lo"]), float(r["ci_hi"])
        if experiment == "e3":
            rows["figure_e3_noise.csv"].append({"dataset": r["dataset"], "noise": float(r["noise"]),
                                                "metric": r["metric"], "mean": mean, "ci_lo": lo, "ci_hi": hi})
        elif experiment in ("e2", "e5"):
            rows["figure_e5_deltas.csv"].append({"dataset": r["dataset"], "metric": r["metric"], "mean": mean,
                                                 "half_width": 0.5 * (hi - lo), "ci_lo": lo, "ci_hi": hi})
    for name, cols in FIGURE_COLUMNS.items():
        write_rows(bundle / name, cols, rows[name])
    return {k: len(v) for k, v in rows.items()}


def format_failures(bundle) -> Optional[str]:
    rows = read_rows(Path(bundle) / "failures.csv")
    if not rows:
        return None
    return "\n".join(f"{r['dataset']} seed={r['seed']} noise={r['noise']} {r['system']} "
                     f"[{r['stage']}] {r['error']}" for r in rows)


__all__ = [
    "HpoFailed", "PairingError", "hpo_search", "retrain", "run_cell", "run_experiment", "build_report",
    "emit_plot_data", "load_source",
]
