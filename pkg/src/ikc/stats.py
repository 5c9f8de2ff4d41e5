"""Paired inference across seeds: bootstrap CIs and exact sign-flip tests."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .rng import stream

MAX_EXACT_N = 25
TIE_TOL = 1e-12
REPORT_COLUMNS = ("metric", "mean", "ci_lo", "ci_hi", "p_exact", "n_seeds")


@dataclass(frozen=True)
class CiSummary:
    mean: float
    lo: float
    hi: float
    n_boot: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)


@dataclass(frozen=True)
class PairedRuns:
    deltas: np.ndarray
    metric_name: str

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=np.float64).ravel()
        if d.size < 1 or not np.all(np.isfinite(d)):
            raise ValueError("PairedRuns needs at least one finite delta")
        object.__setattr__(self, "deltas", d)


def bootstrap_ci(values: Sequence[float], n_boot: int = 5000, seed: int = 0, level: float = 0.95,
                 key: str = "bootstrap") -> CiSummary:
    """Percentile bootstrap CI of the mean."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 1:
        raise ValueError("bootstrap_ci needs at least one value")
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    rng = stream(seed, key)
    idx = rng.integers(0, v.size, size=(n_boot, v.size))
    means = v[idx].mean(axis=1)
    alpha = 100.0 * (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [alpha, 100.0 - alpha])
    return CiSummary(float(v.mean()), float(lo), float(hi), int(n_boot))


def _sign_sums(d: np.ndarray) -> np.ndarray:
    sums = np.zeros(1)
    for x in d:
        sums = np.concatenate([sums + x, sums - x])
    return sums


def sign_flip_test(deltas: Sequence[float]) -> float:
    """Two-sided exact paired sign-flip p-value on the mean difference.

    Counts the sign assignments (of all ``2**n``, identity included) whose
    absolute mean is at least the observed one, up to a 1e-12 tie tolerance.
    """
    d = np.asarray(deltas, dtype=np.float64).ravel()
    n = d.size
    if n < 1:
        raise ValueError("need at least one paired difference")
    if n > MAX_EXACT_N:
        raise ValueError(f"exact enumeration is limited to n <= {MAX_EXACT_N} (got {n})")
    observed = abs(d.mean())
    threshold = observed - TIE_TOL
    head = min(n, 20)
    base = _sign_sums(d[:head])
    tail = _sign_sums(d[head:]) if n > head else np.zeros(1)
    count = 0
    for offset in tail:
        count += int(np.count_nonzero(np.abs((base + offset) / n) >= threshold))
    return count / float(2**n)


def holm_adjust(pvalues: Sequence[float]) -> np.ndarray:
    """Holm-Bonferroni step-down adjusted p-values."""
    from statsmodels.stats.multitest import multipletests

    p = np.asarray(pvalues, dtype=np.float64)
    if p.size == 0:
        return p
    return multipletests(p, method="holm")[1]


def paired_report(
    runs: Mapping[str, PairedRuns | Sequence[float]],
    n_boot: int = 5000,
    seed: int = 0,
    p_metrics: Sequence[str] | None = ("nll",),
) -> list[dict]:
    """One row per metric: mean, bootstrap CI and (for ``p_metrics``) exact p.

    ``p_metrics=None`` computes a p-value for every metric.
    """
    decoded = {k: (v.deltas if isinstance(v, PairedRuns) else PairedRuns(v, k).deltas) for k, v in runs.items()}
    sizes = {v.size for v in decoded.values()}
    if len(sizes) > 1:
        raise ValueError(f"all metrics must share the number of seeds, got {sorted(sizes)}")
    rows = []
    for metric, deltas in decoded.items():
        ci = bootstrap_ci(deltas, n_boot, seed, key=f"bootstrap:{metric}")
        want_p = p_metrics is None or metric in p_metrics
        rows.append({
            "metric": metric,
            "mean": ci.mean,
            "ci_lo": ci.lo,
            "ci_hi": ci.hi,
            "p_exact": sign_flip_test(deltas) if want_p else math.nan,
            "n_seeds": int(deltas.size),
        })
    return rows


def write_report_csv(rows: Sequence[Mapping], path, columns: Sequence[str] = REPORT_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v
