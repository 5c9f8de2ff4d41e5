"""Metrics, temperature scaling with a safety switch, coherence diagnostics.

Probabilities are passed around as 1-D arrays of ``P(Y=1)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logit

from .amplitude import clip_prob
from .model import COHERENT, INCOHERENT, IkcParams, predict_proba

N_BINS = 15
T_MIN, T_MAX = 0.05, 20.0
T_GRID = 200
T_TOL = 1e-4
METRIC_COLUMNS = (
    "system", "dataset", "seed", "noise", "mode", "nll", "brier", "ece", "accuracy", "t_applied", "temperature",
)


@dataclass(frozen=True)
class MetricReport:
    nll: float
    brier: float
    ece: float
    accuracy: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Temperature:
    t: float = 1.0
    applied: bool = False
    degenerate: bool = False  # calibration split had a single label
    raw_nll: float = float("nan")
    scaled_nll: float = float("nan")

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("temperature must be positive")


def _check(p1, labels):
    p1 = np.asarray(p1, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if p1.shape != labels.shape:
        raise ValueError(f"length mismatch: {p1.shape[0]} probabilities vs {labels.shape[0]} labels")
    if p1.size == 0:
        raise ValueError("need at least one row")
    return p1, labels


def nll_of(p1, labels) -> float:
    p1, labels = _check(p1, labels)
    p1 = clip_prob(p1)
    return float(np.mean(-np.log(np.where(labels == 1, p1, 1.0 - p1))))


def ece_bins(p1, labels, n_bins: int = N_BINS) -> np.ndarray:
    """Per-bin table ``(count, accuracy, confidence)`` on max-class confidence.

    Bins are equal-width on ``[0, 1]``; for binary problems the lower half
    stays empty. Empty bins have count 0 and NaN averages.
    """
    p1, labels = _check(p1, labels)
    pred = (p1 >= 0.5).astype(int)
    conf = np.where(pred == 1, p1, 1.0 - p1)
    correct = (pred == labels).astype(float)
    idx = np.minimum((conf * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(float)
    acc = np.bincount(idx, weights=correct, minlength=n_bins)
    cf = np.bincount(idx, weights=conf, minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.column_stack([counts, acc / counts, cf / counts])


def expected_calibration_error(p1, labels, n_bins: int = N_BINS) -> float:
    table = ece_bins(p1, labels, n_bins)
    n = table[:, 0].sum()
    filled = table[:, 0] > 0
    gaps = np.abs(table[filled, 1] - table[filled, 2])
    return float(np.sum(table[filled, 0] / n * gaps))


def metrics(p1, labels) -> MetricReport:
    p1, labels = _check(p1, labels)
    pred = (p1 >= 0.5).astype(int)
    return MetricReport(
        nll=nll_of(p1, labels),
        brier=float(np.mean((p1 - labels) ** 2)),
        ece=expected_calibration_error(p1, labels),
        accuracy=float(np.mean(pred == labels)),
        n=int(p1.size),
    )


def _scale(p1: np.ndarray, t: float) -> np.ndarray:
    return clip_prob(expit(logit(clip_prob(p1)) / t))


def apply_temperature(p1, temp: Temperature) -> np.ndarray:
    """Temperature-scale probabilities; returns the input untouched if not applied."""
    if not temp.applied:
        return p1
    return _scale(np.asarray(p1, dtype=np.float64), temp.t)


def fit_temperature(p1_cal, labels_cal, force: bool = False) -> Temperature:
    """Fit one temperature on the calibration split.

    A 200-point log grid on ``[0.05, 20]`` locates the minimum, then a
    bounded Brent search (golden-section with parabolic steps) refines it in
    ``log t`` to ``1e-4`` between the neighbouring grid points. The safety
    switch marks the result applied only if it lowers calibration NLL
    by more than 1e-12; ``force=True`` applies the fitted value regardless.
    A single-label calibration split returns ``t = 1`` unapplied.
    """
    p1, labels = _check(p1_cal, labels_cal)
    raw = nll_of(p1, labels)
    if np.unique(labels).size < 2:
        return Temperature(1.0, applied=False, degenerate=True, raw_nll=raw, scaled_nll=raw)

    z = logit(clip_prob(p1))

    def objective(log_t):
        q = clip_prob(expit(z / math.exp(log_t)))
        return float(np.mean(-np.log(np.where(labels == 1, q, 1.0 - q))))

    grid = np.linspace(math.log(T_MIN), math.log(T_MAX), T_GRID)
    vals = np.array([objective(g) for g in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, T_GRID - 1)]
    best_log_t, best = grid[k], vals[k]
    if hi > lo:
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": T_TOL})
        if res.fun < best:
            best_log_t, best = float(res.x), float(res.fun)
    t = math.exp(best_log_t)
    # NLL of exactly what apply_temperature will return
    scaled = nll_of(_scale(p1, t), labels)
    applied = bool(force or scaled < raw - 1e-12)
    return Temperature(t, applied=applied, raw_nll=raw, scaled_nll=scaled)


# --------------------------------------------------------------------------
# coherence diagnostics (always on raw, pre-temperature probabilities)


def _label_logprob(p1, y) -> np.ndarray:
    return np.log(np.where(np.asarray(y) == 1, p1, 1.0 - p1))


def coherent_gain(params: IkcParams, X, y) -> float:
    """Mean per-row ``log P_coh(y|x) - log P_inc(y|x)`` at fixed parameters."""
    pc = predict_proba(params, X, COHERENT)
    pi = predict_proba(params, X, INCOHERENT)
    return float(np.mean(_label_logprob(pc, y) - _label_logprob(pi, y)))


def kl_rows(p1, q1) -> np.ndarray:
    """Row-wise binary KL(p || q) for clipped distributions, clamped at 0."""
    p1 = clip_prob(np.asarray(p1, dtype=np.float64))
    q1 = clip_prob(np.asarray(q1, dtype=np.float64))
    kl = p1 * np.log(p1 / q1) + (1.0 - p1) * np.log((1.0 - p1) / (1.0 - q1))
    # only rounding can push a KL below zero
    return np.maximum(kl, 0.0)


def interference_information(params: IkcParams, X) -> float:
    """Mean KL from the coherent to the incoherent predictive distribution."""
    return float(np.mean(kl_rows(predict_proba(params, X, COHERENT), predict_proba(params, X, INCOHERENT))))
