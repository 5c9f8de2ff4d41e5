"""Classical baselines and the external-prediction import path.

Two in-repo baselines share the IKC's training loop:

* logistic regression on degree-2 features (squares and all pairwise
  products), which makes XOR linearly separable, and
* logistic regression on ``x`` and ``x**2`` only. On binary inputs
  ``x**2 == x`` so this is a main-effects model; it is the deliberately
  mis-specified baseline.

Predictions of any other model (e.g. a tree ensemble) can join the paired
comparisons as a ``row_id,p1`` CSV.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .amplitude import PROB_CLIP, clip_prob
from .optim import History, TrainConfig, run_training

RAW = "raw"
WITH_PRODUCTS = "with_products"
SQUARES_ONLY = "squares_only"
KINDS = (RAW, WITH_PRODUCTS, SQUARES_ONLY)
CHECKPOINT_FORMAT = "logistic-v1"

# above this many expanded cells the product expansion is built sparse
_DENSE_LIMIT = 20_000_000


@dataclass(frozen=True)
class LogisticParams:
    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("logistic parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    def to_vector(self) -> np.ndarray:
        return np.append(self.weights, self.bias)

    @classmethod
    def from_vector(cls, theta) -> "LogisticParams":
        return cls(theta[:-1], theta[-1])


def expanded_dim(d: int, kind: str) -> int:
    if kind == RAW:
        return d
    if kind == SQUARES_ONLY:
        return 2 * d
    if kind == WITH_PRODUCTS:
        return 2 * d + d * (d - 1) // 2
    raise ValueError(f"unknown feature expansion {kind!r}")


def expand(x, kind: str):
    """Feature expansion for one vector or a row matrix.

    Column order: original features, then squares, then pairwise products
    ``x_i * x_j`` (``i < j``) in lexicographic order.
    """
    X = x if sp.issparse(x) else np.asarray(x, dtype=np.float64)
    single = not sp.issparse(X) and X.ndim == 1
    if single:
        X = X[None, :]
    n, d = X.shape
    expanded_dim(d, kind)  # validates kind
    if kind == RAW:
        out = X
    elif sp.issparse(X) or n * expanded_dim(d, kind) > _DENSE_LIMIT:
        out = _expand_sparse(sp.csc_matrix(X), kind)
    else:
        parts = [X, X * X]
        if kind == WITH_PRODUCTS and d > 1:
            i, j = np.triu_indices(d, k=1)
            parts.append(X[:, i] * X[:, j])
        out = np.hstack(parts)
    return out[0] if single else out


def _expand_sparse(X: sp.csc_matrix, kind: str) -> sp.csr_matrix:
    blocks = [X, X.multiply(X)]
    if kind == WITH_PRODUCTS:
        d = X.shape[1]
        cols = []
        for i in range(d - 1):
            cols.append(X[:, i + 1 :].multiply(X[:, i]))
        if cols:
            blocks.append(sp.hstack(cols, format="csc"))
    return sp.hstack(blocks, format="csr")


def predict_logistic(params: LogisticParams, X) -> np.ndarray:
    """Clipped ``P(Y=1 | x)`` on already-expanded features."""
    z = X @ params.weights + params.bias
    return clip_prob(expit(np.asarray(z).ravel()))


def logistic_nll(params: LogisticParams, X, y) -> float:
    p1 = predict_logistic(params, X)
    y = np.asarray(y)
    return float(np.mean(-np.log(np.where(y == 1, p1, 1.0 - p1))))


def _loss_grad(theta, X, y, l2):
    w, b = theta[:-1], theta[-1]
    z = np.asarray(X @ w + b).ravel()
    p1 = expit(z)
    pc = clip_prob(p1)
    n = y.shape[0]
    loss = float(np.mean(-np.log(np.where(y == 1, pc, 1.0 - pc)))) + l2 * float(w @ w)
    active = (p1 > PROB_CLIP) & (p1 < 1.0 - PROB_CLIP)
    r = np.where(active, p1 - y, 0.0) / n
    gw = np.asarray(X.T @ r).ravel() + 2.0 * l2 * w
    return loss, np.append(gw, r.sum())


def logistic_grad(params: LogisticParams, X, y, l2: float = 0.0) -> LogisticParams:
    """Gradient of mean NLL + ``l2 * ||weights||^2`` (bias unpenalized)."""
    _, g = _loss_grad(params.to_vector(), X, np.asarray(y), l2)
    return LogisticParams.from_vector(g)


def fit_logistic(
    X,
    y,
    l2: float,
    config: TrainConfig,
    X_val=None,
    y_val=None,
) -> tuple[LogisticParams, History]:
    """Maximum-likelihood logistic regression on pre-expanded features.

    Starts from zero weights. Early stopping and checkpoint-restore follow
    the IKC when validation data is passed.
    """
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    y = np.asarray(y)
    m = X.shape[1]
    Xr = X.tocsr() if sp.issparse(X) else np.asarray(X, dtype=np.float64)

    def grad_fn(theta, rows):
        if rows is None:
            return _loss_grad(theta, Xr, y, l2)
        return _loss_grad(theta, Xr[rows], y[rows], l2)

    def train_eval(theta):
        return logistic_nll(LogisticParams.from_vector(theta), Xr, y)

    val_eval = None
    if X_val is not None:
        Xv = X_val.tocsr() if sp.issparse(X_val) else np.asarray(X_val, dtype=np.float64)
        yv = np.asarray(y_val)

        def val_eval(theta):
            return logistic_nll(LogisticParams.from_vector(theta), Xv, yv)

    theta, hist = run_training(np.zeros(m + 1), Xr.shape[0], grad_fn, train_eval, val_eval, config)
    return LogisticParams.from_vector(theta), hist


def to_json_dict(params: LogisticParams, kind: str) -> dict:
    return {"format": CHECKPOINT_FORMAT, "expansion": kind, "weights": params.weights.tolist(), "bias": params.bias}


def checkpoint_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def from_json_dict(doc: dict) -> tuple[LogisticParams, str]:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} checkpoint")
    return LogisticParams(np.asarray(doc["weights"]), doc["bias"]), doc["expansion"]


# --------------------------------------------------------------------------
# external predictions


class ExternalPredictionError(ValueError):
    pass


class MalformedPredictions(ExternalPredictionError):
    pass


class ProbabilityOutOfRange(ExternalPredictionError):
    pass


class DuplicateRowId(ExternalPredictionError):
    pass


class MissingRowId(ExternalPredictionError):
    pass


def read_external_predictions(path) -> dict[int, float]:
    """Parse a ``row_id,p1`` CSV into ``{row_id: p1}``."""
    out: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["row_id", "p1"]:
            raise MalformedPredictions(f"{path}: expected header 'row_id,p1', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise MalformedPredictions(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                rid, p1 = int(row[0]), float(row[1])
            except ValueError:
                raise MalformedPredictions(f"{path}:{lineno}: cannot parse {row[:2]}") from None
            if not (0.0 <= p1 <= 1.0):
                raise ProbabilityOutOfRange(f"{path}:{lineno}: p1={p1} outside [0, 1]")
            if rid in out:
                raise DuplicateRowId(f"{path}:{lineno}: duplicate row_id {rid}")
            out[rid] = p1
    return out


def import_external_predictions(path, row_ids: Optional[Iterable[int]] = None):
    """Load external ``P(Y=1)`` values.

    Without ``row_ids`` returns the raw mapping. With ``row_ids`` returns an
    array aligned to them and raises ``MissingRowId`` if any is absent.
    Values are raw (pre-temperature) probabilities, clipped like every
    in-repo readout.
    """
    table = read_external_predictions(path)
    if row_ids is None:
        return table
    ids = [int(r) for r in row_ids]
    missing = [r for r in ids if r not in table]
    if missing:
        head = ", ".join(map(str, missing[:5]))
        raise MissingRowId(f"{path}: {len(missing)} required row_ids missing (first: {head})")
    return clip_prob(np.array([table[r] for r in ids], dtype=np.float64))


def write_predictions(row_ids, p1, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row_id", "p1"])
        for r, p in zip(row_ids, p1):
            w.writerow([int(r), repr(float(p))])
