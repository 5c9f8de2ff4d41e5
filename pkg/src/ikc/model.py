"""Interference Kernel Classifier.

Each label channel ``y`` carries an affine complex amplitude
``psi_y(x) = b_y + sum_j w_{y,j} x_j``. The coherent readout uses the class
energy ``|psi_y(x)|^2``; the incoherent proxy drops every cross-term and uses
``|b_y|^2 + sum_j |w_{y,j}|^2 x_j^2``. Either pair of energies is Born
normalized, then clipped to ``[1e-7, 1 - 1e-7]``.

Parameters live in two complex arrays, ``w`` of shape ``(2, d)`` and ``b`` of
shape ``(2,)``; for optimization they are flattened to the real vector
``[Re w, Im w, Re b, Im b]``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .amplitude import PROB_CLIP, DegenerateEnergies, ProbPair, clip_prob
from .optim import DivergedTraining, History, TrainConfig, run_training
from .rng import stream

COHERENT = "coherent"
INCOHERENT = "incoherent"
MODES = (COHERENT, INCOHERENT)
CHECKPOINT_FORMAT = "ikc-v1"

__all__ = [
    "IkcParams", "TrainConfig", "DivergedTraining", "energies", "predict_proba",
    "forward", "nll", "grad_nll", "init_params", "fit", "save_checkpoint",
    "load_checkpoint", "COHERENT", "INCOHERENT",
]


@dataclass(frozen=True)
class IkcParams:
    w: np.ndarray  # (2, d) complex; row y is channel y
    b: np.ndarray  # (2,) complex

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.complex128)
        b = np.asarray(self.b, dtype=np.complex128)
        if w.ndim != 2 or w.shape[0] != 2 or w.shape[1] < 1:
            raise ValueError(f"w must have shape (2, d>=1), got {w.shape}")
        if b.shape != (2,):
            raise ValueError(f"b must have shape (2,), got {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_channels(cls, w0, w1, b0, b1) -> "IkcParams":
        return cls(np.array([w0, w1], dtype=np.complex128), np.array([b0, b1], dtype=np.complex128))

    @property
    def d(self) -> int:
        return self.w.shape[1]

    @property
    def w0(self):
        return self.w[0]

    @property
    def w1(self):
        return self.w[1]

    @property
    def b0(self):
        return self.b[0]

    @property
    def b1(self):
        return self.b[1]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w.real.ravel(), self.w.imag.ravel(), self.b.real, self.b.imag])

    @classmethod
    def from_vector(cls, theta: np.ndarray, d: int) -> "IkcParams":
        k = 2 * d
        w = (theta[:k] + 1j * theta[k : 2 * k]).reshape(2, d)
        b = theta[2 * k : 2 * k + 2] + 1j * theta[2 * k + 2 : 2 * k + 4]
        return cls(w, b)

    def scaled(self, c: complex) -> "IkcParams":
        return IkcParams(self.w * c, self.b * c)

    def sq_norm(self) -> float:
        return float(np.sum(self.to_vector() ** 2))


def _as_matrix(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected inputs with {d} features, got shape {X.shape}")
    return X


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def energies(params: IkcParams, X, mode: str = COHERENT) -> np.ndarray:
    """Unnormalized class energies, shape ``(n, 2)``."""
    _check_mode(mode)
    X = _as_matrix(X, params.d)
    if mode == COHERENT:
        pr = X @ params.w.real.T + params.b.real
        pim = X @ params.w.imag.T + params.b.imag
        return pr * pr + pim * pim
    w2 = params.w.real**2 + params.w.imag**2
    b2 = params.b.real**2 + params.b.imag**2
    return (X * X) @ w2.T + b2


def _p1_from_energies(E: np.ndarray) -> np.ndarray:
    total = E[:, 0] + E[:, 1]
    if np.any(total == 0.0):
        raise DegenerateEnergies(f"{int(np.sum(total == 0.0))} rows have zero total energy")
    return E[:, 1] / total


def predict_proba(params: IkcParams, X, mode: str = COHERENT) -> np.ndarray:
    """Clipped ``P(Y=1 | x)`` for every row of ``X``."""
    return clip_prob(_p1_from_energies(energies(params, X, mode)))


def forward(params: IkcParams, x, mode: str = COHERENT) -> ProbPair:
    """Single-row readout as a ``ProbPair``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("forward takes one feature vector; use predict_proba for batches")
    p1 = float(predict_proba(params, x, mode)[0])
    return ProbPair(1.0 - p1, p1)


def _row_nll(p1: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -np.log(np.where(y == 1, p1, 1.0 - p1))


def nll(params: IkcParams, X, y, mode: str = COHERENT) -> float:
    """Mean negative log-likelihood with clipped probabilities."""
    y = np.asarray(y)
    p1 = predict_proba(params, X, mode)
    if p1.shape[0] != y.shape[0] or y.shape[0] == 0:
        raise ValueError("X and y must have the same, non-zero number of rows")
    return float(np.mean(_row_nll(p1, y)))


def _nll_grad_vector(theta, X, y, d, mode, weight_decay):
    # real arithmetic throughout; complex matmuls would upcast X every call
    k = 2 * d
    wr = theta[:k].reshape(2, d)
    wi = theta[k : 2 * k].reshape(2, d)
    br = theta[2 * k : 2 * k + 2]
    bi = theta[2 * k + 2 : 2 * k + 4]
    n = X.shape[0]
    if mode == COHERENT:
        pr = X @ wr.T + br
        pim = X @ wi.T + bi
        E = pr * pr + pim * pim
    else:
        X2 = X * X
        E = X2 @ (wr * wr + wi * wi).T + (br * br + bi * bi)
    S = E[:, 0] + E[:, 1]
    if np.any(S == 0.0):
        raise DegenerateEnergies("zero total energy during training")
    p1 = E[:, 1] / S
    pc = clip_prob(p1)
    loss = float(np.mean(_row_nll(pc, y)))

    # clip is a flat region: rows whose label probability is clipped give 0
    active = (p1 > PROB_CLIP) & (p1 < 1.0 - PROB_CLIP)
    y1 = y == 1
    E_y = np.where(y1, E[:, 1], E[:, 0])
    E_o = np.where(y1, E[:, 0], E[:, 1])
    inv_S = np.where(active, 1.0 / S, 0.0)
    g_y = -np.divide(E_o, E_y * S, out=np.zeros(n), where=active)
    G = np.empty((n, 2))
    G[:, 1] = np.where(y1, g_y, inv_S)
    G[:, 0] = np.where(y1, inv_S, g_y)

    if mode == COHERENT:
        Ar = (2.0 / n) * G * pr  # dl/dRe psi
        Ai = (2.0 / n) * G * pim  # dl/dIm psi
        gwr, gwi = Ar.T @ X, Ai.T @ X
        gbr, gbi = Ar.sum(axis=0), Ai.sum(axis=0)
    else:
        s = (G.T @ X2) * (2.0 / n)
        t = G.sum(axis=0) * (2.0 / n)
        gwr, gwi = wr * s, wi * s
        gbr, gbi = br * t, bi * t
    grad = np.concatenate([gwr.ravel(), gwi.ravel(), gbr, gbi])
    if weight_decay:
        loss += weight_decay * float(theta @ theta)
        grad = grad + 2.0 * weight_decay * theta
    return loss, grad


def grad_nll(params: IkcParams, X, y, mode: str = COHERENT, weight_decay: float = 0.0) -> IkcParams:
    """Gradient of ``nll + weight_decay * ||theta||^2`` in IkcParams layout.

    Real parts hold derivatives with respect to real components and
    imaginary parts those with respect to imaginary components.
    """
    _check_mode(mode)
    X = _as_matrix(X, params.d)
    y = np.asarray(y)
    _, g = _nll_grad_vector(params.to_vector(), X, y, params.d, mode, weight_decay)
    d = params.d
    k = 2 * d
    return IkcParams((g[:k] + 1j * g[k : 2 * k]).reshape(2, d), g[2 * k : 2 * k + 2] + 1j * g[2 * k + 2 :])


def init_params(d: int, seed: int, scale: float = 0.1) -> IkcParams:
    """Gaussian init; biases offset to 1 so initial energies stay away from 0."""
    rng = stream(seed, "ikc-init")
    w = scale * (rng.standard_normal((2, d)) + 1j * rng.standard_normal((2, d)))
    b = 1.0 + scale * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    return IkcParams(w, b)


def fit(
    config: TrainConfig,
    X_train,
    y_train,
    X_val=None,
    y_val=None,
    mode: str = COHERENT,
    init: Optional[IkcParams] = None,
) -> tuple[IkcParams, History]:
    """Train by (mini-batch) first-order minimization of the penalized NLL.

    With validation data the best-validation-NLL parameters are returned;
    without it, the parameters after exactly ``config.max_epochs`` epochs.
    """
    _check_mode(mode)
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    d = X_train.shape[1]
    params0 = init if init is not None else init_params(d, config.seed)
    if params0.d != d:
        raise ValueError("initial parameters do not match the feature dimension")

    def grad_fn(theta, rows):
        if rows is None:
            return _nll_grad_vector(theta, X_train, y_train, d, mode, config.weight_decay)
        return _nll_grad_vector(theta, X_train[rows], y_train[rows], d, mode, config.weight_decay)

    def train_eval(theta):
        return nll(IkcParams.from_vector(theta, d), X_train, y_train, mode)

    val_eval = None
    if X_val is not None:
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = np.asarray(y_val)

        def val_eval(theta):
            return nll(IkcParams.from_vector(theta, d), X_val, y_val, mode)

    try:
        theta, hist = run_training(params0.to_vector(), X_train.shape[0], grad_fn, train_eval, val_eval, config)
    except (DegenerateEnergies, FloatingPointError) as exc:
        raise DivergedTraining(-1, f"degenerate parameters ({exc})") from exc
    return IkcParams.from_vector(theta, d), hist


def to_json_dict(params: IkcParams) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "d": params.d,
        "w0_re": params.w0.real.tolist(),
        "w0_im": params.w0.imag.tolist(),
        "w1_re": params.w1.real.tolist(),
        "w1_im": params.w1.imag.tolist(),
        "b0_re": float(params.b0.real),
        "b0_im": float(params.b0.imag),
        "b1_re": float(params.b1.real),
        "b1_im": float(params.b1.imag),
    }


def from_json_dict(doc: dict) -> IkcParams:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not an {CHECKPOINT_FORMAT} checkpoint: format={doc.get('format')!r}")
    d = int(doc["d"])
    w0 = np.asarray(doc["w0_re"]) + 1j * np.asarray(doc["w0_im"])
    w1 = np.asarray(doc["w1_re"]) + 1j * np.asarray(doc["w1_im"])
    if w0.shape != (d,) or w1.shape != (d,):
        raise ValueError("weight arrays do not match d")
    return IkcParams.from_channels(
        w0, w1, complex(doc["b0_re"], doc["b0_im"]), complex(doc["b1_re"], doc["b1_im"])
    )


def checkpoint_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(params: IkcParams, path) -> str:
    """Write the JSON checkpoint; returns its content hash."""
    doc = to_json_dict(params)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
    return checkpoint_hash(doc)


def load_checkpoint(path) -> IkcParams:
    with open(path) as fh:
        return from_json_dict(json.load(fh))
