"""First-order training loop shared by the IKC and the logistic baselines.

Models hand in a flat real parameter vector and two callables; the loop does
Adam or plain SGD, optional mini-batching, early stopping on validation NLL
and checkpoint-restore to the best validation epoch.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .rng import stream


class DivergedTraining(RuntimeError):
    def __init__(self, epoch: int, msg: str = "non-finite loss"):
        super().__init__(f"{msg} at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    weight_decay: float = 1e-4
    max_epochs: int = 500
    batch_size: int = 0  # 0 means full batch
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stop_patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if not self.adam_eps > 0:
            raise ValueError("adam_eps must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.max_epochs < 0 or self.batch_size < 0 or self.early_stop_patience < 1:
            raise ValueError("max_epochs/batch_size must be >= 0, patience >= 1")

    def with_(self, **kw) -> "TrainConfig":
        return replace(self, **kw)


@dataclass
class History:
    train_nll: list = field(default_factory=list)
    val_nll: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_nll: float = float("inf")
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.train_nll)


# grad_fn(theta, rows) -> (penalized loss on rows, gradient)
GradFn = Callable[[np.ndarray, Optional[np.ndarray]], tuple]
# eval_fn(theta) -> unpenalized NLL
EvalFn = Callable[[np.ndarray], float]


def run_training(
    theta0: np.ndarray,
    n_rows: int,
    grad_fn: GradFn,
    train_eval: EvalFn,
    val_eval: Optional[EvalFn],
    config: TrainConfig,
) -> tuple[np.ndarray, History]:
    """Minimize with checkpoint-restore on the validation NLL.

    Without ``val_eval`` (retraining on train+val) the loop runs exactly
    ``max_epochs`` epochs and returns the final parameters.
    """
    theta = np.array(theta0, dtype=np.float64, copy=True)
    hist = History()
    best = theta.copy()
    if val_eval is not None:
        hist.best_val_nll = float(val_eval(theta))
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    step = 0
    rng = stream(config.seed, "batches")
    bs = config.batch_size if 0 < config.batch_size < n_rows else 0
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        batches = [None] if bs == 0 else np.array_split(rng.permutation(n_rows), -(-n_rows // bs))
        for rows in batches:
            loss, g = grad_fn(theta, rows)
            if not (np.isfinite(loss) and np.all(np.isfinite(g))):
                raise DivergedTraining(epoch)
            step += 1
            if config.optimizer == "adam":
                b1, b2 = config.adam_beta1, config.adam_beta2
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                mhat = m / (1 - b1**step)
                vhat = v / (1 - b2**step)
                theta = theta - config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
            else:
                theta = theta - config.learning_rate * g
        tr = float(train_eval(theta))
        if not np.isfinite(tr) or not np.all(np.isfinite(theta)):
            raise DivergedTraining(epoch)
        hist.train_nll.append(tr)
        if val_eval is None:
            continue
        va = float(val_eval(theta))
        if not np.isfinite(va):
            raise DivergedTraining(epoch, "non-finite validation loss")
        hist.val_nll.append(va)
        if va < hist.best_val_nll:
            hist.best_val_nll, hist.best_epoch, best = va, epoch, theta.copy()
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                hist.stopped_early = True
                break

    if val_eval is None:
        hist.best_epoch = hist.epochs_run
        return theta, hist
    return best, hist
