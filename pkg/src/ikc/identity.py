"""The 2x2 amplitude-linear model and the phase-sweep simulation.

In the one-channel model ``psi(a, b) = u0 + a*uA + b*uB`` with Born cell
probabilities ``p_ab = |psi(a, b)|^2``, the interaction contrast
``p11 - p10 - p01 + p00`` equals ``2 Re(uA conj(uB))`` for any complex
triple. ``simulate_sweep`` checks this statistically: it rotates the phase
of ``uB`` over ``[-pi, pi]``, simulates a balanced Bernoulli design and
brackets the plug-in contrast with a stratified percentile bootstrap.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .rng import stream

CELLS = ((0, 0), (0, 1), (1, 0), (1, 1))
SWEEP_COLUMNS = ("delta_phi", "theory", "estimate", "ci_lo", "ci_hi")


class InvalidProbabilityModel(ValueError):
    """A cell probability |psi(a,b)|^2 fell outside [0, 1]."""


@dataclass(frozen=True)
class AmplitudeTriple:
    u0: complex
    uA: complex
    uB: complex

    @classmethod
    def polar(cls, r0, rA, rB, phi0=0.0, phiA=0.0, phiB=0.0) -> "AmplitudeTriple":
        return cls(r0 * np.exp(1j * phi0), rA * np.exp(1j * phiA), rB * np.exp(1j * phiB))

    def amplitude(self, a: int, b: int) -> complex:
        return complex(self.u0) + a * complex(self.uA) + b * complex(self.uB)


class CellProbs(NamedTuple):
    p00: float
    p01: float
    p10: float
    p11: float


class SweepPoint(NamedTuple):
    delta_phi: float
    theory: float
    estimate: float
    ci_lo: float
    ci_hi: float


def _raw_cells(u: AmplitudeTriple) -> CellProbs:
    vals = [abs(u.amplitude(a, b)) ** 2 for a, b in CELLS]
    return CellProbs(*vals)


def cell_probs(u: AmplitudeTriple) -> CellProbs:
    """Born probabilities of the four design cells.

    Raises
    ------
    InvalidProbabilityModel
        If any ``|psi(a, b)|^2`` exceeds 1.
    """
    p = _raw_cells(u)
    bad = [f"p{a}{b}={v:.6g}" for (a, b), v in zip(CELLS, p) if v > 1.0]
    if bad:
        raise InvalidProbabilityModel("cell probabilities exceed 1: " + ", ".join(bad))
    return p


def interaction_contrast(p: CellProbs | Sequence[float]) -> float:
    p = CellProbs(*p)
    return p.p11 - p.p10 - p.p01 + p.p00


def identity_check(u: AmplitudeTriple) -> tuple[float, float]:
    """Return ``(contrast from expanded cells, 2 Re(uA conj(uB)))``.

    No probability bound is enforced; the identity is purely algebraic.
    """
    lhs = interaction_contrast(_raw_cells(u))
    rhs = 2.0 * (complex(u.uA) * complex(u.uB).conjugate()).real
    return lhs, rhs


def phase_grid(n_points: int) -> np.ndarray:
    # both endpoints included: 121 points -> step pi/60
    return np.linspace(-np.pi, np.pi, n_points)


def _sweep_point(args) -> SweepPoint:
    index, dphi, r0, rA, rB, n, n_boot, seed = args
    u = AmplitudeTriple.polar(r0, rA, rB, phiA=0.0, phiB=dphi)
    try:
        p = np.array(cell_probs(u))
    except InvalidProbabilityModel as exc:
        raise InvalidProbabilityModel(f"at delta_phi={dphi:.6g}: {exc}") from None

    rng = stream(seed, "sweep", index)
    outcomes = rng.random((4, n)) < p[:, None]
    p_hat = outcomes.mean(axis=1)
    estimate = interaction_contrast(p_hat)

    # Resampling n outcomes with replacement from a cell with k successes
    # gives a Binomial(n, k/n) success count, so draw the counts directly.
    boot = rng.binomial(n, p_hat[:, None], size=(4, n_boot)) / n
    reps = boot[3] - boot[2] - boot[1] + boot[0]
    lo, hi = np.percentile(reps, [2.5, 97.5])
    theory = 2.0 * rA * rB * np.cos(dphi)
    return SweepPoint(float(dphi), float(theory), float(estimate), float(lo), float(hi))


def simulate_sweep(
    r0: float,
    rA: float,
    rB: float,
    n_points: int = 121,
    n_per_cell: int = 2000,
    n_boot: int = 5000,
    seed: int = 108,
    workers: int = 1,
) -> list[SweepPoint]:
    """Phase sweep of the contrast with per-point bootstrap intervals.

    ``phi_A`` is pinned to 0 and ``phi_B`` runs over ``n_points`` equally
    spaced values in ``[-pi, pi]``. Each point owns the random stream
    ``(seed, "sweep", index)``, so the output is independent of ``workers``.
    """
    if min(n_points, n_per_cell, n_boot) < 1:
        raise ValueError("n_points, n_per_cell and n_boot must all be >= 1")
    grid = phase_grid(n_points)
    jobs = [(i, float(d), r0, rA, rB, n_per_cell, n_boot, seed) for i, d in enumerate(grid)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def write_sweep_csv(points: Iterable[SweepPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for pt in points:
            w.writerow([repr(float(v)) for v in pt])


def read_sweep_csv(path) -> list[SweepPoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [SweepPoint(*(float(r[c]) for c in SWEEP_COLUMNS)) for r in rows]
