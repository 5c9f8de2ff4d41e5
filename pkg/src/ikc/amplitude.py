"""Complex amplitudes, coherent/incoherent energies and Born normalization.

Amplitudes are plain Python/NumPy complex numbers. A class energy is either

* coherent (add-then-square): ``|sum_k a_k|**2``, or
* incoherent (square-then-sum): ``sum_k |a_k|**2``,

and the two differ exactly by the pairwise interference terms
``sum_{i<j} 2 Re(a_i conj(a_j))``.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

# probability clip applied to every model readout
PROB_CLIP = 1e-7


def clip_prob(p):
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


class DegenerateEnergies(ValueError):
    """Both class energies are zero, so no distribution can be formed."""


class EnergyPair(NamedTuple):
    e0: float
    e1: float


class ProbPair(NamedTuple):
    p0: float
    p1: float


def magnitude_sq(z) -> float:
    z = complex(z)
    return z.real * z.real + z.imag * z.imag


def _components(components: Sequence[complex]) -> np.ndarray:
    a = np.asarray(components, dtype=np.complex128).ravel()
    if a.size == 0:
        raise ValueError("need at least one amplitude component")
    return a


def coherent_energy(components: Sequence[complex]) -> float:
    """``|sum_k a_k|^2``."""
    return magnitude_sq(_components(components).sum())


def incoherent_energy(components: Sequence[complex]) -> float:
    """``sum_k |a_k|^2``; all cross-terms removed."""
    a = _components(components)
    return float(np.sum(a.real**2 + a.imag**2))


def interference_term(components: Sequence[complex]) -> float:
    """Coherent minus incoherent energy, written as ``|sum|^2 - sum|a|^2``.

    Equivalent to the pairwise sum ``sum_{i<j} 2 Re(a_i conj(a_j))`` but O(K).
    """
    a = _components(components)
    return coherent_energy(a) - incoherent_energy(a)


def born_normalize(e: EnergyPair | tuple[float, float]) -> ProbPair:
    """Normalize a pair of class energies into ``(P(Y=0), P(Y=1))``."""
    e0, e1 = float(e[0]), float(e[1])
    if e0 < 0 or e1 < 0:
        raise ValueError(f"energies must be non-negative, got ({e0}, {e1})")
    total = e0 + e1
    if total == 0.0:
        raise DegenerateEnergies("all-zero amplitudes: e0 + e1 == 0")
    p1 = e1 / total
    return ProbPair(1.0 - p1, p1)
