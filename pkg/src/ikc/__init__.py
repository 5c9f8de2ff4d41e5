"""Born-rule coherent aggregation for binary classification.

The core object is the Interference Kernel Classifier (``ikc.model``): each
label has an affine complex amplitude and class probabilities follow from
squared magnitudes. Around it sit an interaction-contrast simulator, logistic
baselines, calibration metrics, paired seed-level statistics, data loading
and an experiment runner.
"""
from .amplitude import (
    PROB_CLIP, DegenerateEnergies, EnergyPair, ProbPair, born_normalize, clip_prob,
    coherent_energy, incoherent_energy, interference_term, magnitude_sq,
)
from .model import COHERENT, INCOHERENT, IkcParams, fit, forward, grad_nll, init_params, nll, predict_proba
from .optim import DivergedTraining, History, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "PROB_CLIP", "DegenerateEnergies", "EnergyPair", "ProbPair", "born_normalize", "clip_prob",
    "coherent_energy", "incoherent_energy", "interference_term", "magnitude_sq",
    "COHERENT", "INCOHERENT", "IkcParams", "fit", "forward", "grad_nll", "init_params", "nll",
    "predict_proba", "DivergedTraining", "History", "TrainConfig", "__version__",
]
