"""
Fitting the interference classifier to XOR
==========================================

XOR has no main effects, only an interaction. A linear complex amplitude
per label can still express it, because squaring the amplitude creates the
x1*x2 cross-term. Dropping the cross-terms (the incoherent readout) at the
same parameters shows how much of the fit lives in interference.
"""
import numpy as np

from ikc import COHERENT, INCOHERENT, TrainConfig, fit, predict_proba
from ikc.calibration import coherent_gain, interference_information, metrics
from ikc.data import SplitSpec, gen_xor, split

parts = split(gen_xor(4000, seed=0), SplitSpec(seed=0))
tr, va, te = parts["train"], parts["val"], parts["test"]

cfg = TrainConfig(learning_rate=0.05, weight_decay=1e-5, max_epochs=500, seed=1)
params, hist = fit(cfg, tr.X, tr.y, va.X, va.y)
print(f"stopped after {hist.epochs_run} epochs, best validation NLL {hist.best_val_nll:.2e} at {hist.best_epoch}")

for mode in (COHERENT, INCOHERENT):
    print(mode, metrics(predict_proba(params, te.X, mode), te.y))

# one probability per distinct input; (0,0) and (1,1) are class 0
grid = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
print("coherent  ", predict_proba(params, grid, COHERENT).round(4))
print("incoherent", predict_proba(params, grid, INCOHERENT).round(4))

###############################################################################
# Coherent gain is NLL_inc - NLL_coh; interference information is the mean
# KL from the coherent to the incoherent predictive distribution.
print("G_coh", coherent_gain(params, te.X, te.y))
print("J_int", interference_information(params, te.X))
