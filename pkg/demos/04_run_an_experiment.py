"""
A small end-to-end run
======================

The runner does the whole protocol for each seed: split, randomized search
for every system under the same budget, optional retraining, temperature
scaling, metrics and diagnostics. It then writes CSVs and a manifest.
This is the XOR benchmark at reduced size; ``ikc run --experiment e2``
runs it at full scale.
"""
import sys
import tempfile
from pathlib import Path

from ikc.config import HpoSpace, default_config
from ikc.runner import run_experiment

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
cfg = default_config("e2", n_samples=4000, n_seeds=3, hpo=HpoSpace(budget=4))
bundle = run_experiment(cfg, out)

for name in ("metrics.csv", "anchors.csv", "paired_report.csv"):
    print(f"--- {name}")
    print((bundle / name).read_text())
