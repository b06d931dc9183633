"""
Optimization accuracy versus stabilization precision
====================================================

The inf-convolution feedback solves two optimization problems per
sampling instant.  Loosening their accuracy changes how close the
three-wheel robot gets to the origin.  Run with an optional horizon in
seconds (default 1.0; the shipped config uses 4.0):

    python demos/04_accuracy_sweep.py 4
"""

import sys
import tempfile

from nsstab.experiments import CASE_COLUMNS, load_config, run_case_study

T = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
cfg = load_config(overrides={"T": T})

with tempfile.TemporaryDirectory() as out:
    rows = run_case_study(cfg, out)

print(" ".join(f"{c:>11}" for c in CASE_COLUMNS + ("wall_time",)))
for r in rows:
    print(" ".join(f"{r[c]:>11.4g}" if isinstance(r[c], float) else f"{str(r[c]):>11}"
                   for c in CASE_COLUMNS + ("wall_time",)))

# Each cell also writes traj_eps<a>.csv with columns t, x1..x5, u1, u2, V, flag;
# plotting |x| (the norm of x1..x5) and V against t reproduces the comparison.
