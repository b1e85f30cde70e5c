"""Nested cross-validation comparison of calibration methods.

Outer folds estimate out-of-sample performance; inside each outer training
fold, an inner cross-validation picks hyperparameters by validation
log-loss and keeps the per-fold calibrators as an averaged ensemble. The
run below uses 2 repeats of 3 outer folds with 3 inner folds to stay
quick; the defaults (5 x 5 x 3) mirror a full study.
"""

import numpy as np

from probcal import HyperGrid, compare_methods, softmax

rng = np.random.default_rng(99)

n, k = 1800, 3
true_logits = rng.normal(size=(n, k)) * 1.4
labels = np.array([rng.choice(k, p=row) for row in softmax(true_logits, axis=1)])
logits = true_logits * 2.2 + rng.normal(size=(n, k)) * 0.1  # overconfident + noisy

methods = ["uncalibrated", "temperature", "vector_scaling", "dirichlet_l2", "ovr_beta"]
grids = {"dirichlet_l2": HyperGrid(lambdas=(1e-5, 1e-3, 1e-1))}

results = compare_methods(
    logits, labels, "logits", methods,
    repeats=2, outer_folds=3, inner_folds=3,
    grids=grids, bins=15, n_resamples=500, alpha=0.05, seed=0,
)

print(f"{'method':<16} {'log_loss':>9} {'brier':>8} {'cw_ece':>8} "
      f"{'p_conf_ece':>11} {'p_cw_ece':>9}")
for r in results:
    print(f"{r.method:<16} {r.log_loss:9.4f} {r.brier:8.4f} {r.cw_ece:8.4f} "
          f"{r.p_conf_ece:11.2f} {r.p_cw_ece:9.2f}")

print()
print("p_conf_ece / p_cw_ece are the fractions of outer folds on which the")
print("significance test accepted the calibrated model at alpha = 0.05.")
best = min(results, key=lambda r: r.log_loss)
print(f"best mean log-loss: {best.method} ({best.log_loss:.4f})")
