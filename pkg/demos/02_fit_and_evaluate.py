"""Fit every calibration method on miscalibrated predictions and compare.

The synthetic classifier is overconfident: its predicted probabilities are
a sharpened version of the true class posterior. Each calibrator is fitted
on one half of the data and evaluated on the other half with the full
measure bundle.
"""

import numpy as np

from probcal import evaluate, fit_calibrator, softmax

rng = np.random.default_rng(21)

n, k = 6000, 3
true_logits = rng.normal(size=(n, k)) * 1.2
true_probs = softmax(true_logits, axis=1)
labels = np.array([rng.choice(k, p=row) for row in true_probs])

# The "classifier" sharpens the true posterior by 1.8x: overconfident.
logits = true_logits * 1.8
probs = softmax(logits, axis=1)

half = n // 2
methods = [
    ("uncalibrated", {}, probs),
    ("temperature", {}, logits),
    ("vector_scaling", {"mu": 0.0}, logits),
    ("matrix_odir", {"lam": 1e-3, "mu": 1e-3}, logits),
    ("dirichlet_l2", {"lam": 1e-3}, probs),
    ("dirichlet_odir", {"lam": 1e-3, "mu": 1e-3}, probs),
    ("ovr_isotonic", {}, probs),
    ("ovr_width_bin", {"bins": 10}, probs),
    ("ovr_freq_bin", {"bins": 10}, probs),
    ("ovr_beta", {}, probs),
]

print(f"{'method':<16} {'log_loss':>9} {'brier':>8} {'conf_ece':>9} {'cw_ece':>8} {'acc':>6}")
for method, hyper, X in methods:
    model = fit_calibrator(method, X[:half], labels[:half], hyper)
    report = evaluate(model.apply(X[half:]), labels[half:], m=15)
    print(f"{method:<16} {report.log_loss:9.4f} {report.brier:8.4f} "
          f"{report.conf_ece:9.4f} {report.cw_ece:8.4f} {report.accuracy:6.3f}")

print()
print("every method cuts both calibration errors well below the uncalibrated")
print("row while accuracy barely moves. one catch to notice: the isotonic map")
print("is a step function that can emit hard zeros, and a single zero at the")
print("true class costs -ln(clip floor) in log-loss, which is why its log-loss")
print("can blow up even as its calibration errors improve.")
