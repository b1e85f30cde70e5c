"""Hyperparameter grids, inner-CV ensemble fitting, and nested comparison.

The fitting protocol: split the calibration data into folds, fit every
grid point on each fold's training part, score mean validation log-loss,
pick the best grid point, and keep its per-fold calibrators as an
ensemble. The comparison harness wraps that protocol in repeated outer
cross-validation and aggregates the full measure bundle per method.
"""

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_CLIP_FLOOR, LOGITS, PROBABILITIES, softmax
from .metrics import DEFAULT_BINS, evaluate, log_loss
from .models import METHOD_INPUT, EnsembleModel, fit_calibrator
from .stattest import _mix64, acceptance_rate, calibration_test

#: Penalty-weight grid, 1e-7 .. 1e2 log-spaced.
LAMBDA_GRID = tuple(10.0 ** e for e in range(-7, 3))
#: Bin-count grid for the binning calibrators.
BIN_GRID = (5, 10, 15, 20, 25, 30)

#: Fixed fallbacks used when no grid and no explicit value are given.
DEFAULT_FIXED = {
    "dirichlet_l2": {"lam": 1e-3},
    "dirichlet_odir": {"lam": 1e-3, "mu": 1e-3},
    "matrix_odir": {"lam": 1e-3, "mu": 1e-3},
    "vector_scaling": {"mu": 0.0},
    "ovr_width_bin": {"bins": 5},
    "ovr_freq_bin": {"bins": 10},
    "temperature": {},
    "ovr_isotonic": {},
    "ovr_beta": {},
    "uncalibrated": {},
}


@dataclass(frozen=True)
class HyperGrid:
    """Candidate hyperparameter values for one method."""

    lambdas: tuple = LAMBDA_GRID
    mus: tuple = ()
    bins: tuple = BIN_GRID

    def points(self, method: str) -> list:
        """Grid points (dicts) in deterministic order for one method."""
        if method == "dirichlet_l2":
            return [{"lam": l} for l in self.lambdas]
        if method in ("dirichlet_odir", "matrix_odir"):
            if self.mus:
                return [{"lam": l, "mu": m} for l in self.lambdas for m in self.mus]
            return [{"lam": l, "mu": l} for l in self.lambdas]
        if method == "vector_scaling":
            return [{"mu": m} for m in (self.mus or (0.0,))]
        if method in ("ovr_width_bin", "ovr_freq_bin"):
            return [{"bins": int(b)} for b in self.bins]
        return [{}]


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Deterministic fold index per instance, stratified by class.

    Within each class the indices are shuffled by hashing (seed, position)
    and dealt round-robin, so every fold sees each class as evenly as the
    counts allow.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"cannot split {n} instances into {folds} folds")
    assignment = np.empty(n, dtype=np.int64)
    offset = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        keys = _mix64(np.uint64(seed % (1 << 64)) + np.arange(offset, offset + idx.size, dtype=np.uint64))
        idx = idx[np.argsort(keys, kind="stable")]
        assignment[idx] = np.arange(idx.size) % folds
        offset += idx.size
    return assignment


def cross_val_fit(method: str, X, y, folds: int, seed: int = 0,
                  grid: HyperGrid | None = None,
                  fixed_hyper: dict | None = None,
                  clip_floor: float = DEFAULT_CLIP_FLOOR,
                  label_names: list | None = None):
    """Inner-CV protocol: grid selection by mean validation log-loss + ensemble.

    Returns ``(model, best_hyper, table)`` where ``table`` lists
    ``(hyper, mean_val_log_loss)`` per grid point. With ``folds == 1`` the
    method is fitted once on all the data (no grid search possible).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] < folds:
        raise ValueError(f"need at least {folds} instances, got {X.shape[0]}")
    candidates = grid.points(method) if grid is not None else None
    if candidates is not None and not candidates:
        raise ValueError(f"empty hyperparameter grid for method {method}")

    if folds == 1:
        if candidates is not None and len(candidates) > 1:
            raise ValueError("grid search requires folds >= 2")
        hyper = dict(candidates[0]) if candidates else dict(
            fixed_hyper if fixed_hyper is not None else DEFAULT_FIXED[method]
        )
        model = fit_calibrator(method, X, y, hyper, label_names=label_names,
                               clip_floor=clip_floor, seed=seed)
        return model, hyper, [(hyper, None)]

    if candidates is None:
        candidates = [dict(fixed_hyper if fixed_hyper is not None else DEFAULT_FIXED[method])]

    assignment = stratified_folds(y, folds, seed)
    table = []
    best = None
    for hyper in candidates:
        members = []
        losses = []
        for f in range(folds):
            train = assignment != f
            val = ~train
            member = fit_calibrator(method, X[train], y[train], hyper,
                                    label_names=label_names, clip_floor=clip_floor,
                                    seed=seed)
            members.append(member)
            losses.append(log_loss(member.apply(X[val]), y[val], clip_floor))
        mean_loss = float(np.mean(losses))
        table.append((dict(hyper), mean_loss))
        if best is None or mean_loss < best[0]:
            best = (mean_loss, dict(hyper), members)

    _, best_hyper, members = best
    model = EnsembleModel(members=members) if len(members) > 1 else members[0]
    return model, best_hyper, table


@dataclass
class MethodComparison:
    """Aggregated measures of one method over the outer folds."""

    method: str
    best_hypers: list
    fold_reports: list
    accuracy: float = 0.0
    error_rate: float = 0.0
    log_loss: float = 0.0
    brier: float = 0.0
    conf_ece: float = 0.0
    cw_ece: float = 0.0
    mce: float = 0.0
    p_conf_ece: float = 0.0
    p_cw_ece: float = 0.0

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "accuracy": self.accuracy,
            "error_rate": self.error_rate,
            "log_loss": self.log_loss,
            "brier": self.brier,
            "conf_ece": self.conf_ece,
            "cw_ece": self.cw_ece,
            "mce": self.mce,
            "p_conf_ece": self.p_conf_ece,
            "p_cw_ece": self.p_cw_ece,
        }


def compare_methods(X, y, kind: str, methods, repeats: int = 5, outer_folds: int = 5,
                    inner_folds: int = 3, grids: dict | None = None,
                    fixed_hypers: dict | None = None,
                    bins: int = DEFAULT_BINS, n_resamples: int = 10000,
                    alpha: float = 0.05, seed: int = 0,
                    clip_floor: float = DEFAULT_CLIP_FLOOR) -> list:
    """Repeated outer CV around the inner-CV fitting protocol.

    Parameters
    ----------
    X : prediction rows, probabilities or logits according to ``kind``.
    y : integer labels.
    kind : {"probabilities", "logits"}
        Probability methods consume softmax(X) when logits are supplied;
        logit methods require ``kind == "logits"``.
    methods : sequence of method tags to compare.
    repeats, outer_folds, inner_folds : the R x F x inner protocol shape.
    grids : optional {method: HyperGrid}; methods not listed use their
        fixed defaults.
    n_resamples, alpha : significance-test configuration; the aggregated
        p_conf_ece / p_cw_ece are the fractions of outer folds whose test
        accepted calibration at level alpha.

    Returns a list of MethodComparison in the given method order.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if kind not in (PROBABILITIES, LOGITS):
        raise ValueError(f"unknown prediction kind {kind!r}")
    for method in methods:
        if METHOD_INPUT[method] == LOGITS and kind != LOGITS:
            raise ValueError(f"method {method} requires logit inputs")
    probs = softmax(X, axis=1) if kind == LOGITS else X

    per_method = {m: {"reports": [], "hypers": [], "conf_tests": [], "cw_tests": []}
                  for m in methods}
    for r in range(repeats):
        outer_seed = int(_mix64(np.uint64(seed % (1 << 64)) + np.uint64(1000 + r)))
        assignment = stratified_folds(y, outer_folds, outer_seed)
        for f in range(outer_folds):
            train = assignment != f
            test = ~train
            test_seed = int(_mix64(np.uint64(outer_seed) + np.uint64(f)) % (1 << 62))
            for method in methods:
                feats = X if METHOD_INPUT[method] == LOGITS else probs
                grid = (grids or {}).get(method)
                fixed = (fixed_hypers or {}).get(method)
                model, best_hyper, _ = cross_val_fit(
                    method, feats[train], y[train], inner_folds, seed=outer_seed,
                    grid=grid, fixed_hyper=fixed, clip_floor=clip_floor,
                )
                calibrated = model.apply(feats[test])
                report = evaluate(calibrated, y[test], bins, clip_floor)
                conf_t = calibration_test(calibrated, y[test], "conf_ece", bins,
                                          n_resamples, test_seed)
                cw_t = calibration_test(calibrated, y[test], "cw_ece", bins,
                                        n_resamples, test_seed + 1)
                report.p_conf_ece = conf_t.p_value
                report.p_cw_ece = cw_t.p_value
                slot = per_method[method]
                slot["reports"].append(report)
                slot["hypers"].append(best_hyper)
                slot["conf_tests"].append(conf_t)
                slot["cw_tests"].append(cw_t)

    results = []
    for method in methods:
        slot = per_method[method]
        reports = slot["reports"]
        comparison = MethodComparison(
            method=method,
            best_hypers=slot["hypers"],
            fold_reports=reports,
            accuracy=float(np.mean([rep.accuracy for rep in reports])),
            error_rate=float(np.mean([rep.error_rate for rep in reports])),
            log_loss=float(np.mean([rep.log_loss for rep in reports])),
            brier=float(np.mean([rep.brier for rep in reports])),
            conf_ece=float(np.mean([rep.conf_ece for rep in reports])),
            cw_ece=float(np.mean([rep.cw_ece for rep in reports])),
            mce=float(np.mean([rep.mce for rep in reports])),
            p_conf_ece=acceptance_rate(slot["conf_tests"], alpha),
            p_cw_ece=acceptance_rate(slot["cw_tests"], alpha),
        )
        results.append(comparison)
    return results
