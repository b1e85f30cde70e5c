"""Resampling significance test of calibration.

The null hypothesis is that the model is calibrated, in which case the
calibration error against the actual labels is in expectation equal to the
error against pseudo-labels drawn from the predicted distributions
themselves. The test draws ``n_resamples`` pseudo-label sets, recomputes
the chosen statistic for each, and reports the fraction of resampled
statistics strictly greater than the observed one.

Pseudo-labels are generated with a counter-based generator: the uniform
for (resample r, row i) is derived from the 64-bit splitmix mix of
``seed``, then ``r``, then ``i``. No generator state is carried between
draws, so results are bit-identical across runs, platforms, chunk sizes
and any parallel execution order.
"""

from dataclasses import dataclass

import numpy as np

from .core import as_label_vector, as_probability_matrix
from .metrics import DEFAULT_BINS, _bin_index

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_CHUNK = 256


def _mix64(x):
    """splitmix64 finalizer, vectorized over uint64 arrays (modular 2^64)."""
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def counter_uniforms(seed: int, resample_indices, row_indices) -> np.ndarray:
    """Uniforms in [0, 1) indexed by (resample, row); broadcasting inputs.

    Deterministic pure function of (seed, resample index, row index).
    """
    s = np.uint64(seed % (1 << 64))
    r = np.asarray(resample_indices, dtype=np.uint64)
    i = np.asarray(row_indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64((_mix64((_mix64(s) + r).astype(np.uint64)) + i).astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass
class TestResult:
    __test__ = False  # not a pytest class, despite the name

    observed_statistic: float
    resampled_statistics: np.ndarray
    p_value: float
    n_resamples: int
    seed: int

    @classmethod
    def from_statistics(cls, observed: float, resampled, seed: int,
                        plus_one: bool = False) -> "TestResult":
        resampled = np.asarray(resampled, dtype=float)
        n = resampled.size
        if n < 1:
            raise ValueError("need at least one resampled statistic")
        greater = int((resampled > observed).sum())
        p = (greater + 1) / (n + 1) if plus_one else greater / n
        return cls(
            observed_statistic=float(observed),
            resampled_statistics=resampled,
            p_value=float(p),
            n_resamples=n,
            seed=seed,
        )


def _pseudo_labels(cum: np.ndarray, seed: int, resample_indices: np.ndarray) -> np.ndarray:
    """Pseudo-label block of shape (len(resample_indices), n)."""
    n, k = cum.shape
    u = counter_uniforms(seed, resample_indices[:, None], np.arange(n)[None, :])
    draws = (u[:, :, None] > cum[None, :, :]).sum(axis=2)
    return np.minimum(draws, k - 1)


def _conf_machinery(p: np.ndarray, y: np.ndarray, m: int):
    n = p.shape[0]
    conf = p.max(axis=1)
    amax = p.argmax(axis=1)
    idx = _bin_index(conf, m)
    membership = np.zeros((n, m))
    membership[np.arange(n), idx] = 1.0
    counts = membership.sum(axis=0)
    nonempty = counts > 0
    safe = np.maximum(counts, 1.0)
    mean_conf = (membership * conf[:, None]).sum(axis=0) / safe
    weights = counts / n

    def statistic(labels_block: np.ndarray) -> np.ndarray:
        hits = (labels_block == amax).astype(float)
        acc = (hits @ membership) / safe
        gaps = np.abs(acc - mean_conf) * nonempty
        return gaps @ weights

    observed = float(statistic(y[None, :])[0])
    return observed, statistic


def _cw_machinery(p: np.ndarray, y: np.ndarray, m: int):
    n, k = p.shape
    memberships, safes, nonempties, mean_preds, weights = [], [], [], [], []
    for j in range(k):
        idx = _bin_index(p[:, j], m)
        mem = np.zeros((n, m))
        mem[np.arange(n), idx] = 1.0
        counts = mem.sum(axis=0)
        memberships.append(mem)
        safes.append(np.maximum(counts, 1.0))
        nonempties.append(counts > 0)
        mean_preds.append((mem * p[:, j][:, None]).sum(axis=0) / np.maximum(counts, 1.0))
        weights.append(counts / n)

    def statistic(labels_block: np.ndarray) -> np.ndarray:
        total = np.zeros(labels_block.shape[0])
        for j in range(k):
            freq = ((labels_block == j).astype(float) @ memberships[j]) / safes[j]
            gaps = np.abs(freq - mean_preds[j]) * nonempties[j]
            total += gaps @ weights[j]
        return total / k

    observed = float(statistic(y[None, :])[0])
    return observed, statistic


def _resampled_statistics(p: np.ndarray, statistic_fn, n_resamples: int, seed: int) -> np.ndarray:
    """Statistic value against pseudo-labels for each resample index."""
    cum = np.cumsum(p, axis=1)
    out = np.empty(n_resamples)
    for start in range(0, n_resamples, _CHUNK):
        block = np.arange(start, min(start + _CHUNK, n_resamples))
        pseudo = _pseudo_labels(cum, seed, block)
        out[block] = statistic_fn(pseudo)
    return out


def calibration_test(p, y, statistic: str = "conf_ece", m: int = DEFAULT_BINS,
                     n_resamples: int = 10000, seed: int = 0,
                     plus_one: bool = False) -> TestResult:
    """Resampling test of the hypothesis that predictions are calibrated.

    Parameters
    ----------
    p, y : predictions and labels.
    statistic : {"conf_ece", "cw_ece"}
        Calibration error to compare against its pseudo-label distribution.
    m : int
        Equal-width bin count for the statistic.
    n_resamples : int
        Number of pseudo-label sets drawn.
    seed : int
        Seed of the counter-based generator.
    plus_one : bool
        When set, report (count + 1) / (N + 1) instead of count / N, which
        never returns an exact zero. Off by default: the plain fraction of
        resamples strictly greater than the observed statistic.
    """
    p = as_probability_matrix(p)
    y = as_label_vector(y, p.shape[1], p.shape[0])
    if n_resamples < 1:
        raise ValueError("n_resamples must be at least 1")
    if statistic == "conf_ece":
        observed, stat_fn = _conf_machinery(p, y, m)
    elif statistic == "cw_ece":
        observed, stat_fn = _cw_machinery(p, y, m)
    else:
        raise ValueError(f"unknown statistic {statistic!r}; use 'conf_ece' or 'cw_ece'")
    resampled = _resampled_statistics(p, stat_fn, n_resamples, seed)
    return TestResult.from_statistics(observed, resampled, seed, plus_one=plus_one)


def acceptance_rate(results, alpha: float = 0.05) -> float:
    """Fraction of test results whose p-value exceeds alpha."""
    results = list(results)
    if not results:
        raise ValueError("need at least one test result")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return float(np.mean([r.p_value > alpha for r in results]))
