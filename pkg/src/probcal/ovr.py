"""Binary calibrators and the one-vs-rest multiclass wrapper.

Four binary score-to-probability maps (isotonic regression via
pool-adjacent-violators, equal-width and equal-frequency binning, and the
beta family, which for two classes is the same family as the Dirichlet
maps), plus a wrapper that fits one binary map per class against the rest
and renormalizes the per-class outputs at prediction time.
"""

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_CLIP_FLOOR, as_probability_matrix, clip_probabilities
from .dirichlet import L2Config, fit as _fit_dirichlet


@dataclass(frozen=True)
class IsotonicMap:
    """Stepwise-constant non-decreasing map learned from scored labels."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if bp.ndim != 1 or bp.shape != v.shape or bp.size == 0:
            raise ValueError("breakpoints and values must be matching nonempty vectors")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(v) < 0.0):
            raise ValueError("values must be non-decreasing")
        if np.any(v < 0.0) or np.any(v > 1.0):
            raise ValueError("values must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    def predict(self, scores) -> np.ndarray:
        """Value of the block at the nearest breakpoint at or below the score."""
        s = np.asarray(scores, dtype=float)
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]


@dataclass(frozen=True)
class BinningMap:
    """Per-bin empirical label frequency over [0, 1]."""

    edges: np.ndarray
    bin_values: np.ndarray
    scheme: str

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        vals = np.asarray(self.bin_values, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or vals.shape != (edges.size - 1,):
            raise ValueError("need m+1 edges and m bin values")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0.0):
            raise ValueError("edges must increase strictly from 0 to 1")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("bin values must lie in [0, 1]")
        if self.scheme not in ("equal-width", "equal-frequency"):
            raise ValueError(f"unknown binning scheme {self.scheme!r}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "bin_values", vals)

    def predict(self, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=float)
        idx = np.digitize(s, self.edges) - 1
        return self.bin_values[np.clip(idx, 0, self.bin_values.size - 1)]


@dataclass(frozen=True)
class BetaParams:
    """Binary map p -> sigmoid(a ln p - b ln(1-p) + c)."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.a, self.b, self.c)):
            raise ValueError("beta parameters must be finite")

    def predict(self, scores, floor: float = DEFAULT_CLIP_FLOOR) -> np.ndarray:
        s = np.asarray(scores, dtype=float)
        s = np.clip(s, floor, 1.0 - 1e-16)
        u = self.a * np.log(s) - self.b * np.log1p(-s) + self.c
        return 1.0 / (1.0 + np.exp(-u))


@dataclass(frozen=True)
class OneVsRestModel:
    """One fitted binary calibrator per class, all of the same kind."""

    kind: str
    maps: tuple

    def __post_init__(self):
        if self.kind not in ("isotonic", "width_bin", "freq_bin", "beta"):
            raise ValueError(f"unknown one-vs-rest kind {self.kind!r}")
        if len(self.maps) < 2:
            raise ValueError("need one calibrator per class, k >= 2")
        object.__setattr__(self, "maps", tuple(self.maps))

    @property
    def k(self) -> int:
        return len(self.maps)


def _binary_inputs(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if s.ndim != 1 or s.shape != y.shape or s.size == 0:
        raise ValueError("scores and labels must be matching nonempty vectors")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if np.any((y != 0.0) & (y != 1.0)):
        raise ValueError("labels must be binary (0/1)")
    return s, y


def fit_isotonic(scores, labels) -> IsotonicMap:
    """Monotone least-squares fit by pool-adjacent-violators.

    Tied scores are pooled before the sweep, so the returned map has one
    value per distinct score and is stepwise constant between them.
    """
    s, y = _binary_inputs(scores, labels)
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    uniq, start = np.unique(s, return_index=True)
    counts = np.diff(np.append(start, s.size)).astype(float)
    sums = np.add.reduceat(y, start)

    # Blocks carry (mean, weight, number of pooled distinct scores).
    means: list[float] = []
    weights: list[float] = []
    sizes: list[int] = []
    for mean, w in zip(sums / counts, counts):
        means.append(mean)
        weights.append(w)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            w_tot = weights[-2] + weights[-1]
            merged = (means[-2] * weights[-2] + means[-1] * weights[-1]) / w_tot
            means[-2:] = [merged]
            weights[-2:] = [w_tot]
            sizes[-2:] = [sizes[-2] + sizes[-1]]
    values = np.repeat(means, sizes)
    return IsotonicMap(breakpoints=uniq, values=np.clip(values, 0.0, 1.0))


def fit_binning(scores, labels, m: int, scheme: str = "equal-width") -> BinningMap:
    """Empirical frequency per bin; equal-width or equal-frequency edges.

    Equal-frequency edges are the m-quantiles of the scores with duplicate
    edges merged; both schemes force the outer edges to 0 and 1. Empty
    bins fall back to the overall label frequency.
    """
    s, y = _binary_inputs(scores, labels)
    if m < 1:
        raise ValueError("bin count must be at least 1")
    if scheme == "equal-width":
        edges = np.arange(m + 1) / m
    elif scheme == "equal-frequency":
        edges = np.quantile(s, np.arange(m + 1) / m)
        edges[0], edges[-1] = 0.0, 1.0
        edges = np.unique(np.clip(edges, 0.0, 1.0))
    else:
        raise ValueError(f"unknown binning scheme {scheme!r}")
    idx = np.clip(np.digitize(s, edges) - 1, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1).astype(float)
    sums = np.bincount(idx, weights=y, minlength=edges.size - 1)
    base_rate = y.mean()
    with np.errstate(invalid="ignore"):
        vals = np.where(counts > 0, sums / np.maximum(counts, 1.0), base_rate)
    return BinningMap(edges=edges, bin_values=vals, scheme=scheme)


def fit_beta(scores, labels, lam: float = 1e-10,
             floor: float = DEFAULT_CLIP_FLOOR) -> BetaParams:
    """Fit the beta family by a two-class Dirichlet fit on (1-s, s) rows.

    The fit is unconstrained (coefficients may come out negative, the
    linear family is the superset); the reduction to (a, b, c) follows
    from the two-class score difference.
    """
    s, y = _binary_inputs(scores, labels)
    if np.unique(y).size < 2:
        raise ValueError("labels contain a single class; nothing to fit")
    rows = clip_probabilities(np.column_stack([1.0 - s, s]), floor)
    linear = _fit_dirichlet(rows, y.astype(np.int64), L2Config(lam))
    W, b = linear.W, linear.b
    # Positive-class score difference: s1 - s0 = a ln s - b ln(1-s) + c.
    return BetaParams(
        a=float(W[1, 1] - W[0, 1]),
        b=float(W[0, 0] - W[1, 0]),
        c=float(b[1] - b[0]),
    )


_BINARY_FITTERS = {
    "isotonic": lambda s, y, cfg: fit_isotonic(s, y),
    "width_bin": lambda s, y, cfg: fit_binning(s, y, cfg["bins"], "equal-width"),
    "freq_bin": lambda s, y, cfg: fit_binning(s, y, cfg["bins"], "equal-frequency"),
    "beta": lambda s, y, cfg: fit_beta(s, y, cfg.get("lam", 1e-10)),
}


def fit_ovr(probs, labels, kind: str, **config) -> OneVsRestModel:
    """Fit one binary calibrator per class on column j vs indicator(y == j)."""
    p = as_probability_matrix(probs)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (p.shape[0],):
        raise ValueError("labels must match the number of prediction rows")
    if kind not in _BINARY_FITTERS:
        raise ValueError(f"unknown one-vs-rest kind {kind!r}")
    fitter = _BINARY_FITTERS[kind]
    maps = [fitter(p[:, j], (y == j).astype(float), config) for j in range(p.shape[1])]
    return OneVsRestModel(kind=kind, maps=tuple(maps))


def apply_ovr(q, model: OneVsRestModel) -> np.ndarray:
    """Apply the per-class maps coordinate-wise and renormalize.

    If every coordinate maps to zero the row falls back to uniform.
    """
    single = np.asarray(q).ndim == 1
    p = as_probability_matrix(q)
    if p.shape[1] != model.k:
        raise ValueError(f"expected {model.k} classes, got {p.shape[1]}")
    raw = np.column_stack([model.maps[j].predict(p[:, j]) for j in range(model.k)])
    totals = raw.sum(axis=1)
    out = np.full_like(raw, 1.0 / model.k)
    nonzero = totals > 0.0
    out[nonzero] = raw[nonzero] / totals[nonzero, None]
    return out[0] if single else out
