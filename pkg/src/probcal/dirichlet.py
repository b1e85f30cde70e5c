"""The Dirichlet calibration map family.

A Dirichlet calibration map transforms a probability vector q on the
(k-1)-simplex into another one. The family has three equivalent
parametrizations, each useful for a different purpose:

* generative ``(alpha, pi)`` -- per-class Dirichlet densities combined by
  Bayes' rule: ``(pi_1 f_1(q), ..., pi_k f_k(q)) / z``;
* linear ``(W, b)`` -- ``softmax(W ln q + b)``, the form used for fitting
  (it is multinomial logistic regression on log-probabilities);
* canonical ``(A, c)`` -- ``softmax(A ln(q / (1/k)) + ln c)`` with A
  nonnegative and a zero in every column; the unique, interpretable form.

Conversions between the three are exact and implemented below, together
with map application, penalized maximum-likelihood fitting, and the k+1
interpretation points of the canonical form.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import ROW_SUM_TOL, log_transform, softmax
from .optim import minimize


# ---------------------------------------------------------------------------
# Parametrizations
# ---------------------------------------------------------------------------

def _check_square(M, name):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 2:
        raise ValueError(f"{name} must be a square k x k matrix with k >= 2")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_simplex_vector(v, k, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (k,):
        raise ValueError(f"{name} must have length {k}")
    if np.any(v < 0.0) or abs(v.sum() - 1.0) > ROW_SUM_TOL:
        raise ValueError(f"{name} must be a probability vector")
    return v


@dataclass(frozen=True)
class LinearParams:
    """Weights of the fitting form softmax(W ln q + b)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = _check_square(self.W, "W")
        b = np.asarray(self.b, dtype=float)
        if b.shape != (W.shape[0],) or not np.all(np.isfinite(b)):
            raise ValueError("b must be a finite vector of length k")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class CanonicalParams:
    """Unique form softmax(A ln(kq) + ln c): A >= 0 with a zero per column."""

    A: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = _check_square(self.A, "A")
        if np.any(A < -1e-12):
            raise ValueError("A must be entrywise nonnegative")
        if np.any(A.min(axis=0) > 1e-12):
            raise ValueError("every column of A must contain a zero entry")
        c = _check_simplex_vector(self.c, A.shape[0], "c")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def k(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class GenerativeParams:
    """Per-class Dirichlet parameters (row j of alpha) and class priors pi."""

    alpha: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        alpha = _check_square(self.alpha, "alpha")
        if np.any(alpha <= 0.0):
            raise ValueError("alpha entries must be strictly positive")
        pi = _check_simplex_vector(self.pi, alpha.shape[0], "pi")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "pi", pi)

    @property
    def k(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class L2Config:
    """Uniform squared penalty lam * mean of all squared parameters."""

    lam: float
    include_intercept: bool = True

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class OdirConfig:
    """Off-diagonal and intercept penalty weights; the diagonal stays free."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.lam < 0.0 or self.mu < 0.0:
            raise ValueError("penalty weights must be nonnegative")


# ---------------------------------------------------------------------------
# Map application
# ---------------------------------------------------------------------------

def _apply_scores(q, weight, offset):
    """softmax(weight @ ln(q_row) + offset) for each row of q."""
    single = np.asarray(q).ndim == 1
    lnq = log_transform(q)
    if lnq.ndim == 1:
        lnq = lnq[None, :]
    if lnq.shape[1] != weight.shape[0]:
        raise ValueError(f"expected {weight.shape[0]} classes, got {lnq.shape[1]}")
    out = softmax(lnq @ weight.T + offset, axis=1)
    return out[0] if single else out


def apply_linear(q, params: LinearParams) -> np.ndarray:
    """Apply softmax(W ln q + b) to one or many probability rows."""
    return _apply_scores(q, params.W, params.b)


def apply_canonical(q, params: CanonicalParams) -> np.ndarray:
    """Apply softmax(A ln(q/(1/k)) + ln c); the simplex centre maps to c."""
    k = params.k
    if np.any(params.c <= 0.0):
        raise ValueError("c contains zero entries; the canonical offset ln c is undefined")
    # A ln(kq) + ln c  ==  A ln q + (ln k * rowsum(A) + ln c)
    offset = np.log(float(k)) * params.A.sum(axis=1) + np.log(params.c)
    return _apply_scores(q, params.A, offset)


def apply_generative(q, params: GenerativeParams) -> np.ndarray:
    """Apply (pi_1 f_1(q), ..., pi_k f_k(q)) / z with Dirichlet densities f_j.

    Densities are evaluated in log space via log-gamma, so very peaked
    parameter rows stay finite.
    """
    single = np.asarray(q).ndim == 1
    lnq = log_transform(q)
    if lnq.ndim == 1:
        lnq = lnq[None, :]
    if lnq.shape[1] != params.k:
        raise ValueError(f"expected {params.k} classes, got {lnq.shape[1]}")
    # log f_j(q) = sum_i (alpha_ji - 1) ln q_i - ln B(alpha_j)
    log_dens = lnq @ (params.alpha - 1.0).T - _log_beta(params.alpha)
    with np.errstate(divide="ignore"):
        log_post = log_dens + np.log(params.pi)
    if np.any(np.isnan(log_post)):
        raise ValueError("non-finite Dirichlet density")
    out = softmax(log_post, axis=1)
    return out[0] if single else out


def _log_beta(alpha: np.ndarray) -> np.ndarray:
    """Log multivariate beta function of each row."""
    return gammaln(alpha).sum(axis=-1) - gammaln(alpha.sum(axis=-1))


# ---------------------------------------------------------------------------
# Conversions (the three parametrizations contain exactly the same maps)
# ---------------------------------------------------------------------------

def from_generative(params: GenerativeParams) -> LinearParams:
    """Convert (alpha, pi) to the linear form: W = alpha - 1, b_i = ln pi_i - ln B(alpha_i)."""
    if np.any(params.pi <= 0.0):
        raise ValueError("pi contains zero entries; ln pi is undefined")
    W = params.alpha - 1.0
    b = np.log(params.pi) - _log_beta(params.alpha)
    return LinearParams(W=W, b=b)


def to_canonical(params: LinearParams) -> CanonicalParams:
    """Convert (W, b) to the unique canonical form.

    a_ij = w_ij - min_i w_ij (column minima become exact zeros) and
    c = softmax(W ln u + b) at the simplex centre u = (1/k, ..., 1/k).
    """
    k = params.k
    A = params.W - params.W.min(axis=0, keepdims=True)
    c = softmax(np.log(1.0 / k) * params.W.sum(axis=1) + params.b)
    return CanonicalParams(A=A, c=c)


def to_generative(params: CanonicalParams) -> GenerativeParams:
    """Convert (A, c) to the generative form.

    alpha = A + 1; the intermediate intercept is b = ln c - A ln u; priors
    are pi_i proportional to exp(b_i) B(alpha_i), renormalized (the map is
    invariant to the scale of pi).
    """
    if np.any(params.c <= 0.0):
        raise ValueError("c contains zero entries; ln c is undefined")
    k = params.k
    alpha = params.A + 1.0
    b = np.log(params.c) - np.log(1.0 / k) * params.A.sum(axis=1)
    pi = softmax(b + _log_beta(alpha))
    return GenerativeParams(alpha=alpha, pi=pi)


# ---------------------------------------------------------------------------
# Fitting: penalized multinomial logistic regression on log-probabilities
# ---------------------------------------------------------------------------

def _penalty_matrices(reg, k: int):
    """Per-entry quadratic penalty weights for W (k x k) and b (k,)."""
    if isinstance(reg, L2Config):
        count = k * k + (k if reg.include_intercept else 0)
        pen_w = np.full((k, k), reg.lam / count)
        pen_b = np.full(k, reg.lam / count if reg.include_intercept else 0.0)
    elif isinstance(reg, OdirConfig):
        pen_w = np.full((k, k), reg.lam / (k * (k - 1)))
        np.fill_diagonal(pen_w, 0.0)
        pen_b = np.full(k, reg.mu / k)
    else:
        raise TypeError(f"reg must be L2Config or OdirConfig, got {type(reg).__name__}")
    return pen_w, pen_b


def _value_grad(theta, feats, onehot, pen_w, pen_b):
    n, k = onehot.shape
    W = theta[: k * k].reshape(k, k)
    b = theta[k * k :]
    scores = feats @ W.T + b
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - log_norm[:, None]
    value = -(logp[np.arange(n), onehot.argmax(axis=1)]).mean()
    value += float((pen_w * W * W).sum() + (pen_b * b * b).sum())
    resid = (np.exp(logp) - onehot) / n
    grad_w = resid.T @ feats + 2.0 * pen_w * W
    grad_b = resid.sum(axis=0) + 2.0 * pen_b * b
    return value, np.concatenate([grad_w.ravel(), grad_b])


def _hessian(theta, feats, pen_w, pen_b):
    n = feats.shape[0]
    k = pen_b.shape[0]
    W = theta[: k * k].reshape(k, k)
    b = theta[k * k :]
    P = softmax(feats @ W.T + b, axis=1)
    faug = np.hstack([feats, np.ones((n, 1))])  # (n, k+1)
    # Class-block layout: parameter block a is (W[a, :], b_a).
    V = (P[:, :, None] * faug[:, None, :]).reshape(n, k * (k + 1))
    H = -(V.T @ V)
    for a in range(k):
        s = a * (k + 1)
        H[s : s + k + 1, s : s + k + 1] += faug.T @ (faug * P[:, a : a + 1])
    H /= n
    # Reorder into the [vec(W), b] layout used by the objective.
    perm = np.empty(k * (k + 1), dtype=int)
    for a in range(k):
        perm[a * k : (a + 1) * k] = np.arange(a * (k + 1), a * (k + 1) + k)
        perm[k * k + a] = a * (k + 1) + k
    H = H[np.ix_(perm, perm)]
    diag_pen = np.concatenate([2.0 * pen_w.ravel(), 2.0 * pen_b])
    H[np.diag_indices_from(H)] += diag_pen
    return H


def _prepare(probs, labels):
    feats = log_transform(probs)
    if feats.ndim == 1:
        feats = feats[None, :]
    n, k = feats.shape
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError("labels must match the number of prediction rows")
    if y.size and (y.min() < 0 or y.max() >= k):
        raise ValueError(f"labels must lie in [0, {k - 1}]")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0
    return feats, onehot


def objective_and_gradient(params: LinearParams, probs, labels, reg):
    """Penalized mean log-loss of apply_linear and its analytic gradient.

    The gradient is taken over all k^2 + k parameters in [vec(W), b] order
    and matches central finite differences to high relative accuracy.
    """
    feats, onehot = _prepare(probs, labels)
    pen_w, pen_b = _penalty_matrices(reg, params.k)
    theta = np.concatenate([params.W.ravel(), params.b])
    return _value_grad(theta, feats, onehot, pen_w, pen_b)


def fit(probs, labels, reg, tol: float = 1e-8, max_iter: int = 500) -> LinearParams:
    """Fit a Dirichlet calibration map by penalized maximum likelihood.

    Parameters
    ----------
    probs : array_like, shape (n, k)
        Uncalibrated probability rows, already clipped strictly positive.
    labels : array_like, shape (n,)
        Integer class labels.
    reg : L2Config or OdirConfig
        Penalty scheme. L2 spreads one weight over all parameters; the
        off-diagonal/intercept scheme leaves the diagonal of W free.
    tol, max_iter : float, int
        Convergence threshold (gradient infinity-norm) and iteration cap.

    Returns
    -------
    LinearParams
        Starts from the identity map (W = I, b = 0); the objective is
        convex, so the start affects speed only.
    """
    feats, onehot = _prepare(probs, labels)
    n, k = onehot.shape
    if n < k:
        raise ValueError(f"need at least k={k} instances, got {n}")
    if np.unique(np.argmax(onehot, axis=1)).size < 2:
        raise ValueError("labels contain a single class; nothing to fit")
    pen_w, pen_b = _penalty_matrices(reg, k)
    theta0 = np.concatenate([np.eye(k).ravel(), np.zeros(k)])
    result = minimize(
        lambda t: _value_grad(t, feats, onehot, pen_w, pen_b),
        theta0,
        hess=lambda t: _hessian(t, feats, pen_w, pen_b),
        tol=tol,
        max_iter=max_iter,
    )
    if not result.converged:
        warnings.warn(
            f"calibration fit stopped at gradient norm {result.gradient_norm:.2e} "
            f"after {result.iterations} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    W = result.params[: k * k].reshape(k, k)
    b = result.params[k * k :]
    return LinearParams(W=W, b=b)


# ---------------------------------------------------------------------------
# Interpretation points
# ---------------------------------------------------------------------------

def interpretation_points(params: CanonicalParams, epsilon: float = 1e-6):
    """The k+1 probe points of a canonical map and their images.

    The first k points sit just inside the facet centres: point j has
    ``epsilon`` at coordinate j and (1 - epsilon)/(k - 1) elsewhere; as
    epsilon shrinks, its image approaches (eps^a_1j, ..., eps^a_kj)/z_j,
    i.e. column j of A alone determines the behaviour there. The last
    point is the simplex centre, whose image is exactly c.

    Returns a list of ``(point, image)`` pairs of length k + 1.
    """
    k = params.k
    if not (0.0 < epsilon < 1.0 / k):
        raise ValueError(f"epsilon must lie in (0, 1/k); got {epsilon}")
    pairs = []
    for j in range(k):
        point = np.full(k, (1.0 - epsilon) / (k - 1))
        point[j] = epsilon
        pairs.append((point, apply_canonical(point, params)))
    centre = np.full(k, 1.0 / k)
    pairs.append((centre, apply_canonical(centre, params)))
    return pairs
