"""Logit-space calibrators: temperature, vector and matrix scaling.

Temperature scaling rescales the whole logit vector by one positive factor;
vector scaling learns a per-class factor and intercept; matrix scaling
learns a full affine map. Matrix scaling is fitted with the
off-diagonal/intercept penalty (the diagonal stays free), and an ablation
helper zeroes the fitted off-diagonal entries. Temperature scaling can be
expressed exactly as a Dirichlet map on probabilities, which is also
implemented here.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .core import as_logit_matrix, softmax
from .dirichlet import LinearParams, OdirConfig, _hessian, _penalty_matrices, _value_grad
from .optim import minimize, minimize_scalar

#: Search bounds for the fitted temperature.
T_MIN = 1e-2
T_MAX = 1e2


@dataclass(frozen=True)
class TemperatureParams:
    t: float

    def __post_init__(self):
        if not (self.t > 0.0 and np.isfinite(self.t)):
            raise ValueError("temperature must be a positive finite number")


@dataclass(frozen=True)
class AffineLogitParams:
    """Weights of softmax(W z + b); vector-scaling fits keep W diagonal."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("W must be square")
        if b.shape != (W.shape[0],):
            raise ValueError("b must have length k")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.W.shape[0]


def _as_temperature(params) -> float:
    t = params.t if isinstance(params, TemperatureParams) else float(params)
    if t <= 0.0:
        raise ValueError("temperature must be positive")
    return t


def apply_temperature(z, params) -> np.ndarray:
    """Row-wise softmax(z / t)."""
    t = _as_temperature(params)
    single = np.asarray(z).ndim == 1
    z = as_logit_matrix(z)
    out = softmax(z / t, axis=1)
    return out[0] if single else out


def fit_temperature(z, labels, t_min: float = T_MIN, t_max: float = T_MAX,
                    tol: float = 1e-10) -> TemperatureParams:
    """Pick the temperature minimizing mean log-loss on held-out logits.

    The search runs over log t on [t_min, t_max]; a fit landing on a bound
    triggers a warning, since the data wanted unbounded sharpening (every
    prediction correct) or flattening (predictions uninformative).
    """
    z = as_logit_matrix(z)
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (z.shape[0],):
        raise ValueError("labels must match the number of logit rows")
    if np.unique(y).size < 2:
        raise ValueError("labels contain a single class; nothing to fit")
    rows = np.arange(z.shape[0])

    def loss_at_log_t(log_t):
        scaled = z / np.exp(log_t)
        shifted = scaled - scaled.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        return -(shifted[rows, y] - log_norm).mean()

    lo, hi = np.log(t_min), np.log(t_max)
    best = minimize_scalar(loss_at_log_t, lo, hi, tol=tol)
    if min(best - lo, hi - best) < 1e-6 * (hi - lo):
        warnings.warn(
            f"fitted temperature {np.exp(best):g} sits on the search bound "
            f"[{t_min:g}, {t_max:g}]",
            RuntimeWarning,
            stacklevel=2,
        )
    return TemperatureParams(t=float(np.exp(np.clip(best, lo, hi))))


def temperature_as_dirichlet(params, k: int) -> LinearParams:
    """Temperature scaling as a Dirichlet map: W = (1/t) I, b = 0.

    Applying the returned map to softmax(z) reproduces softmax(z / t)
    exactly, for any logits z with k classes.
    """
    t = _as_temperature(params)
    return LinearParams(W=np.eye(k) / t, b=np.zeros(k))


# ---------------------------------------------------------------------------
# Vector and matrix scaling
# ---------------------------------------------------------------------------

def _vector_value_grad(theta, z, onehot, pen_b):
    n, k = onehot.shape
    d, b = theta[:k], theta[k:]
    scores = z * d + b
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - log_norm[:, None]
    value = -(logp[np.arange(n), onehot.argmax(axis=1)]).mean() + float((pen_b * b * b).sum())
    resid = (np.exp(logp) - onehot) / n
    grad_d = (resid * z).sum(axis=0)
    grad_b = resid.sum(axis=0) + 2.0 * pen_b * b
    return value, np.concatenate([grad_d, grad_b])


def _vector_hessian(theta, z, pen_b):
    n, k = z.shape
    d, b = theta[:k], theta[k:]
    P = softmax(z * d + b, axis=1)
    pz = P * z
    h_dd = np.diag((pz * z).sum(axis=0)) - pz.T @ pz
    h_db = np.diag(pz.sum(axis=0)) - pz.T @ P
    h_bb = np.diag(P.sum(axis=0)) - P.T @ P
    H = np.block([[h_dd, h_db], [h_db.T, h_bb]]) / n
    H[np.diag_indices_from(H)] += np.concatenate([np.zeros(k), 2.0 * pen_b])
    return H


def fit_affine_logit(z, labels, mode: str = "matrix",
                     reg: OdirConfig = OdirConfig(0.0, 0.0),
                     tol: float = 1e-8, max_iter: int = 500) -> AffineLogitParams:
    """Fit softmax(W z + b) by penalized maximum likelihood.

    Parameters
    ----------
    z : array_like, shape (n, k)
        Logit rows.
    labels : array_like, shape (n,)
        Integer class labels.
    mode : {"matrix", "vector"}
        ``vector`` restricts W to its diagonal, which makes the
        off-diagonal penalty term vacuous; the intercept penalty ``mu``
        still applies.
    reg : OdirConfig
        Off-diagonal weight ``lam`` and intercept weight ``mu``.

    Both modes start from the identity (W = I, b = 0) and use Newton steps
    with a backtracking line search.
    """
    z = as_logit_matrix(z)
    n, k = z.shape
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (n,):
        raise ValueError("labels must match the number of logit rows")
    if n < k:
        raise ValueError(f"need at least k={k} instances, got {n}")
    if np.unique(y).size < 2:
        raise ValueError("labels contain a single class; nothing to fit")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), y] = 1.0

    if mode == "matrix":
        pen_w, pen_b = _penalty_matrices(reg, k)
        theta0 = np.concatenate([np.eye(k).ravel(), np.zeros(k)])
        result = minimize(
            lambda t: _value_grad(t, z, onehot, pen_w, pen_b),
            theta0,
            hess=lambda t: _hessian(t, z, pen_w, pen_b),
            tol=tol,
            max_iter=max_iter,
        )
        W = result.params[: k * k].reshape(k, k)
        b = result.params[k * k :]
    elif mode == "vector":
        pen_b = np.full(k, reg.mu / k)
        theta0 = np.concatenate([np.ones(k), np.zeros(k)])
        result = minimize(
            lambda t: _vector_value_grad(t, z, onehot, pen_b),
            theta0,
            hess=lambda t: _vector_hessian(t, z, pen_b),
            tol=tol,
            max_iter=max_iter,
        )
        W = np.diag(result.params[:k])
        b = result.params[k:]
    else:
        raise ValueError(f"mode must be 'matrix' or 'vector', got {mode!r}")

    if not result.converged:
        warnings.warn(
            f"scaling fit ({mode}) stopped at gradient norm {result.gradient_norm:.2e} "
            f"after {result.iterations} iterations",
            RuntimeWarning,
            stacklevel=2,
        )
    return AffineLogitParams(W=W, b=b)


def apply_affine_logit(z, params: AffineLogitParams) -> np.ndarray:
    """Row-wise softmax(W z + b)."""
    single = np.asarray(z).ndim == 1
    z = as_logit_matrix(z)
    if z.shape[1] != params.k:
        raise ValueError(f"expected {params.k} classes, got {z.shape[1]}")
    out = softmax(z @ params.W.T + params.b, axis=1)
    return out[0] if single else out


def zero_offdiagonal(params: AffineLogitParams) -> AffineLogitParams:
    """Copy with off-diagonal weights set to zero (diagonal and b kept)."""
    return AffineLogitParams(W=np.diag(np.diag(params.W)), b=params.b.copy())
