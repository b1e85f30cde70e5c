"""Deterministic convex minimization used by the fitted calibrators.

Two routines: a multivariate descent with optional Newton steps and Armijo
backtracking, and a bounded golden-section search for one-dimensional
problems. Both are free of randomness, so repeated runs on identical inputs
produce bit-identical results.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

#: Armijo sufficient-decrease constant.
ARMIJO_C = 1e-4
#: Backtracking shrink factor for the line search.
BACKTRACK = 0.5
#: Newton steps are attempted only up to this parameter dimension.
NEWTON_DIM_LIMIT = 2500

_MAX_BACKTRACKS = 60
_JITTERS = (1e-10, 1e-8, 1e-6, 1e-4)


class OptimizationError(RuntimeError):
    """Raised when the objective or gradient turns non-finite.

    Carries the last finite iterate in ``last_params``.
    """

    def __init__(self, message: str, last_params: Optional[np.ndarray] = None):
        super().__init__(message)
        self.last_params = last_params


@dataclass
class OptimResult:
    params: np.ndarray
    final_value: float
    iterations: int
    gradient_norm: float
    converged: bool


def _newton_direction(hessian: np.ndarray, grad: np.ndarray) -> Optional[np.ndarray]:
    """Solve H d = -g by Cholesky, retrying with diagonal jitter.

    Returns None when the Hessian cannot be factored even after jitter
    (caller falls back to a gradient step).
    """
    diag_scale = float(np.mean(np.abs(np.diag(hessian))))
    if not np.isfinite(diag_scale) or diag_scale == 0.0:
        diag_scale = 1.0
    for jitter in (0.0,) + _JITTERS:
        try:
            h = hessian if jitter == 0.0 else hessian + (jitter * diag_scale) * np.eye(len(grad))
            c, low = scipy.linalg.cho_factor(h, check_finite=False)
            return scipy.linalg.cho_solve((c, low), -grad, check_finite=False)
        except (scipy.linalg.LinAlgError, ValueError):
            continue
    return None


def minimize(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0,
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> OptimResult:
    """Minimize a smooth convex objective.

    Parameters
    ----------
    fun : callable
        Maps a parameter vector to ``(value, gradient)``.
    x0 : array_like
        Starting point.
    hess : callable, optional
        Maps a parameter vector to the Hessian matrix. When given and the
        dimension is at most ``NEWTON_DIM_LIMIT``, Newton steps are used;
        otherwise plain gradient steps.
    tol : float
        Convergence threshold on the gradient infinity-norm.
    max_iter : int
        Iteration cap.

    Notes
    -----
    Every accepted step satisfies the Armijo condition with constant
    ``ARMIJO_C``, so the objective is non-increasing across iterations.
    If a Newton solve fails (Hessian not positive definite) the step falls
    back to the negative gradient.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        x = x.ravel()
    use_newton = hess is not None and x.size <= NEWTON_DIM_LIMIT

    value, grad = fun(x)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise OptimizationError("objective non-finite at starting point", last_params=None)

    iterations = 0
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    for _ in range(max_iter):
        if gnorm <= tol:
            break
        direction = None
        if use_newton:
            direction = _newton_direction(hess(x), grad)
        if direction is None or float(direction @ grad) >= 0.0:
            direction = -grad

        slope = float(grad @ direction)
        step = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = x + step * direction
            cand_value, cand_grad = fun(candidate)
            if (
                np.isfinite(cand_value)
                and np.all(np.isfinite(cand_grad))
                and cand_value <= value + ARMIJO_C * step * slope
            ):
                accepted = True
                break
            step *= BACKTRACK
        if not accepted:
            # No further progress possible at floating-point resolution.
            break
        x, value, grad = candidate, cand_value, cand_grad
        gnorm = float(np.max(np.abs(grad)))
        iterations += 1

    return OptimResult(
        params=x,
        final_value=float(value),
        iterations=iterations,
        gradient_norm=gnorm,
        converged=bool(gnorm <= tol),
    )


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def minimize_scalar(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-8) -> float:
    """Golden-section search for the minimum of a unimodal f on [lo, hi].

    Ties between the two probe values keep the lower bracket, so a flat
    stretch of minima (e.g. a loss saturated at floating-point resolution)
    resolves to its smallest argmin.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)
