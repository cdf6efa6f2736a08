"""Least l_p-norm linear regression by iteratively re-weighted least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: condition number above which a design is treated as rank deficient
MAX_CONDITION = 1e10


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"design matrix is rank deficient (condition estimate {condition:.3g})")


@dataclass(frozen=True)
class RegressionProblem:
    design: np.ndarray
    response: np.ndarray
    p: float = 2.0
    tolerance: float = 1e-6
    max_iterations: int = 100

    def __post_init__(self):
        x = np.asarray(self.design, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.response, dtype=float).ravel()
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "response", y)
        n, m = x.shape
        if y.size != n:
            raise ValueError(f"response has {y.size} rows, design has {n}")
        if not n > m >= 1:
            raise ValueError(f"need N > M >= 1, got N={n}, M={m}")
        if not 0.0 < self.p <= 2.0:
            raise ValueError(f"p must lie in (0, 2], got {self.p}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class RegressionResult:
    coefficients: np.ndarray
    lp_norm: float
    iterations: int
    converged: bool
    #: l_p objective (sum |r|^p) after initialization and after each pass
    objective_history: tuple = ()


def lp_norm(residuals, p: float) -> float:
    """(sum |r|^p)^(1/p)."""
    if not p > 0:
        raise ValueError("p must be positive")
    r = np.abs(np.asarray(residuals, dtype=float))
    return float(np.sum(r ** p) ** (1.0 / p))


def _lstsq(x: np.ndarray, y: np.ndarray, check_rank: bool) -> np.ndarray:
    coef, _, rank, sv = np.linalg.lstsq(x, y, rcond=None)
    if check_rank:
        cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
        if cond > MAX_CONDITION or rank < x.shape[1]:
            raise RankDeficientError(float(cond))
    return coef


def ols_solve(problem: RegressionProblem) -> RegressionResult:
    x, y = problem.design, problem.response
    coef = _lstsq(x, y, check_rank=True)
    return RegressionResult(coef, lp_norm(y - x @ coef, 2.0), 1, True)


def wls_solve(problem: RegressionProblem, weights) -> RegressionResult:
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != problem.response.size:
        raise ValueError("one weight per row is required")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")
    x, y = problem.design, problem.response
    s = np.sqrt(w)
    coef = _lstsq(x * s[:, None], y * s, check_rank=False)
    return RegressionResult(coef, lp_norm(y - x @ coef, problem.p), 1, True)


def irls(problem: RegressionProblem) -> RegressionResult:
    """Minimize ||y - X w||_p starting from the OLS solution.

    Each pass solves a weighted least-squares problem with row weights
    |r|^(p-2). Residual magnitudes are floored at 1e-8 times the median
    absolute response so exact fits do not divide by zero. Iteration stops
    once ||w_new - w|| < tolerance * ||w||. The iterate with
    the smallest objective is returned, which matters for p < 1 where the
    iteration can oscillate.
    """
    x, y, p = problem.design, problem.response, problem.p
    w = _lstsq(x, y, check_rank=True)
    r = y - x @ w
    best_obj = float(np.sum(np.abs(r) ** p))
    best_w = w
    history = [best_obj]
    scale = float(np.median(np.abs(y)))
    if scale == 0:
        scale = float(np.mean(np.abs(y))) or 1.0
    floor = 1e-8 * scale
    converged = False
    it = 0
    while it < problem.max_iterations:
        it += 1
        s = np.maximum(np.abs(r), floor) ** ((p - 2.0) / 2.0)
        w_new = _lstsq(x * s[:, None], y * s, check_rank=False)
        r = y - x @ w_new
        obj = float(np.sum(np.abs(r) ** p))
        history.append(obj)
        if obj < best_obj:
            best_obj, best_w = obj, w_new
        step = float(np.linalg.norm(w_new - w))
        size = float(np.linalg.norm(w))
        w = w_new
        # relative step, so rescaling the response leaves the iterate count unchanged
        if step < problem.tolerance * size or step == 0.0:
            converged = True
            break
    return RegressionResult(best_w, best_obj ** (1.0 / p), it, converged, tuple(history))
