"""Model-selection scores (MDC, OLS/Gaussian BIC) and test-set LFLOM.

Scores are maximized. Each family contributes ``-(dispersion_term +
penalty_term)``:

* MDC: dispersion_term = (N/alpha) log gamma_hat with gamma_hat the FLOM
  plug-in at order p and the constant C(p, alpha) dropped, which reduces to
  (N/p) log mean|Z|^p; penalty_term = |Pa|/2 log N.
* log-norm OLS (``s_ols``): dispersion_term = log ||Z - mean(Z)||_2.
* Gaussian BIC (``s_gaussian_bic``): exact maximized Gaussian log-likelihood,
  dispersion_term = N/2 (log(2 pi sigma^2) + 1) with sigma^2 = ||Z - mean(Z)||^2 / N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lp_regression import RegressionProblem, irls, ols_solve
from .model import DataMatrix, SGModel, _family_residual

SCORE_KINDS = ("mdc", "ols")


class DegenerateFitError(ValueError):
    """A residual with zero spread (perfect fit) has an unbounded score."""


@dataclass(frozen=True)
class FamilyTerm:
    node: str
    parents: tuple
    dispersion_term: float
    penalty_term: float

    @property
    def score(self) -> float:
        return -(self.dispersion_term + self.penalty_term)


@dataclass(frozen=True)
class ScoreReport:
    total: float
    per_family: tuple
    score_kind: str
    p_used: float
    n: int

    def rows(self):
        for f in self.per_family:
            yield (f.node, ";".join(f.parents), f.dispersion_term, f.penalty_term, f.score)
        yield ("TOTAL", "", sum(f.dispersion_term for f in self.per_family),
               sum(f.penalty_term for f in self.per_family), self.total)


REPORT_COLUMNS = ("node", "parents", "dispersion_term", "penalty_term", "family_score")


def default_p(alpha: float, divisor: float = 1.01) -> float:
    return alpha / divisor


def penalty(n_parents: int, n: int) -> float:
    return n_parents / 2.0 * math.log(n)


def mdc_dispersion(resid: np.ndarray, p: float) -> float:
    n = resid.size
    moment = float(np.mean(np.abs(resid) ** p))
    if not moment > 0:
        raise DegenerateFitError("residual has zero fractional moment")
    return n / p * math.log(moment)


def _centered_norm(resid: np.ndarray) -> float:
    norm = float(np.linalg.norm(resid - resid.mean()))
    if not norm > 0:
        raise DegenerateFitError("residual has zero spread")
    return norm


def ols_eq_dispersion(resid: np.ndarray) -> float:
    return math.log(_centered_norm(resid))


def gaussian_dispersion(resid: np.ndarray) -> float:
    n = resid.size
    var = _centered_norm(resid) ** 2 / n
    return n / 2.0 * (math.log(2.0 * math.pi * var) + 1.0)


@dataclass(frozen=True)
class FamilyFit:
    child: int
    parents: tuple
    weights: tuple
    score: float


def fit_family(values: np.ndarray, child: int, parents, alpha: float, p: float,
               kind: str = "mdc", tolerance: float = 1e-6, max_iterations: int = 100) -> FamilyFit:
    """Fit weights for one family and return its penalized score.

    ``kind="mdc"`` fits by IRLS at exponent ``p`` and scores by log dispersion;
    ``kind="ols"`` fits by OLS with an intercept and scores with the Gaussian BIC term.
    Raises :class:`~stablegm.lp_regression.RankDeficientError` for collinear
    parent sets.
    """
    parents = tuple(sorted(parents))
    y = values[:, child]
    n = y.size
    if n == 0:
        raise ValueError("empty data")
    if parents:
        x = values[:, list(parents)]
        if kind == "mdc":
            result = irls(RegressionProblem(x, y, p, tolerance, max_iterations))
        else:
            # centering is the intercept, so weights and variance are the joint Gaussian MLE
            result = ols_solve(RegressionProblem(x - x.mean(axis=0), y - y.mean()))
        weights = tuple(float(w) for w in result.coefficients)
    else:
        weights = ()
    resid = _family_residual(values, child, parents, weights)
    spread = resid if kind == "mdc" else resid - resid.mean()
    if parents and np.max(np.abs(spread)) <= 1e-12 * np.max(np.abs(y)):
        raise DegenerateFitError(f"column {child} is an exact linear function of {parents}")
    if kind == "mdc":
        disp = mdc_dispersion(resid, p)
    elif kind == "ols":
        disp = gaussian_dispersion(resid)
    else:
        raise ValueError(f"unknown score kind {kind!r}")
    return FamilyFit(child, parents, weights, -(disp + penalty(len(parents), n)))


def family_score(child: int, parents, data: DataMatrix, alpha: float, p: float) -> float:
    """MDC family score with weights refit by IRLS at exponent ``p``."""
    if not -1.0 < p < alpha:
        raise ValueError(f"p must lie in (-1, alpha), got {p}")
    if data.n == 0:
        raise ValueError("empty data")
    return fit_family(data.values, child, parents, alpha, p, "mdc").score


def _report(model: SGModel, data: DataMatrix, kind: str, p: float, dispersion) -> ScoreReport:
    x = data.aligned_to(model.names)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty data")
    terms = []
    for j, (pa, w) in enumerate(zip(model.dag.parent_sets, model.weights)):
        resid = _family_residual(x, j, pa, w)
        terms.append(
            FamilyTerm(model.names[j], tuple(model.names[k] for k in pa), dispersion(resid), penalty(len(pa), n))
        )
    total = 0.0
    for t in terms:
        total += t.score
    return ScoreReport(total, tuple(terms), kind, p, n)


def s_mdc(model: SGModel, data: DataMatrix, p: float | None = None) -> ScoreReport:
    """Penalized dispersion score at the model's weights (no refit)."""
    if p is None:
        p = default_p(model.alpha)
    if not -1.0 < p < model.alpha or p == 0:
        raise ValueError(f"p must lie in (-1, alpha) and be nonzero, got {p}")
    return _report(model, data, "mdc", p, lambda r: mdc_dispersion(r, p))


def s_ols(model: SGModel, data: DataMatrix) -> ScoreReport:
    """OLS-based penalized score with the log of the centered residual l2 norm."""
    return _report(model, data, "ols-lognorm", 2.0, ols_eq_dispersion)


def s_gaussian_bic(model: SGModel, data: DataMatrix) -> ScoreReport:
    """Exact Gaussian BIC at the model's weights (residual variance by MLE)."""
    return _report(model, data, "ols", 2.0, gaussian_dispersion)


def score_model(model: SGModel, data: DataMatrix, kind: str, p: float | None = None) -> ScoreReport:
    if kind == "mdc":
        return s_mdc(model, data, p)
    if kind == "ols":
        return s_gaussian_bic(model, data)
    if kind == "ols-lognorm":
        return s_ols(model, data)
    raise ValueError(f"unknown score kind {kind!r}")


def lflom_terms(model: SGModel, test: DataMatrix, p: float) -> np.ndarray:
    """Per-node (1/p) log mean |Z_i|^p on ``test``."""
    if not 0 < p < model.alpha:
        raise ValueError(f"p must lie in (0, alpha), got {p}")
    x = test.aligned_to(model.names)
    out = np.empty(model.d)
    for j, (pa, w) in enumerate(zip(model.dag.parent_sets, model.weights)):
        resid = _family_residual(x, j, pa, w)
        out[j] = math.log(float(np.mean(np.abs(resid) ** p))) / p
    return out


def lflom(model: SGModel, test: DataMatrix, p: float) -> float:
    """Log fractional lower-order moment summed over nodes (smaller is better)."""
    return float(sum(lflom_terms(model, test, p)))
