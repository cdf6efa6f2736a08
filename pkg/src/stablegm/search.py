"""Structure search: greedy K2 under an ordering, ordering-based search, driver."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .lp_regression import RankDeficientError
from .model import CycleError, Dag, DataMatrix, SGModel, _family_residual, symmetrize
from .scoring import SCORE_KINDS, DegenerateFitError, FamilyFit, fit_family
from .stable import beta_from_theta, estimate_alpha, estimate_gamma, estimate_theta, make_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    n_restarts: int = 10
    max_parents: int | None = None
    irls_p_divisor: float = 1.01
    report_p_divisor: float = 10.0
    tolerance: float = 1e-6
    seed: int = 0
    score_kind: str = "mdc"
    max_iterations: int = 100

    def __post_init__(self):
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        if not (self.irls_p_divisor > 1 and self.report_p_divisor > 1):
            raise ValueError("p divisors must exceed 1")
        if self.max_parents is not None and self.max_parents < 0:
            raise ValueError("max_parents must be non-negative")
        if self.score_kind not in SCORE_KINDS:
            raise ValueError(f"score_kind must be one of {SCORE_KINDS}")

    def as_dict(self) -> dict:
        return {
            "n_restarts": self.n_restarts,
            "max_parents": "none" if self.max_parents is None else self.max_parents,
            "irls_p_divisor": self.irls_p_divisor,
            "report_p_divisor": self.report_p_divisor,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "score_kind": self.score_kind,
            "max_iterations": self.max_iterations,
        }


@dataclass
class SearchTrace:
    restart_scores: list = field(default_factory=list)
    restart_orderings_visited: list = field(default_factory=list)
    orderings_visited: int = 0
    families_scored: int = 0
    alpha: float = float("nan")
    best_restart: int = -1

    @property
    def best_score(self) -> float:
        return max(self.restart_scores)

    def rows(self):
        for r, (s, v) in enumerate(zip(self.restart_scores, self.restart_orderings_visited)):
            yield (r, s, v, int(r == self.best_restart))


TRACE_COLUMNS = ("restart", "score", "orderings_visited", "best")


class FamilyCache:
    """Memoized family fits and per-node greedy parent choices for one data set.

    Fits are deterministic, so entries keyed by (child, parents) and by
    (child, admissible-predecessor set) can be reused across orderings and
    restarts.
    """

    def __init__(self, values: np.ndarray, alpha: float, config: SearchConfig):
        self.values = np.ascontiguousarray(values, dtype=float)
        self.alpha = alpha
        self.p = alpha / config.irls_p_divisor
        self.config = config
        self._fits = {}
        self._greedy = {}
        self.families_scored = 0

    def fit(self, child: int, parents: tuple):
        key = (child, parents)
        if key not in self._fits:
            self.families_scored += 1
            cfg = self.config
            try:
                res = fit_family(self.values, child, parents, self.alpha, self.p,
                                 cfg.score_kind, cfg.tolerance, cfg.max_iterations)
            except (RankDeficientError, DegenerateFitError):
                res = None
            self._fits[key] = res
        return self._fits[key]

    def best_family(self, child: int, predecessors: frozenset) -> FamilyFit:
        """Greedy forward selection of parents among ``predecessors``."""
        key = (child, predecessors)
        hit = self._greedy.get(key)
        if hit is not None:
            return hit
        best = self.fit(child, ())
        if best is None:
            raise DegenerateFitError(f"column {child} is constant")
        candidates = sorted(predecessors)
        limit = self.config.max_parents
        while limit is None or len(best.parents) < limit:
            base = best.parents
            step = None
            for k in candidates:
                if k in base:
                    continue
                f = self.fit(child, tuple(sorted(base + (k,))))
                if f is not None and f.score > (step or best).score:
                    step = f
            if step is None:
                break
            best = step
        self._greedy[key] = best
        return best


def _k2(cache: FamilyCache, ordering) -> tuple:
    fams = [None] * len(ordering)
    seen = set()
    for node in ordering:
        fams[node] = cache.best_family(node, frozenset(seen))
        seen.add(node)
    total = 0.0
    for f in fams:
        total += f.score
    return fams, total


def _swap(ordering, i):
    t = list(ordering)
    t[i], t[i + 1] = t[i + 1], t[i]
    return t


def _obs(cache: FamilyCache, ordering) -> tuple:
    sigma = list(ordering)
    fams, score = _k2(cache, sigma)
    visited = 1
    deltas = []
    for i in range(len(sigma) - 1):
        deltas.append(_k2(cache, _swap(sigma, i))[1] - score)
        visited += 1
    while deltas:
        a = int(np.argmax(deltas))
        if not deltas[a] > 0:
            break
        cand = _swap(sigma, a)
        cand_fams, cand_score = _k2(cache, cand)
        visited += 1
        if not cand_score > score:
            break
        sigma, fams, score = cand, cand_fams, cand_score
        for i in (a - 1, a, a + 1):
            if 0 <= i < len(deltas):
                deltas[i] = _k2(cache, _swap(sigma, i))[1] - score
                visited += 1
    return sigma, fams, score, visited


def _check_ordering(ordering, d):
    ordering = [int(k) for k in ordering]
    if sorted(ordering) != list(range(d)):
        raise ValueError("ordering must be a permutation of all columns")
    return ordering


def _assemble(names, alpha, fams, gammas, betas) -> SGModel:
    dag = Dag(tuple(names), tuple(f.parents for f in fams))
    noise = tuple((b, g, 0.0) for b, g in zip(betas, gammas))
    return SGModel(dag, alpha, tuple(f.weights for f in fams), noise)


def _report_gammas(values, fams, alpha, divisor) -> list:
    out = []
    for f in fams:
        resid = _family_residual(values, f.child, f.parents, f.weights)
        try:
            out.append(estimate_gamma(resid, alpha, alpha / divisor))
        except ValueError:
            out.append(np.finfo(float).tiny)
    return out


def k2_search(data: DataMatrix, ordering, alpha: float, config: SearchConfig = SearchConfig(),
              cache: FamilyCache | None = None) -> SGModel:
    """Best DAG consistent with ``ordering`` by greedy parent addition."""
    ordering = _check_ordering(ordering, data.d)
    cache = cache or FamilyCache(data.values, alpha, config)
    fams, _ = _k2(cache, ordering)
    gammas = _report_gammas(cache.values, fams, alpha, config.report_p_divisor)
    return _assemble(data.variable_names, alpha, fams, gammas, [0.0] * data.d)


def obs(data: DataMatrix, alpha: float, initial_ordering, config: SearchConfig = SearchConfig(),
        cache: FamilyCache | None = None) -> SGModel:
    """Local search over orderings by adjacent swaps, each scored with K2."""
    ordering = _check_ordering(initial_ordering, data.d)
    cache = cache or FamilyCache(data.values, alpha, config)
    _, fams, _, _ = _obs(cache, ordering)
    gammas = _report_gammas(cache.values, fams, alpha, config.report_p_divisor)
    return _assemble(data.variable_names, alpha, fams, gammas, [0.0] * data.d)


def global_alpha(sym: DataMatrix) -> float:
    """alpha from the row sums of symmetrized data (every projection shares alpha)."""
    return estimate_alpha(sym.values.sum(axis=1))


def stable_learn(raw: DataMatrix, config: SearchConfig = SearchConfig(),
                 already_symmetric: bool = False) -> tuple:
    """Symmetrize, estimate alpha, run OBS from random orderings, keep the best.

    Returns ``(model, trace)``. The model's gammas are FLOM estimates at
    p = alpha/report_p_divisor, halved to undo the doubling caused by
    symmetrization; betas come from signed moments of the raw residuals and
    locations are recorded as zero. With ``already_symmetric=True`` the input
    is used as is and no halving or skew estimation happens.
    """
    sym = raw if already_symmetric else symmetrize(raw)
    if sym.n < 2:
        raise ValueError(f"need at least 2 rows after symmetrization, got {sym.n}")
    alpha = global_alpha(sym)
    cache = FamilyCache(sym.values, alpha, config)
    trace = SearchTrace(alpha=alpha)
    best = None
    for r in range(config.n_restarts):
        rng = make_rng(config.seed + r)
        order = [int(k) for k in rng.permutation(sym.d)]
        _, fams, score, visited = _obs(cache, order)
        trace.restart_scores.append(score)
        trace.restart_orderings_visited.append(visited)
        trace.orderings_visited += visited
        if best is None or score > best[1]:
            best = (fams, score)
            trace.best_restart = r
        logger.debug("restart %d: score %.6f after %d orderings", r, score, visited)
    trace.families_scored = cache.families_scored
    fams = best[0]
    gammas = _report_gammas(sym.values, fams, alpha, config.report_p_divisor)
    if already_symmetric:
        betas = [0.0] * sym.d
    else:
        gammas = [g / 2.0 for g in gammas]
        betas = []
        for f in fams:
            resid = _family_residual(raw.values, f.child, f.parents, f.weights)
            betas.append(beta_from_theta(estimate_theta(resid, alpha), alpha))
    model = _assemble(sym.variable_names, alpha, fams, gammas, betas)
    return model, trace


def node_thetas(model: SGModel, raw: DataMatrix) -> list:
    """Signed-moment theta per node from residuals of unsymmetrized data."""
    x = raw.aligned_to(model.names)
    return [
        estimate_theta(_family_residual(x, j, pa, w), model.alpha)
        for j, (pa, w) in enumerate(zip(model.dag.parent_sets, model.weights))
    ]


def admissible(model: SGModel, ordering) -> bool:
    pos = {k: i for i, k in enumerate(ordering)}
    return all(pos[k] < pos[j] for j, pa in enumerate(model.dag.parent_sets) for k in pa)


def enumerate_dags(d: int):
    """Every DAG on ``d`` labelled nodes as a tuple of sorted parent tuples."""
    subsets = [
        [tuple(k for k in range(d) if k != j and mask >> k & 1) for mask in range(1 << d) if not mask >> j & 1]
        for j in range(d)
    ]
    names = tuple(str(k) for k in range(d))
    for combo in itertools.product(*subsets):
        try:
            Dag(names, combo)
        except CycleError:
            continue
        yield combo


def exhaustive_search(data: DataMatrix, alpha: float, config: SearchConfig = SearchConfig()) -> tuple:
    """Highest-scoring DAG by full enumeration; only sensible for d <= 4.

    Returns ``(model, score)``; ties go to the first DAG in enumeration order.
    """
    if data.d > 4:
        raise ValueError("exhaustive search is limited to 4 variables")
    cache = FamilyCache(data.values, alpha, config)
    best = None
    for parent_sets in enumerate_dags(data.d):
        fams = [cache.fit(j, pa) for j, pa in enumerate(parent_sets)]
        if any(f is None for f in fams):
            continue
        score = 0.0
        for f in fams:
            score += f.score
        if best is None or score > best[1]:
            best = (fams, score)
    fams = best[0]
    gammas = _report_gammas(cache.values, fams, alpha, config.report_p_divisor)
    return _assemble(data.variable_names, alpha, fams, gammas, [0.0] * data.d), best[1]
