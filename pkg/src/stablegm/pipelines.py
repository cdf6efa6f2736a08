"""Experiment drivers: synthetic benchmark, cross-validation, SGEX, normalization.

Work items (replicates, folds, held-out groups) carry their own seeds and can
run in a process pool; results are gathered in index order so reports do not
depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .model import Dag, DataMatrix, SGModel, simulate, symmetrize
from .scoring import lflom, lflom_terms
from .search import SearchConfig, node_thetas, stable_learn
from .stable import _tan_half_pi, make_rng

CONFIDENCE_LEVELS = tuple(range(1, 101))


def derive_seed(*keys: int) -> int:
    """Independent 63-bit seed for a work item identified by ``keys``."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def empty_model(names, alpha: float) -> SGModel:
    d = len(names)
    return SGModel(Dag.empty(names), alpha, ((),) * d, ((0.0, 1.0, 0.0),) * d)


# -- synthetic benchmark ---------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSpec:
    topology: Dag
    alpha: float
    beta: float = 0.9
    gamma: float = 1.0
    rho: float = 1.0
    n_samples: int = 2000
    n_replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_replicates < 1 or self.n_samples < 4:
            raise ValueError("need at least one replicate and four samples")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")

    @property
    def theta(self) -> float:
        return math.atan(self.beta * _tan_half_pi(self.alpha))

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "rho": self.rho,
            "n_samples": self.n_samples,
            "n_replicates": self.n_replicates,
            "seed": self.seed,
            "nodes": self.topology.d,
            "edges": len(self.topology.edges()),
        }


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    learned_edges: tuple
    weight_errors: tuple
    alpha_hat: float
    theta_mean: float
    log_gamma_mean: float
    log_gamma_sym_mean: float
    tp: int
    fp: int
    tp_skeleton: int
    fp_skeleton: int


REPLICATE_COLUMNS = (
    "replicate", "alpha_hat", "theta_mean", "log_gamma_mean", "log_gamma_sym_mean",
    "tp", "fp", "tp_skeleton", "fp_skeleton",
)


@dataclass
class BenchmarkReport:
    score_kind: str
    n_replicates: int
    tp_at_confidence: dict
    fp_at_confidence: dict
    tp_skeleton_at_confidence: dict
    fp_skeleton_at_confidence: dict
    weight_bias: float
    weight_std: float
    alpha_stats: tuple
    theta_stats: tuple
    theta_true: float
    log_gamma_stats: tuple
    log_gamma_sym_stats: tuple
    mean_tp: float
    mean_fp: float
    replicates: list = field(default_factory=list)

    def summary_rows(self):
        yield ("score_kind", self.score_kind)
        yield ("n_replicates", self.n_replicates)
        yield ("mean_tp", self.mean_tp)
        yield ("mean_fp", self.mean_fp)
        yield ("tp_at_50", self.tp_at_confidence[50])
        yield ("fp_at_50", self.fp_at_confidence[50])
        yield ("weight_bias", self.weight_bias)
        yield ("weight_std", self.weight_std)
        yield ("alpha_mean", self.alpha_stats[0])
        yield ("alpha_std", self.alpha_stats[1])
        yield ("theta_true", self.theta_true)
        yield ("theta_mean", self.theta_stats[0])
        yield ("theta_std", self.theta_stats[1])
        yield ("log_gamma_mean", self.log_gamma_stats[0])
        yield ("log_gamma_std", self.log_gamma_stats[1])
        yield ("log_gamma_sym_mean", self.log_gamma_sym_stats[0])
        yield ("log_gamma_sym_std", self.log_gamma_sym_stats[1])

    def curve_rows(self):
        for c in CONFIDENCE_LEVELS:
            yield (c, self.tp_at_confidence[c], self.fp_at_confidence[c],
                   self.tp_skeleton_at_confidence[c], self.fp_skeleton_at_confidence[c])

    def replicate_rows(self):
        for r in self.replicates:
            yield (r.index, r.alpha_hat, r.theta_mean, r.log_gamma_mean, r.log_gamma_sym_mean,
                   r.tp, r.fp, r.tp_skeleton, r.fp_skeleton)


CURVE_COLUMNS = ("confidence", "tp", "fp", "tp_skeleton", "fp_skeleton")
SUMMARY_COLUMNS = ("metric", "value")


def generator_model(spec: BenchmarkSpec, rng) -> SGModel:
    """Topology with weights uniform on [-rho/2, rho/2], drawn in edge order."""
    dag = spec.topology
    edges = dag.edges()
    draws = rng.uniform(-spec.rho / 2.0, spec.rho / 2.0, size=len(edges))
    w = dict(zip(edges, draws))
    weights = tuple(tuple(float(w[(k, j)]) for k in dag.parent_sets[j]) for j in range(dag.d))
    noise = ((spec.beta, spec.gamma, 0.0),) * dag.d
    return SGModel(dag, spec.alpha, weights, noise)


def run_replicate(spec: BenchmarkSpec, config: SearchConfig, index: int) -> ReplicateResult:
    seed = derive_seed(spec.seed, index)
    rng = make_rng(seed)
    truth = generator_model(spec, rng)
    data = simulate(truth, spec.n_samples, rng)
    model, trace = stable_learn(data, replace(config, seed=derive_seed(spec.seed, index, 1)))
    true_w = truth.edge_weights()
    learned_w = model.edge_weights()
    true_edges = set(true_w)
    learned = set(learned_w)
    # ground truth with rho = 0 has no signal on any edge
    signal = true_edges if spec.rho > 0 else set()
    tp_edges = learned & signal
    skel_true = {frozenset(e) for e in signal}
    skel_learned = {frozenset(e) for e in learned}
    thetas = node_thetas(model, data)
    gammas = np.array([g for _, g, _ in model.noise])
    return ReplicateResult(
        index=index,
        learned_edges=tuple(sorted(learned)),
        weight_errors=tuple(learned_w[e] - true_w[e] for e in sorted(tp_edges)),
        alpha_hat=trace.alpha,
        theta_mean=float(np.mean(thetas)),
        log_gamma_mean=float(np.mean(np.log(gammas))),
        log_gamma_sym_mean=float(np.mean(np.log(2.0 * gammas))),
        tp=len(tp_edges),
        fp=len(learned - signal),
        tp_skeleton=len(skel_learned & skel_true),
        fp_skeleton=len(skel_learned - skel_true),
    )


def _stats(x) -> tuple:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return (float("nan"), float("nan"))
    return (float(np.mean(x)), float(np.std(x, ddof=1)) if x.size > 1 else 0.0)


def confidence_curve(counts: dict, positives: set, n_replicates: int) -> tuple:
    """TP/FP counts of features present in at least c percent of replicates."""
    tp, fp = {}, {}
    pct = {e: 100.0 * k / n_replicates for e, k in counts.items()}
    for c in CONFIDENCE_LEVELS:
        hits = [e for e, v in pct.items() if v >= c and v > 0]
        tp[c] = sum(1 for e in hits if e in positives)
        fp[c] = sum(1 for e in hits if e not in positives)
    return tp, fp


def run_benchmark(spec: BenchmarkSpec, score_kind: str = "mdc",
                  config: SearchConfig | None = None, threads: int = 1) -> BenchmarkReport:
    config = replace(config or SearchConfig(), score_kind=score_kind)
    results = _map(partial(run_replicate, spec, config), range(spec.n_replicates), threads)
    dag = spec.topology
    positives = set(dag.edges()) if spec.rho > 0 else set()
    edge_counts, skel_counts = {}, {}
    for r in results:
        for e in r.learned_edges:
            edge_counts[e] = edge_counts.get(e, 0) + 1
        for s in {frozenset(e) for e in r.learned_edges}:
            skel_counts[s] = skel_counts.get(s, 0) + 1
    tp, fp = confidence_curve(edge_counts, positives, spec.n_replicates)
    tps, fps = confidence_curve(skel_counts, {frozenset(e) for e in positives}, spec.n_replicates)
    errors = [e for r in results for e in r.weight_errors]
    return BenchmarkReport(
        score_kind=score_kind,
        n_replicates=spec.n_replicates,
        tp_at_confidence=tp,
        fp_at_confidence=fp,
        tp_skeleton_at_confidence=tps,
        fp_skeleton_at_confidence=fps,
        weight_bias=float(np.mean(errors)) if errors else float("nan"),
        weight_std=float(np.std(errors, ddof=1)) if len(errors) > 1 else float("nan"),
        alpha_stats=_stats([r.alpha_hat for r in results]),
        theta_stats=_stats([r.theta_mean for r in results]),
        theta_true=spec.theta,
        log_gamma_stats=_stats([r.log_gamma_mean for r in results]),
        log_gamma_sym_stats=_stats([r.log_gamma_sym_mean for r in results]),
        mean_tp=float(np.mean([r.tp for r in results])),
        mean_fp=float(np.mean([r.fp for r in results])),
        replicates=results,
    )


# -- cross-validation ------------------------------------------------------


@dataclass
class CVReport:
    fold_lflom_model: list
    fold_lflom_null: list
    fold_rows: list
    fold_alpha: list

    def rows(self):
        for f, (m, z, rows, a) in enumerate(
            zip(self.fold_lflom_model, self.fold_lflom_null, self.fold_rows, self.fold_alpha)
        ):
            yield (f, len(rows), a, m, z, m - z)


CV_COLUMNS = ("fold", "test_rows", "alpha_hat", "lflom_model", "lflom_null", "delta")


def fold_assignment(n: int, k: int, seed: int) -> list:
    """Contiguous blocks of a seeded permutation of ``range(n)``."""
    perm = make_rng(seed).permutation(n)
    return [np.sort(block) for block in np.array_split(perm, k)]


def _cv_fold(sym: DataMatrix, folds, config: SearchConfig, f: int):
    test_rows = folds[f]
    mask = np.ones(sym.n, dtype=bool)
    mask[test_rows] = False
    train = sym.take_rows(np.flatnonzero(mask))
    test = sym.take_rows(test_rows)
    model, _ = stable_learn(train, replace(config, seed=derive_seed(config.seed, f)), already_symmetric=True)
    p = model.alpha / config.irls_p_divisor
    return (lflom(model, test, p), lflom(empty_model(sym.variable_names, model.alpha), test, p), model.alpha)


def crossval(data: DataMatrix, k: int = 10, config: SearchConfig | None = None, threads: int = 1) -> CVReport:
    """k-fold LFLOM of the learned model versus the empty model.

    The data are symmetrized once up front; folds partition the symmetrized
    rows, so each test fold has zero-location residuals.
    """
    config = config or SearchConfig()
    if k < 2:
        raise ValueError("k must be at least 2")
    if data.n < 2 * k:
        raise ValueError(f"need at least 2k = {2 * k} rows, got {data.n}")
    sym = symmetrize(data)
    folds = fold_assignment(sym.n, k, config.seed)
    out = _map(partial(_cv_fold, sym, folds, config), range(k), threads)
    return CVReport([o[0] for o in out], [o[1] for o in out], [list(map(int, f)) for f in folds], [o[2] for o in out])


# -- differential dispersion (SGEX) ----------------------------------------


@dataclass
class DEMatrix:
    groups: list
    variables: list
    delta_ld: np.ndarray
    alphas: list = field(default_factory=list)

    def rows(self):
        for g, row in zip(self.groups, self.delta_ld):
            yield (g, *row)

    @property
    def columns(self):
        return ("group", *self.variables)


def delta_ld(model: SGModel, train: DataMatrix, test: DataMatrix, p: float) -> np.ndarray:
    """Per-variable change in (1/p) log E|Z|^p from ``train`` to ``test``."""
    return lflom_terms(model, test, p) - lflom_terms(model, train, p)


def _sgex_group(data: DataMatrix, labels: np.ndarray, config: SearchConfig, p_divisor, item):
    g, name = item
    test_raw = data.take_rows(np.flatnonzero(labels == name))
    train_raw = data.take_rows(np.flatnonzero(labels != name))
    model, _ = stable_learn(train_raw, replace(config, seed=derive_seed(config.seed, g)))
    divisors = p_divisor if isinstance(p_divisor, (list, tuple)) else (p_divisor,)
    rows = [delta_ld(model, symmetrize(train_raw), symmetrize(test_raw), model.alpha / dv) for dv in divisors]
    return rows, model.alpha


def sgex(data: DataMatrix, group_labels, config: SearchConfig | None = None,
         threads: int = 1, p_divisor: float = 1.01) -> DEMatrix:
    """Hold out each group in turn, learn on the rest, score dispersion change.

    Residual FLOMs use p = alpha/p_divisor with the training alpha; train and
    test rows are symmetrized separately.
    """
    config = config or SearchConfig()
    labels = np.asarray([str(x) for x in group_labels])
    if labels.size != data.n:
        raise ValueError(f"{labels.size} labels for {data.n} rows")
    groups = list(dict.fromkeys(labels.tolist()))
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    for name in groups:
        size = int(np.sum(labels == name))
        if size < 4:
            raise ValueError(f"group {name!r} has {size} rows; at least 4 are required")
    out = _map(partial(_sgex_group, data, labels, config, p_divisor), list(enumerate(groups)), threads)
    matrix = np.array([o[0][0] for o in out])
    return DEMatrix(groups, list(data.variable_names), matrix, [o[1] for o in out])


def sgex_multi_p(data: DataMatrix, group_labels, divisors, config: SearchConfig | None = None):
    """SGEX at several p = alpha/divisor values from a single learned model per group."""
    config = config or SearchConfig()
    labels = np.asarray([str(x) for x in group_labels])
    groups = list(dict.fromkeys(labels.tolist()))
    out = [_sgex_group(data, labels, config, tuple(divisors), item) for item in enumerate(groups)]
    return [np.array([o[0][i] for o in out]) for i in range(len(divisors))]


# -- expression preprocessing ----------------------------------------------


def normalize_expression(log_intensities: DataMatrix, top_k: int) -> DataMatrix:
    """Median-center, rank by variance, keep the top ``top_k``, exponentiate base 2."""
    if not 1 <= top_k <= log_intensities.d:
        raise ValueError(f"top_k must lie in [1, {log_intensities.d}]")
    x = log_intensities.values
    centered = x - np.median(x, axis=0)
    var = np.var(centered, axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    order = np.argsort(-var, kind="stable")[:top_k]
    names = [log_intensities.variable_names[i] for i in order]
    return DataMatrix(tuple(names), np.exp2(centered[:, order]))
