"""alpha-stable graphical models: DAG bookkeeping, simulation and representations."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .stable import StableParams, _tan_half_pi, log_char_function, make_rng, sample


class CycleError(ValueError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("graph contains a cycle: " + " -> ".join(map(str, self.cycle)))


@dataclass(frozen=True)
class Dag:
    """Node names plus, for each node, the sorted tuple of parent indices."""

    node_names: tuple
    parent_sets: tuple

    def __post_init__(self):
        names = tuple(str(n) for n in self.node_names)
        if len(set(names)) != len(names):
            raise ValueError("node names must be unique")
        if len(self.parent_sets) != len(names):
            raise ValueError("one parent set per node is required")
        d = len(names)
        parents = []
        for j, pa in enumerate(self.parent_sets):
            pa = tuple(sorted(int(k) for k in pa))
            if len(set(pa)) != len(pa):
                raise ValueError(f"duplicate parent for node {names[j]}")
            for k in pa:
                if not 0 <= k < d:
                    raise ValueError(f"parent index {k} out of range for node {names[j]}")
                if k == j:
                    raise ValueError(f"node {names[j]} cannot be its own parent")
            parents.append(pa)
        object.__setattr__(self, "node_names", names)
        object.__setattr__(self, "parent_sets", tuple(parents))
        topological_order(self)

    @property
    def d(self) -> int:
        return len(self.node_names)

    def edges(self) -> list:
        """Directed edges as (parent, child) index pairs, sorted."""
        return sorted((k, j) for j, pa in enumerate(self.parent_sets) for k in pa)

    @classmethod
    def from_edges(cls, names: Sequence[str], edges) -> "Dag":
        index = {n: i for i, n in enumerate(names)}
        parents = [[] for _ in names]
        for a, b in edges:
            parents[index[b] if isinstance(b, str) else b].append(
                index[a] if isinstance(a, str) else a
            )
        return cls(tuple(names), tuple(tuple(p) for p in parents))

    @classmethod
    def empty(cls, names: Sequence[str]) -> "Dag":
        return cls(tuple(names), tuple(() for _ in names))


def topological_order(dag: Dag) -> list:
    """Kahn's algorithm; among ready nodes the lowest index goes first."""
    d = len(dag.node_names)
    children = [[] for _ in range(d)]
    indegree = [0] * d
    for j, pa in enumerate(dag.parent_sets):
        indegree[j] = len(pa)
        for k in pa:
            children[k].append(j)
    ready = [j for j in range(d) if indegree[j] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        k = heapq.heappop(ready)
        order.append(k)
        for j in children[k]:
            indegree[j] -= 1
            if indegree[j] == 0:
                heapq.heappush(ready, j)
    if len(order) < d:
        raise CycleError(_find_cycle(dag, set(range(d)) - set(order)))
    return order


def _find_cycle(dag: Dag, remaining: set) -> list:
    # every remaining node has a remaining parent, so walking parents must loop
    start = min(remaining)
    seen = {}
    path = []
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = next(k for k in dag.parent_sets[node] if k in remaining)
    cycle = path[seen[node]:][::-1]
    return [dag.node_names[k] for k in cycle + cycle[:1]]


def equivalence_key(dag: Dag) -> tuple:
    """Skeleton plus unshielded colliders; equal keys mean Markov-equivalent DAGs."""
    skeleton = frozenset(frozenset(e) for e in dag.edges())
    colliders = frozenset(
        (a, b, j)
        for j, pa in enumerate(dag.parent_sets)
        for i, a in enumerate(pa)
        for b in pa[i + 1:]
        if frozenset((a, b)) not in skeleton
    )
    return skeleton, colliders


@dataclass(frozen=True)
class DataMatrix:
    variable_names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.variable_names)
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if v.shape[1] != len(names):
            raise ValueError(f"{v.shape[1]} columns but {len(names)} names")
        if not np.all(np.isfinite(v)):
            raise ValueError("data contains non-finite entries")
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        v.setflags(write=False)
        object.__setattr__(self, "variable_names", names)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.variable_names.index(name)]

    def take_rows(self, rows) -> "DataMatrix":
        return DataMatrix(self.variable_names, self.values[np.asarray(rows)])

    def aligned_to(self, names: Sequence[str]) -> np.ndarray:
        """Columns reordered to ``names``; raises on any missing name."""
        missing = [n for n in names if n not in self.variable_names]
        if missing:
            raise KeyError(f"data lacks variables: {', '.join(missing)}")
        idx = [self.variable_names.index(n) for n in names]
        return self.values[:, idx]


@dataclass(frozen=True)
class SGModel:
    """A DAG with linear weights and per-node stable noise sharing one alpha.

    ``weights[j]`` is aligned with ``dag.parent_sets[j]``; ``noise[j]`` is the
    (beta, gamma, mu) triple of node j's residual law.
    """

    dag: Dag
    alpha: float
    weights: tuple
    noise: tuple

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        d = self.dag.d
        if len(self.weights) != d or len(self.noise) != d:
            raise ValueError("weights and noise need one entry per node")
        ws = []
        for j, (w, pa) in enumerate(zip(self.weights, self.dag.parent_sets)):
            w = tuple(float(x) for x in w)
            if len(w) != len(pa):
                raise ValueError(f"node {self.dag.node_names[j]}: {len(w)} weights for {len(pa)} parents")
            if not all(math.isfinite(x) for x in w):
                raise ValueError("weights must be finite")
            ws.append(w)
        noise = []
        for b, g, m in self.noise:
            StableParams(self.alpha, float(b), float(g), float(m))
            noise.append((float(b), float(g), float(m)))
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "noise", tuple(noise))

    @property
    def names(self) -> tuple:
        return self.dag.node_names

    @property
    def d(self) -> int:
        return self.dag.d

    def noise_params(self, j: int) -> StableParams:
        b, g, m = self.noise[j]
        return StableParams(self.alpha, b, g, m)

    def weight_matrix(self) -> np.ndarray:
        """W[j, k] = weight of edge k -> j."""
        w = np.zeros((self.d, self.d))
        for j, (pa, ws) in enumerate(zip(self.dag.parent_sets, self.weights)):
            for k, x in zip(pa, ws):
                w[j, k] = x
        return w

    def edge_weights(self) -> dict:
        return {
            (k, j): x
            for j, (pa, ws) in enumerate(zip(self.dag.parent_sets, self.weights))
            for k, x in zip(pa, ws)
        }

    def replace(self, **changes) -> "SGModel":
        fields = dict(dag=self.dag, alpha=self.alpha, weights=self.weights, noise=self.noise)
        fields.update(changes)
        return SGModel(**fields)


def simulate(model: SGModel, n: int, seed=0) -> DataMatrix:
    """Draw ``n`` samples: noise per node in index order, then propagate."""
    rng = make_rng(seed)
    z = np.empty((n, model.d))
    for j in range(model.d):
        z[:, j] = sample(model.noise_params(j), n, rng)
    x = np.empty_like(z)
    for j in topological_order(model.dag):
        pa = model.dag.parent_sets[j]
        x[:, j] = z[:, j]
        if pa:
            x[:, j] += x[:, list(pa)] @ np.asarray(model.weights[j])
    return DataMatrix(model.names, x)


def symmetrize(data: DataMatrix) -> DataMatrix:
    """Pairwise differences of consecutive rows (row 2l minus row 2l-1, 1-based)."""
    if data.n < 2:
        raise ValueError("symmetrization needs at least two rows")
    m = data.n // 2
    v = data.values
    return DataMatrix(data.variable_names, v[1 : 2 * m : 2] - v[0 : 2 * m : 2])


def residuals(model: SGModel, data: DataMatrix, node) -> np.ndarray:
    """Z_j = X_j - sum_k w_jk X_k for node ``node`` (index or name)."""
    j = node if isinstance(node, (int, np.integer)) else model.names.index(node)
    x = data.aligned_to(model.names)
    return _family_residual(x, j, model.dag.parent_sets[j], model.weights[j])


def all_residuals(model: SGModel, data: DataMatrix) -> np.ndarray:
    x = data.aligned_to(model.names)
    return np.column_stack(
        [_family_residual(x, j, pa, w) for j, (pa, w) in enumerate(zip(model.dag.parent_sets, model.weights))]
    ) if model.d else np.empty((data.n, 0))


def _family_residual(x: np.ndarray, j: int, parents, weights) -> np.ndarray:
    if not parents:
        return x[:, j].copy()
    return x[:, j] - x[:, list(parents)] @ np.asarray(weights, dtype=float)


def mixing_vectors(model: SGModel) -> np.ndarray:
    """Columns c_k of (I - W)^-1, so that X = sum_k c_k Z_k.

    Solved by forward substitution on the unit lower-triangular system in a
    topological order.
    """
    order = topological_order(model.dag)
    w = model.weight_matrix()[np.ix_(order, order)]
    lower = np.eye(model.d) - w
    diag = np.diag(lower)
    # the noise map has unit diagonal, hence unit Jacobian
    assert np.all(diag == 1.0) and float(np.prod(diag)) == 1.0
    a_perm = linalg.solve_triangular(lower, np.eye(model.d), lower=True, unit_diagonal=True)
    a = np.empty_like(a_perm)
    a[np.ix_(order, order)] = a_perm
    return a


def characteristic_function(model: SGModel, q) -> complex:
    """Joint characteristic function as a product of univariate factors."""
    q = np.asarray(q, dtype=float)
    proj = mixing_vectors(model).T @ q
    log_phi = sum(complex(log_char_function(proj[k], model.noise_params(k))) for k in range(model.d))
    return complex(np.exp(log_phi))


@dataclass(frozen=True)
class SpectralAtom:
    direction: np.ndarray
    weight_plus: float
    weight_minus: float


def spectral_atoms(model: SGModel):
    """Finite spectral measure (one atom pair per node) and location vector."""
    c = mixing_vectors(model)
    atoms = []
    loc = np.zeros(model.d)
    for k in range(model.d):
        ck = c[:, k]
        norm = float(np.linalg.norm(ck))
        b, g, m = model.noise[k]
        mass = norm ** model.alpha * g
        atoms.append(SpectralAtom(ck / norm, (1.0 + b) * mass / 2.0, (1.0 - b) * mass / 2.0))
        eta = m - 2.0 * b * g * math.log(norm) / math.pi if model.alpha == 1.0 else m
        loc += eta * ck
    return atoms, loc


def _psi(u: float, alpha: float) -> complex:
    if u == 0:
        return 0j
    if alpha == 1.0:
        r = -(2.0 / math.pi) * math.log(abs(u))
    else:
        r = _tan_half_pi(alpha)
    return abs(u) ** alpha * (1.0 - 1j * math.copysign(1.0, u) * r)


def spectral_char_function(atoms, location, alpha: float, q) -> complex:
    """Multivariate stable characteristic function from a discrete spectral measure."""
    q = np.asarray(q, dtype=float)
    total = 0j
    for atom in atoms:
        u = float(atom.direction @ q)
        total += atom.weight_plus * _psi(u, alpha) + atom.weight_minus * _psi(-u, alpha)
    return complex(np.exp(-total + 1j * float(np.asarray(location) @ q)))
