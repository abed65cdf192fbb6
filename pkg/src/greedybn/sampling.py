"""Forward (ancestral) sampling and random reference networks.

Sampling is vectorised over rows: nodes are visited in topological order and
each node draws all ``n`` values at once from a single ``numpy`` PCG64 stream
(``default_rng(seed)``), so a ``(model, seed)`` pair fixes the dataset.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .dataset import CONTINUOUS, DISCRETE, Column, Dataset, Schema
from .graph import Dag, GraphError
from .localfit import BnModel, ClgMixture, Cpt, FitError, GaussRegression

KINDS = ("discrete", "gbn", "clgbn")


@dataclass(frozen=True)
class SampleSpec:
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("sample size must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def topological_order(dag: Dag) -> list[str]:
    """Kahn's algorithm, smallest available name first."""
    indeg = {v: 0 for v in dag.nodes}
    children = {v: [] for v in dag.nodes}
    for a, b in dag.arcs:
        indeg[b] += 1
        children[a].append(b)
    heap = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(dag.nodes):
        raise GraphError("graph is cyclic")
    return order


def _config_index(values: dict, parents, parent_levels, n: int) -> np.ndarray:
    code = np.zeros(n, dtype=np.int64)
    for p, lv in zip(parents, parent_levels):
        code = code * len(lv) + values[p]
    return code


def _draw_categorical(rng, probs: np.ndarray, codes: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=0)
    cum[-1] = 1.0
    u = rng.random(len(codes))
    return (u[:, None] >= cum.T[codes]).sum(axis=1).astype(np.int32)


def sample(model: BnModel, spec: SampleSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    values: dict[str, np.ndarray] = {}
    for v in topological_order(model.dag):
        dist = model.distributions[v]
        if isinstance(dist, Cpt):
            if np.any(np.abs(dist.probs.sum(axis=0) - 1.0) > 1e-9) or np.any(dist.probs < 0):
                raise FitError(f"{v!r}: CPT columns must be probability vectors")
            codes = _config_index(values, dist.parents, dist.parent_levels, n)
            values[v] = _draw_categorical(rng, dist.probs, codes)
            continue
        if isinstance(dist, GaussRegression):
            coef = dist.coef_row[None, :]
            var = np.array([dist.variance])
            codes = np.zeros(n, dtype=np.int64)
            gpar = dist.parents
        elif isinstance(dist, ClgMixture):
            coef, var = dist.coef_table()
            if np.isnan(var).any():
                raise FitError(f"{v!r}: mixture has components without parameters")
            codes = _config_index(values, dist.discrete_parents, dist.parent_levels, n)
            gpar = dist.continuous_parents
        else:
            raise TypeError(f"unsupported distribution {type(dist).__name__}")
        if np.any(var <= 0):
            raise FitError(f"{v!r}: variances must be positive")
        mean = coef[codes, 0].copy()
        for k, p in enumerate(gpar):
            mean += coef[codes, k + 1] * values[p]
        values[v] = mean + np.sqrt(var[codes]) * rng.standard_normal(n)
    return Dataset.from_columns(model.schema, values)


# -- random reference models ------------------------------------------------

def _node_names(n: int) -> list[str]:
    width = len(str(n))
    return [f"X{i + 1:0{width}d}" for i in range(n)]


def _uniform_pm(rng, lo, hi, size=None):
    mag = rng.uniform(lo, hi, size)
    return mag * rng.choice([-1.0, 1.0], size)


def random_reference_model(
    kind: str,
    nnodes: int,
    density: float,
    seed: int = 0,
    *,
    levels: int = 3,
    discrete_fraction: float = 0.3,
    coef_range: tuple[float, float] = (0.5, 2.0),
    var_range: tuple[float, float] = (0.5, 2.0),
    intercept_range: tuple[float, float] = (-1.0, 1.0),
    max_parents: int | None = None,
    max_discrete_parents: int = 2,
    min_prob: float = 0.05,
) -> BnModel:
    """Random DAG with ``floor(density * nnodes)`` arcs and random parameters.

    Nodes are shuffled into a random order and arcs only point forward in
    it. For ``clgbn`` the discrete nodes come first, so discrete nodes only
    ever receive discrete parents. CPT columns are Dirichlet(1) draws mixed
    with a uniform floor of ``min_prob`` and renormalised.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if nnodes < 2:
        raise ValueError("need at least two nodes")
    narcs = int(np.floor(density * nnodes))
    if narcs < 0 or narcs > nnodes * (nnodes - 1) // 2:
        raise ValueError(f"{narcs} arcs do not fit in a DAG over {nnodes} nodes")
    rng = np.random.default_rng(seed)
    names = _node_names(nnodes)
    order = [names[i] for i in rng.permutation(nnodes)]

    if kind == "discrete":
        ndisc = nnodes
    elif kind == "gbn":
        ndisc = 0
    else:
        ndisc = min(nnodes - 1, max(1, int(round(discrete_fraction * nnodes))))
    is_disc = {v: k < ndisc for k, v in enumerate(order)}

    pairs = [(a, b) for k, a in enumerate(order) for b in order[k + 1:]]
    chosen = []
    npar = {v: 0 for v in names}
    ndpar = {v: 0 for v in names}
    for idx in rng.permutation(len(pairs)):
        if len(chosen) == narcs:
            break
        a, b = pairs[idx]
        if max_parents is not None and npar[b] >= max_parents:
            continue
        if is_disc[a] and ndpar[b] >= max_discrete_parents:
            continue
        chosen.append((a, b))
        npar[b] += 1
        ndpar[b] += is_disc[a]
    if len(chosen) < narcs:
        raise ValueError("parent limits leave too few admissible arcs")
    dag = Dag(names, chosen)

    level_names = tuple(f"L{k}" for k in range(levels))
    cols = tuple(
        Column(v, DISCRETE, level_names) if is_disc[v] else Column(v, CONTINUOUS) for v in names
    )
    schema = Schema(cols)

    def regression(child, gpar):
        coefs = tuple(float(b) for b in _uniform_pm(rng, *coef_range, size=len(gpar)))
        var = float(rng.uniform(*var_range))
        return GaussRegression(child, gpar, float(rng.uniform(*intercept_range)), coefs, var, var, 0)

    dists = {}
    for v in order:
        parents = dag.parents(v)
        dpar = tuple(p for p in parents if is_disc[p])
        gpar = tuple(p for p in parents if not is_disc[p])
        plevels = tuple(level_names for _ in dpar)
        nconf = levels ** len(dpar)
        if is_disc[v]:
            probs = rng.dirichlet(np.ones(levels), size=nconf).T
            probs = (1.0 - levels * min_prob) * probs + min_prob
            probs /= probs.sum(axis=0)
            dists[v] = Cpt(v, dpar, level_names, plevels, probs, np.zeros_like(probs, dtype=np.int64))
        elif dpar:
            comps = tuple(regression(v, gpar) for _ in range(nconf))
            dists[v] = ClgMixture(v, dpar, gpar, plevels, comps, (0,) * nconf, None)
        else:
            dists[v] = regression(v, gpar)
    return BnModel(dag, dists, schema)
