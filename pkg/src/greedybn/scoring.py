"""Decomposable network scores and the incremental score cache.

Two scores are supported: BIC (in-sample maximised log-likelihood with the
usual ``log(n)/2`` penalty per parameter) and PRED (log-likelihood of a held
out test set under parameters fitted on the training rows).

The cache keeps, for the current DAG, the node scores ``B[i]`` and the matrix
``delta[i, j] = score(X_i, parents_i toggled by X_j) - B[i]``. After a move
only the rows of the nodes whose parent sets changed are recomputed.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels as K
from .dataset import DISCRETE, Dataset, SplitSpec, split
from .graph import Dag, Move, MoveKind
from .localfit import (
    FitMethod,
    P_FLOOR,
    gauss_loglik,
    mle_variance,
    regress,
)

NEG_INF = float("-inf")
# moves whose score changes differ by less than this (relative) count as tied
SCORE_RTOL = 1e-9


class ScoreKind(str, Enum):
    BIC = "bic"
    PRED = "pred"


@dataclass(frozen=True)
class ScoreSpec:
    kind: ScoreKind = ScoreKind.BIC
    method: FitMethod = FitMethod.QR
    split: SplitSpec | None = None
    max_parents: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScoreKind(self.kind))
        object.__setattr__(self, "method", FitMethod(self.method))
        if self.kind is ScoreKind.PRED and self.split is None:
            raise ValueError("the predictive score needs a SplitSpec")
        if self.max_parents is not None and self.max_parents < 1:
            raise ValueError("max_parents must be positive")


class NodeScorer:
    """Scores ``(child, parent set)`` families by column position.

    Holds the train/test partition for PRED, drawn once so that every score
    in one search refers to the same split. ``evaluations`` counts calls.
    """

    def __init__(self, ds: Dataset, spec: ScoreSpec):
        self.ds = ds
        self.spec = spec
        self.names = ds.names
        if spec.kind is ScoreKind.PRED:
            self.fit_data, self.test_data = split(ds, spec.split)
        else:
            self.fit_data, self.test_data = ds, None
        self.log_n = math.log(ds.n) if ds.n > 0 else 0.0
        self.discrete = [ds.kind(v) == DISCRETE for v in self.names]
        self.pos = [ds.index[v][1] for v in self.names]
        self.nlev = [ds.schema[v].nlevels if d else 0 for v, d in zip(self.names, self.discrete)]
        self.evaluations = 0
        self._codes = OrderedDict()

    CODES_CACHE = 8   # configuration-code arrays kept per scorer

    @property
    def nnodes(self) -> int:
        return len(self.names)

    def __call__(self, child: int, parents) -> float:
        self.evaluations += 1
        parents = sorted(parents)
        mp = self.spec.max_parents
        if mp is not None and len(parents) > mp:
            return NEG_INF
        dpar = [p for p in parents if self.discrete[p]]
        gpar = [p for p in parents if not self.discrete[p]]
        if self.discrete[child]:
            if gpar:
                return NEG_INF
            return self._discrete(child, dpar)
        return self._gaussian(child, dpar, gpar)

    def _disc_args(self, dpar):
        pidx = np.array([self.pos[p] for p in dpar], dtype=np.intp)
        nlev = np.array([self.nlev[p] for p in dpar], dtype=np.int64)
        return pidx, nlev

    def _config_codes(self, data, dpar):
        """Configuration codes of ``dpar`` on ``data`` (fit or test rows), memoised.

        Most candidates for one child share its discrete parents, so the
        same codes are requested many times within a pass.
        """
        key = (data is self.test_data, tuple(dpar))
        codes = self._codes.get(key)
        if codes is None:
            pidx, nlev = self._disc_args(dpar)
            codes = K.config_codes(data.disc, pidx, nlev)
            self._codes[key] = codes
            if len(self._codes) > self.CODES_CACHE:
                self._codes.popitem(last=False)
        else:
            self._codes.move_to_end(key)
        return codes

    def _discrete(self, child, dpar) -> float:
        pidx, nlev = self._disc_args(dpar)
        lc = self.nlev[child]
        c = self.pos[child]
        counts = K.cpt_counts(self.fit_data.disc, c, pidx, nlev, lc)
        totals = counts.sum(axis=1, keepdims=True)
        if self.spec.kind is ScoreKind.BIC:
            nz = counts > 0
            ll = float(np.sum(counts[nz] * np.log(counts[nz] / np.broadcast_to(totals, counts.shape)[nz])))
            return ll - 0.5 * self.log_n * (lc - 1) * counts.shape[0]
        probs = np.where(totals > 0, counts / np.maximum(totals, 1), 1.0 / lc)
        logp = np.log(np.maximum(probs, P_FLOOR))
        return float(K.cpt_logprob_sum(self.test_data.disc, c, pidx, nlev, logp))

    def _gaussian(self, child, dpar, gpar) -> float:
        y = self.pos[child]
        xs = np.array([self.pos[p] for p in gpar], dtype=np.intp)
        need = len(gpar) + 2
        data = self.fit_data
        if dpar:
            ngroups = int(np.prod([self.nlev[p] for p in dpar]))
            codes = self._config_codes(data, dpar)
        else:
            ngroups, codes = 1, None
        if data.n < need:
            return NEG_INF
        counts, coef, ssr = regress(data.cont, y, xs, codes, ngroups, self.spec.method)
        if np.any((counts > 0) & (counts < need)):
            return NEG_INF
        sigma2 = mle_variance(counts, ssr)
        if self.spec.kind is ScoreKind.BIC:
            ll = gauss_loglik(counts, ssr, sigma2)
            return ll - 0.5 * self.log_n * ngroups * need

        test = self.test_data
        tcodes = self._config_codes(test, dpar) if dpar else None
        tcounts, tssr = K.resid_ssr(test.cont, y, xs, tcodes, coef)
        missing = (tcounts > 0) & (counts == 0)
        if missing.any():
            # configurations unseen in training use the pooled regression
            pc, pcoef, pssr = regress(data.cont, y, xs, None, 1, self.spec.method)
            coef = coef.copy()
            coef[missing] = pcoef[0]
            sigma2 = sigma2.copy()
            sigma2[missing] = mle_variance(pc, pssr)[0]
            tcounts, tssr = K.resid_ssr(test.cont, y, xs, tcodes, coef)
        return gauss_loglik(tcounts, tssr, sigma2)


def _node_indices(ds: Dataset, dag: Dag):
    pos = {v: i for i, v in enumerate(ds.names)}
    missing = set(dag.nodes) - set(pos)
    if missing:
        raise ValueError(f"DAG nodes missing from data: {sorted(missing)}")
    return pos


def score_node(ds: Dataset, spec: ScoreSpec, child: str, parents=()) -> float:
    pos = {v: i for i, v in enumerate(ds.names)}
    return NodeScorer(ds, spec)(pos[child], [pos[p] for p in parents])


def score_graph(ds: Dataset, spec: ScoreSpec, dag: Dag) -> float:
    pos = _node_indices(ds, dag)
    scorer = NodeScorer(ds, spec)
    total = 0.0
    for v in dag.nodes:
        total += scorer(pos[v], [pos[p] for p in dag.parents(v)])
    return total


def score_change(new: float, old: float) -> float:
    """``new - old`` with the -inf sentinel handled explicitly."""
    if new == NEG_INF:
        return NEG_INF
    if old == NEG_INF:
        return math.inf
    return new - old


def parent_sets(ds: Dataset, dag: Dag) -> list[set[int]]:
    pos = _node_indices(ds, dag)
    out = [set() for _ in ds.names]
    for a, b in dag.arcs:
        out[pos[b]].add(pos[a])
    return out


def dag_from_parents(names, parents) -> Dag:
    return Dag(names, [(names[j], names[i]) for i, pa in enumerate(parents) for j in pa])


class ScoreCache:
    """Node scores ``B`` and toggle deltas for one DAG (given as parent sets)."""

    def __init__(self, scorer: NodeScorer, parents):
        self.scorer = scorer
        n = scorer.nnodes
        self.B = np.empty(n)
        self.delta = np.full((n, n), np.nan)
        self.dirty: set[int] = set()
        self.row_updates = 0
        for i in range(n):
            self._row(i, parents[i])

    def _row(self, i, pa):
        b = self.scorer(i, pa)
        self.B[i] = b
        for j in range(self.scorer.nnodes):
            if j != i:
                self.delta[i, j] = score_change(self.scorer(i, pa ^ {j}), b)
        self.row_updates += 1

    def mark_dirty(self, nodes):
        self.dirty.update(nodes)

    def refresh(self, parents, changed=None):
        if changed is not None:
            self.dirty.update(changed)
        for i in sorted(self.dirty):
            self._row(i, parents[i])
        self.dirty.clear()
        return self

    @property
    def evaluations(self) -> int:
        return self.scorer.evaluations

    def total(self) -> float:
        return float(self.B.sum())


def cache_init(ds: Dataset, spec: ScoreSpec, dag: Dag) -> ScoreCache:
    return ScoreCache(NodeScorer(ds, spec), parent_sets(ds, dag))


def cache_refresh(cache: ScoreCache, ds: Dataset, spec: ScoreSpec, dag: Dag, changed_nodes) -> ScoreCache:
    pos = _node_indices(ds, dag)
    return cache.refresh(parent_sets(ds, dag), {pos[v] for v in changed_nodes})


# -- move enumeration -------------------------------------------------------

ADD, DELETE, REVERSE = 0, 1, 2
_KINDS = {ADD: MoveKind.ADD, DELETE: MoveKind.DELETE, REVERSE: MoveKind.REVERSE}


@dataclass(frozen=True)
class Candidate:
    """Index-space move on arc ``source -> target`` with its score change."""
    kind: int
    source: int
    target: int
    change: float

    def as_move(self, names) -> Move:
        return Move(_KINDS[self.kind], names[self.source], names[self.target])


def descendants(parents) -> list[int]:
    """Bitmask of strict descendants of every node."""
    n = len(parents)
    children = [[] for _ in range(n)]
    indeg = [len(pa) for pa in parents]
    for i, pa in enumerate(parents):
        for j in pa:
            children[j].append(i)
    order = [v for v in range(n) if indeg[v] == 0]
    k = 0
    while k < len(order):
        v = order[k]
        k += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                order.append(c)
    if len(order) != n:
        raise ValueError("parent sets are cyclic")
    desc = [0] * n
    for v in reversed(order):
        m = 0
        for c in children[v]:
            m |= (1 << c) | desc[c]
        desc[v] = m
    return desc


def legal_moves(parents):
    """All acyclic (kind, source, target) moves for the given parent sets."""
    n = len(parents)
    desc = descendants(parents)
    children = [[] for _ in range(n)]
    for i, pa in enumerate(parents):
        for j in pa:
            children[j].append(i)
    out = []
    for i in range(n):
        pa = parents[i]
        for j in range(n):
            if i == j:
                continue
            if j in pa:
                out.append((DELETE, j, i))
                # reversing j -> i cycles iff another path j ~> i exists
                if not any(c != i and (desc[c] >> i) & 1 for c in children[j]):
                    out.append((REVERSE, j, i))
            elif not (desc[i] >> j) & 1:
                out.append((ADD, j, i))
    return out


def tie_tolerance(score: float) -> float:
    return SCORE_RTOL * (max(1.0, abs(score)) if math.isfinite(score) else 1.0)


def pick(cands: list[Candidate], rank, tol: float):
    """Largest change; candidates within ``tol`` of it are tied and the
    smallest (kind, source name, target name) wins."""
    if not cands:
        return None
    best = max(c.change for c in cands)
    tied = [c for c in cands if c.change >= best - tol]
    return min(tied, key=lambda c: (c.kind, rank[c.source], rank[c.target]))


def apply_candidate(parents, c: Candidate):
    """Apply in place; returns the nodes whose parent sets changed."""
    if c.kind == ADD:
        parents[c.target].add(c.source)
        return (c.target,)
    if c.kind == DELETE:
        parents[c.target].remove(c.source)
        return (c.target,)
    parents[c.target].remove(c.source)
    parents[c.source].add(c.target)
    return (c.target, c.source)


def arcs_after(arcs: frozenset, c: Candidate) -> frozenset:
    arc = (c.source, c.target)
    if c.kind == ADD:
        return arcs | {arc}
    if c.kind == DELETE:
        return arcs - {arc}
    return (arcs - {arc}) | {(c.target, c.source)}


def arc_fingerprint(parents) -> frozenset:
    return frozenset((j, i) for i, pa in enumerate(parents) for j in pa)


def name_rank(names) -> list[int]:
    order = sorted(range(len(names)), key=lambda i: names[i])
    rank = [0] * len(names)
    for r, i in enumerate(order):
        rank[i] = r
    return rank


def cached_candidates(cache: ScoreCache, parents) -> list[Candidate]:
    d = cache.delta
    out = []
    for kind, j, i in legal_moves(parents):
        if kind == REVERSE:
            # dropping j -> i leaves the parents of j untouched, so the cached
            # add-half delta[j, i] is exact
            a, b = d[i, j], d[j, i]
            change = NEG_INF if NEG_INF in (a, b) else a + b
        else:
            change = d[i, j]
        if change == NEG_INF or math.isnan(change):
            continue
        out.append(Candidate(kind, j, i, float(change)))
    return out


def best_candidate(cands, rank, score, tabu=None, parents=None):
    """Best candidate whose resulting arc set is not tabu; None if exhausted."""
    tol = tie_tolerance(score)
    if not tabu:
        return pick(cands, rank, tol)
    arcs = arc_fingerprint(parents)
    pool = list(cands)
    while pool:
        c = pick(pool, rank, tol)
        if arcs_after(arcs, c) not in tabu:
            return c
        pool.remove(c)
    return None


def enumerate_moves(cache: ScoreCache, dag: Dag, spec: ScoreSpec | None = None, tabu=None):
    """Best admissible move for ``dag`` as ``(Move, change)``; None when exhausted.

    ``tabu`` is a collection of arc sets (frozensets of ``(parent, child)``
    name pairs) that the resulting DAG must avoid.
    """
    names = cache.scorer.names
    pos = {v: i for i, v in enumerate(names)}
    parents = [set() for _ in names]
    for a, b in dag.arcs:
        parents[pos[b]].add(pos[a])
    if cache.dirty:
        cache.refresh(parents)
    itabu = None
    if tabu:
        itabu = {frozenset((pos[a], pos[b]) for a, b in t) for t in tabu}
    c = best_candidate(cached_candidates(cache, parents), name_rank(names), cache.total(), itabu, parents)
    if c is None:
        return None
    return c.as_move(names), c.change
