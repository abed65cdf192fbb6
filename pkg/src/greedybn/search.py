"""Greedy structure search: cached hill climbing, tabu escapes, random restarts.

``naive_hill_climb`` rescores every candidate graph from scratch and is kept
as a test oracle and as the uncached baseline.
"""

from __future__ import annotations

import csv
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .graph import Dag
from .localfit import BnModel, fit_model
from .scoring import (
    NEG_INF,
    Candidate,
    NodeScorer,
    ScoreCache,
    ScoreSpec,
    apply_candidate,
    arc_fingerprint,
    best_candidate,
    cached_candidates,
    dag_from_parents,
    legal_moves,
    name_rank,
    parent_sets,
    pick,
    tie_tolerance,
)


@dataclass(frozen=True)
class SearchParams:
    t0: int = 10          # tabu iterations
    t1: int = 10          # tabu list length
    r0: int = 0           # random restarts
    r1: int = 5           # perturbation moves per restart
    seed: int = 0
    max_parents: int | None = None

    def __post_init__(self):
        if min(self.t0, self.t1, self.r0, self.r1, self.seed) < 0:
            raise ValueError("search parameters must be non-negative")
        if self.t0 > 0 and self.t1 < 1:
            raise ValueError("t1 must be at least 1 when t0 > 0")
        if self.r0 > 0 and self.r1 < 1:
            raise ValueError("r1 must be at least 1 when r0 > 0")


@dataclass
class TraceRecord:
    iteration: int
    phase: str            # "hc", "tabu" or "restart"
    move: str
    score_before: float
    score_after: float
    evaluations: int      # node-score evaluations spent refreshing after the move


@dataclass
class SearchTrace:
    records: list = field(default_factory=list)
    evaluations: int = 0
    seconds: float = 0.0
    score: float = NEG_INF
    params: SearchParams | None = None

    FIELDS = ("iteration", "phase", "move", "score_before", "score_after", "evaluations")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.FIELDS)
            for r in self.records:
                w.writerow([getattr(r, f) for f in self.FIELDS])


def _resolve_spec(spec: ScoreSpec, params: SearchParams) -> ScoreSpec:
    if params.max_parents is None or params.max_parents == spec.max_parents:
        return spec
    return ScoreSpec(spec.kind, spec.method, spec.split, params.max_parents)


class SearchState:
    """Current DAG (as parent index sets) with its coherent score cache."""

    def __init__(self, scorer: NodeScorer, parents, trace: SearchTrace):
        self.scorer = scorer
        self.names = scorer.names
        self.rank = name_rank(self.names)
        self.parents = [set(p) for p in parents]
        self.cache = ScoreCache(scorer, self.parents)
        self.score = self.cache.total()
        self.trace = trace
        self.best_parents = [set(p) for p in self.parents]
        self.best_score = self.score

    @property
    def arcs(self) -> frozenset:
        return arc_fingerprint(self.parents)

    def dag(self, parents=None) -> Dag:
        return dag_from_parents(self.names, self.parents if parents is None else parents)

    def candidates(self) -> list[Candidate]:
        return cached_candidates(self.cache, self.parents)

    def apply(self, c: Candidate, phase: str) -> None:
        before = self.score
        ev0 = self.scorer.evaluations
        changed = apply_candidate(self.parents, c)
        self.cache.refresh(self.parents, changed)
        self.score = self.cache.total()
        self.trace.records.append(TraceRecord(
            len(self.trace.records) + 1, phase, str(c.as_move(self.names)),
            before, self.score, self.scorer.evaluations - ev0,
        ))

    def reset_to(self, parents) -> None:
        changed = [i for i in range(len(parents)) if parents[i] != self.parents[i]]
        self.parents = [set(p) for p in parents]
        self.cache.refresh(self.parents, changed)
        self.score = self.cache.total()

    def record_best(self) -> bool:
        """Store the current DAG as best-so-far if it strictly improves."""
        if self.score > self.best_score + tie_tolerance(self.best_score):
            self.best_parents = [set(p) for p in self.parents]
            self.best_score = self.score
            return True
        return False


def _climb(state: SearchState) -> None:
    while True:
        c = best_candidate(state.candidates(), state.rank, state.score)
        if c is None or not c.change > tie_tolerance(state.score):
            break
        state.apply(c, "hc")
    state.record_best()


def tabu_phase(state: SearchState, params: SearchParams) -> bool:
    """Up to ``t0`` best non-tabu moves; True when a new best DAG was found
    (the state is then positioned on it, ready for hill climbing)."""
    if params.t0 == 0:
        return False
    tabu = deque([state.arcs], maxlen=params.t1)
    for _ in range(params.t0):
        c = best_candidate(state.candidates(), state.rank, state.score, tabu, state.parents)
        if c is None:
            break
        state.apply(c, "tabu")
        tabu.append(state.arcs)
        if state.record_best():
            return True
    return False


def _hc_tabu(state: SearchState, params: SearchParams) -> None:
    while True:
        _climb(state)
        if not tabu_phase(state, params):
            break
    if state.parents != state.best_parents:
        state.reset_to(state.best_parents)


def _perturb(state: SearchState, rng: np.random.Generator, moves: int) -> None:
    for _ in range(moves):
        cands = state.candidates()
        if not cands:
            break
        state.apply(cands[int(rng.integers(len(cands)))], "restart")


def _init_parents(ds: Dataset, init: Dag | None):
    if init is None:
        return [set() for _ in ds.names]
    return parent_sets(ds, init)


def _run(ds, spec, params, init, full: bool):
    t_start = time.perf_counter()
    spec = _resolve_spec(spec, params)
    scorer = NodeScorer(ds, spec)
    trace = SearchTrace(params=params)
    state = SearchState(scorer, _init_parents(ds, init), trace)
    if full:
        _hc_tabu(state, params)
        rng = np.random.default_rng(params.seed)
        for _ in range(params.r0):
            g_max = [set(p) for p in state.best_parents]
            s_max = state.best_score
            _perturb(state, rng, params.r1)
            # best-so-far tracking restarts from the perturbed graph
            state.best_parents = [set(p) for p in state.parents]
            state.best_score = state.score
            _hc_tabu(state, params)
            if state.best_parents == g_max:
                break
            if not state.best_score > s_max + tie_tolerance(s_max):
                state.reset_to(g_max)
                state.best_parents = g_max
                state.best_score = s_max
    else:
        _climb(state)
    trace.evaluations = scorer.evaluations
    trace.score = state.best_score
    trace.seconds = time.perf_counter() - t_start
    return state, trace


def hill_climb(ds: Dataset, spec: ScoreSpec, params: SearchParams = SearchParams(), init: Dag | None = None):
    """Plain cached hill climbing; returns ``(Dag, score, SearchTrace)``."""
    state, trace = _run(ds, spec, params, init, full=False)
    return state.dag(), state.score, trace


def greedy_search(ds: Dataset, spec: ScoreSpec, params: SearchParams = SearchParams(),
                  init: Dag | None = None) -> tuple[BnModel, SearchTrace]:
    """Hill climbing with tabu escapes and random restarts.

    The returned model is refitted on all rows of ``ds`` (for PRED the split
    only drives structure selection).
    """
    state, trace = _run(ds, spec, params, init, full=True)
    model = fit_model(ds, state.dag(state.best_parents), spec.method)
    return model, trace


def naive_hill_climb(ds: Dataset, spec: ScoreSpec, params: SearchParams = SearchParams(),
                     init: Dag | None = None):
    """Hill climbing that scores every candidate DAG from scratch.

    Same move set, tie rule and acceptance test as :func:`hill_climb`.
    Returns ``(Dag, score, SearchTrace)``.
    """
    t_start = time.perf_counter()
    spec = _resolve_spec(spec, params)
    scorer = NodeScorer(ds, spec)
    rank = name_rank(scorer.names)
    parents = _init_parents(ds, init)
    trace = SearchTrace(params=params)

    def total(pa):
        s = 0.0
        for i, p in enumerate(pa):
            s += scorer(i, p)
        return s

    current = total(parents)
    while True:
        cands = []
        for kind, j, i in legal_moves(parents):
            trial = [set(p) for p in parents]
            c = Candidate(kind, j, i, 0.0)
            apply_candidate(trial, c)
            s = total(trial)
            if s == NEG_INF:
                continue
            change = s - current if current != NEG_INF else math.inf
            cands.append(Candidate(kind, j, i, change))
        tol = tie_tolerance(current)
        c = pick(cands, rank, tol)
        if c is None or not c.change > tol:
            break
        before = current
        apply_candidate(parents, c)
        current = total(parents)
        trace.records.append(TraceRecord(len(trace.records) + 1, "hc", str(c.as_move(scorer.names)),
                                         before, current, 0))
    trace.evaluations = scorer.evaluations
    trace.score = current
    trace.seconds = time.perf_counter() - t_start
    return dag_from_parents(scorer.names, parents), current, trace
