import itertools

import numpy as np
import pytest

from greedybn.dataset import SplitSpec
from greedybn.graph import Dag, Move, MoveKind, all_dags, apply_move
from greedybn.localfit import FitMethod
from greedybn.sampling import SampleSpec, random_reference_model, sample
from greedybn.scoring import ScoreKind, ScoreSpec, score_graph
from greedybn.search import SearchParams, greedy_search, hill_climb, naive_hill_climb

from conftest import make_dataset

BIC = ScoreSpec(ScoreKind.BIC, FitMethod.QR)
PLAIN = SearchParams(t0=0, r0=0)


def _xor(n=2000, seed=0):
    """C = A xor B (10% noise): single parents carry no information about C."""
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 2, n)
    c = a ^ b ^ (rng.random(n) < 0.1)
    return make_dataset(disc={"A": a, "B": b, "C": c})


def _is_local_max(ds, spec, dag, score):
    for a, b in itertools.permutations(dag.nodes, 2):
        for kind in MoveKind:
            try:
                new = apply_move(dag, Move(kind, a, b))
            except ValueError:
                continue
            if score_graph(ds, spec, new) > score + 1e-9 * abs(score):
                return False
    return True


def test_independent_variables_give_empty_dag():
    rng = np.random.default_rng(3)
    ds = make_dataset(disc={"A": rng.integers(0, 3, 1000)},
                      cont={"X": rng.normal(size=1000), "Y": rng.normal(size=1000)})
    for spec in (BIC, ScoreSpec(ScoreKind.BIC, FitMethod.CLOSED2)):
        dag, score, _ = hill_climb(ds, spec, PLAIN)
        assert not dag.arcs
        assert naive_hill_climb(ds, spec, PLAIN)[0] == dag


def test_two_node_dependence_one_arc():
    rng = np.random.default_rng(0)
    a = rng.normal(size=300)
    ds = make_dataset(cont={"A": a, "B": a + 0.5 * rng.normal(size=300)})
    dag, score, trace = hill_climb(ds, BIC, PLAIN)
    assert dag.arcs == {("A", "B")}
    assert len(trace.records) == 1
    best = max(score_graph(ds, BIC, d) for d in all_dags(ds.names))
    assert score == pytest.approx(best, rel=1e-12)


def test_result_is_local_maximum():
    m = random_reference_model("clgbn", 6, 1.0, seed=2)
    ds = sample(m, SampleSpec(400, 1))
    dag, score, trace = hill_climb(ds, BIC, PLAIN)
    assert score == pytest.approx(score_graph(ds, BIC, dag), rel=1e-12)
    assert _is_local_max(ds, BIC, dag, score)
    hc = [r for r in trace.records if r.phase == "hc"]
    assert all(r.score_after > r.score_before for r in hc)


@pytest.mark.parametrize("seed", range(8))
def test_cached_equals_naive(seed):
    rng = np.random.default_rng(seed)
    kind = ("discrete", "gbn", "clgbn")[seed % 3]
    m = random_reference_model(kind, int(rng.integers(3, 7)), 1.0, seed=seed)
    ds = sample(m, SampleSpec(500, seed))
    spec = ScoreSpec(ScoreKind.BIC, (FitMethod.QR, FitMethod.CLOSED2)[seed % 2])
    d1, s1, t1 = hill_climb(ds, spec, PLAIN)
    d2, s2, t2 = naive_hill_climb(ds, spec, PLAIN)
    assert d1 == d2
    assert s1 == pytest.approx(s2, rel=1e-9)
    assert [r.move for r in t1.records] == [r.move for r in t2.records]
    assert t2.evaluations > t1.evaluations


def test_naive_to_cached_evaluation_ratio_grows_with_n_nodes():
    ratios = []
    for nn in (4, 8):
        m = random_reference_model("gbn", nn, 1.0, seed=5)
        ds = sample(m, SampleSpec(300, 5))
        ratios.append(naive_hill_climb(ds, BIC, PLAIN)[2].evaluations
                      / hill_climb(ds, BIC, PLAIN)[2].evaluations)
    assert ratios[1] > ratios[0]


def test_xor_two_peaks():
    ds = _xor()
    scores = {d.arcs: score_graph(ds, BIC, d) for d in all_dags(ds.names)}
    top = max(scores, key=scores.get)
    empty = frozenset()
    # global peak: C has both A and B as parents; the empty graph is a local peak
    assert {a for a, b in top if b == "C"} == {"A", "B"}
    assert _is_local_max(ds, BIC, Dag(ds.names), scores[empty])

    dag, score, _ = hill_climb(ds, BIC, PLAIN)
    assert not dag.arcs
    model, trace = greedy_search(ds, BIC, SearchParams(t0=5, t1=5))
    assert set(model.dag.parents("C")) == {"A", "B"}
    assert trace.score == pytest.approx(scores[top], rel=1e-12)
    tabu = [r for r in trace.records if r.phase == "tabu"]
    assert tabu and tabu[0].score_after <= tabu[0].score_before


def test_tabu_never_revisits_recent_dags():
    m = random_reference_model("gbn", 6, 1.0, seed=4)
    ds = sample(m, SampleSpec(300, 2))
    params = SearchParams(t0=30, t1=6)
    _, trace = greedy_search(ds, BIC, params)
    dag = Dag(ds.names)
    history = [dag.arcs]
    for r in trace.records:
        kind, a, _, b = r.move.split()
        dag = apply_move(dag, Move(MoveKind(kind), a, b))
        if r.phase == "tabu":
            assert dag.arcs not in history[-params.t1:]
        history.append(dag.arcs)


def test_restarts_keep_best_and_are_deterministic():
    ds = _xor(seed=1)
    hc = hill_climb(ds, BIC, PLAIN)[1]
    p = SearchParams(t0=0, r0=2, r1=3, seed=11)
    m1, t1 = greedy_search(ds, BIC, p)
    m2, t2 = greedy_search(ds, BIC, p)
    assert t1.score >= hc
    assert m1.dag == m2.dag
    assert [(r.phase, r.move) for r in t1.records] == [(r.phase, r.move) for r in t2.records]
    assert any(r.phase == "restart" for r in t1.records)


def test_degenerate_phases_equal_hill_climb():
    m = random_reference_model("clgbn", 7, 1.2, seed=6)
    ds = sample(m, SampleSpec(600, 3))
    dag, score, _ = hill_climb(ds, BIC, PLAIN)
    model, trace = greedy_search(ds, BIC, PLAIN)
    assert model.dag == dag and trace.score == score


def test_max_parents_passthrough():
    m = random_reference_model("gbn", 6, 2.0, seed=1)
    ds = sample(m, SampleSpec(2000, 1))
    model, _ = greedy_search(ds, BIC, SearchParams(max_parents=1))
    assert max(model.dag.in_degree(v) for v in model.nodes) <= 1


def test_pred_search_runs_and_refits_on_all_rows():
    m = random_reference_model("gbn", 5, 1.0, seed=3)
    ds = sample(m, SampleSpec(1000, 4))
    spec = ScoreSpec(ScoreKind.PRED, FitMethod.CLOSED2, SplitSpec(0.25, 0))
    model, trace = greedy_search(ds, spec, PLAIN)
    assert all(d.n == ds.n for d in model.distributions.values())


def test_search_params_validation():
    with pytest.raises(ValueError):
        SearchParams(t0=5, t1=0)
    with pytest.raises(ValueError):
        SearchParams(r0=1, r1=0)


def test_trace_csv(tmp_path):
    _, trace = greedy_search(_xor(500), BIC, SearchParams(t0=3))
    trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == ",".join(trace.FIELDS)
    assert len(lines) == len(trace.records) + 1
