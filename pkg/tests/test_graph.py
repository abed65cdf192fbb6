import itertools
import random

import pytest

from greedybn.graph import (
    Cpdag, Dag, GraphError, Move, MoveKind, all_dags, apply_move, cpdag_of,
    format_arcs, parse_arcs, shd, would_create_cycle,
)

ADD, DELETE, REVERSE = MoveKind.ADD, MoveKind.DELETE, MoveKind.REVERSE


def _acyclic(nodes, arcs):
    # brute force: some permutation is a topological order
    for perm in itertools.permutations(nodes):
        rank = {v: k for k, v in enumerate(perm)}
        if all(rank[a] < rank[b] for a, b in arcs):
            return True
    return False


def _enumerate(nodes):
    pairs = list(itertools.combinations(nodes, 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        arcs = [(a, b) if c == 1 else (b, a) for (a, b), c in zip(pairs, choice) if c]
        if _acyclic(nodes, arcs):
            out.append(frozenset(arcs))
    return out


def _class_key(arcs):
    skel = frozenset(frozenset(a) for a in arcs)
    vs = set()
    for a, c in arcs:
        for b, c2 in arcs:
            if c2 == c and a < b and frozenset((a, b)) not in skel:
                vs.add((a, c, b))
    return skel, frozenset(vs)


def _oracle_cpdags(nodes):
    """Essential graphs by brute force: an edge is directed iff every member
    of the equivalence class orients it the same way."""
    classes = {}
    for arcs in _enumerate(nodes):
        classes.setdefault(_class_key(arcs), []).append(arcs)
    out = {}
    for key, members in classes.items():
        directed = frozenset.intersection(*members)
        undirected = frozenset(frozenset(a) for a in members[0]) - {frozenset(a) for a in directed}
        for arcs in members:
            out[arcs] = (directed, undirected)
    return out


@pytest.mark.parametrize("nodes", [("A", "B", "C"), ("A", "B", "C", "D")])
def test_cpdag_matches_bruteforce_classes(nodes):
    oracle = _oracle_cpdags(nodes)
    assert len(oracle) == {3: 25, 4: 543}[len(nodes)]
    for arcs, (directed, undirected) in oracle.items():
        c = cpdag_of(Dag(nodes, arcs))
        assert c.directed == directed, sorted(arcs)
        assert c.undirected == undirected, sorted(arcs)


def test_all_dags_count():
    assert len(all_dags("ABC")) == 25
    assert {d.arcs for d in all_dags("ABC")} == set(_enumerate(("A", "B", "C")))


def test_equal_cpdag_iff_equivalent():
    dags = all_dags("ABC")
    for g1, g2 in itertools.product(dags, repeat=2):
        same = (g1.skeleton(), g1.v_structures()) == (g2.skeleton(), g2.v_structures())
        assert (cpdag_of(g1) == cpdag_of(g2)) == same


def test_cpdag_examples():
    chain = cpdag_of(Dag("ABC", [("A", "B"), ("B", "C")]))
    assert not chain.directed and len(chain.undirected) == 2
    collider = cpdag_of(Dag("ABC", [("A", "C"), ("B", "C")]))
    assert collider.directed == {("A", "C"), ("B", "C")}
    single = cpdag_of(Dag("AB", [("A", "B")]))
    assert single.undirected == {frozenset("AB")}


def test_skeleton_preserved():
    for g in all_dags("ABCD"):
        assert cpdag_of(g).skeleton() == g.skeleton()


def _shd_oracle(c1, c2, nodes):
    def status(c, a, b):
        if (a, b) in c[0]:
            return 1
        if (b, a) in c[0]:
            return 2
        return 3 if frozenset((a, b)) in c[1] else 0
    return sum(status(c1, a, b) != status(c2, a, b) for a, b in itertools.combinations(nodes, 2))


def test_shd_examples():
    ab, ba, empty = (cpdag_of(Dag("ABC", arcs)) for arcs in ([("A", "B")], [("B", "A")], []))
    assert shd(ab, ba) == 0
    assert shd(ab, empty) == 1
    col = cpdag_of(Dag("ABC", [("A", "C"), ("B", "C")]))
    ac = cpdag_of(Dag("ABC", [("A", "C")]))
    assert shd(col, ac) == 2


def test_shd_exhaustive_three_nodes():
    nodes = ("A", "B", "C")
    oracle = _oracle_cpdags(nodes)
    dags = list(oracle)
    cp = {arcs: cpdag_of(Dag(nodes, arcs)) for arcs in dags}
    for g1, g2 in itertools.product(dags, repeat=2):
        d = shd(cp[g1], cp[g2])
        assert d == _shd_oracle(oracle[g1], oracle[g2], nodes)
        assert d == shd(cp[g2], cp[g1])
        assert (d == 0) == (cp[g1] == cp[g2])
    for g1, g2, g3 in itertools.product(dags, repeat=3):
        assert shd(cp[g1], cp[g3]) <= shd(cp[g1], cp[g2]) + shd(cp[g2], cp[g3])


def test_shd_node_mismatch():
    with pytest.raises(GraphError):
        shd(cpdag_of(Dag("AB")), cpdag_of(Dag("ABC")))


def test_would_create_cycle_examples():
    assert would_create_cycle(Dag("AB", [("A", "B")]), Move(ADD, "B", "A"))
    chain = Dag("ABC", [("A", "B"), ("B", "C")])
    assert not would_create_cycle(chain, Move(ADD, "A", "C"))
    tri = Dag("ABC", [("A", "B"), ("B", "C"), ("A", "C")])
    assert would_create_cycle(tri, Move(REVERSE, "A", "C"))
    assert not would_create_cycle(tri, Move(DELETE, "A", "C"))
    with pytest.raises(GraphError):
        would_create_cycle(chain, Move(ADD, "A", "Z"))


def test_would_create_cycle_against_bruteforce():
    rnd = random.Random(5)
    nodes = tuple("ABCDE")
    for _ in range(200):
        arcs = set()
        order = list(nodes)
        rnd.shuffle(order)
        for a, b in itertools.combinations(order, 2):
            if rnd.random() < 0.4:
                arcs.add((a, b))
        dag = Dag(nodes, arcs)
        for a, b in itertools.permutations(nodes, 2):
            if (a, b) in arcs:
                new = arcs - {(a, b)} | {(b, a)}
                assert would_create_cycle(dag, Move(REVERSE, a, b)) == (not _acyclic(nodes, new))
            elif (b, a) not in arcs:
                assert would_create_cycle(dag, Move(ADD, a, b)) == (not _acyclic(nodes, arcs | {(a, b)}))


def test_apply_move_examples_and_inverse():
    empty = Dag("AB")
    ab = apply_move(empty, Move(ADD, "A", "B"))
    assert ab.arcs == {("A", "B")}
    assert apply_move(ab, Move(REVERSE, "A", "B")).arcs == {("B", "A")}
    assert apply_move(ab, Move(DELETE, "A", "B")).arcs == frozenset()
    for m in (Move(DELETE, "A", "B"), Move(REVERSE, "A", "B")):
        assert apply_move(apply_move(ab, m), m.inverse()) == ab


@pytest.mark.parametrize("dag,move", [
    (Dag("AB", [("A", "B")]), Move(ADD, "A", "B")),
    (Dag("AB", [("A", "B")]), Move(ADD, "B", "A")),
    (Dag("AB"), Move(DELETE, "A", "B")),
    (Dag("AB"), Move(REVERSE, "A", "B")),
])
def test_illegal_moves(dag, move):
    with pytest.raises(GraphError):
        apply_move(dag, move)


def test_dag_invariants():
    with pytest.raises(GraphError):
        Dag("AB", [("A", "A")])
    with pytest.raises(GraphError):
        Dag("AB", [("A", "B"), ("B", "A")])
    d = Dag("ABC", [("A", "C"), ("B", "C")])
    assert d.parents("C") == ("A", "B")
    assert sum(d.in_degree(v) for v in d.nodes) == len(d.arcs)


def test_arc_text_roundtrip():
    dag = Dag("ABCD", [("B", "C"), ("A", "C")])
    text = format_arcs(dag)
    assert text == "A -> C\nB -> C\nD\n"
    assert parse_arcs(text) == dag
    cp = cpdag_of(Dag("ABC", [("A", "B")]))
    assert format_arcs(cp) == "A -- B\nC\n"
    back = parse_arcs(format_arcs(cp))
    assert isinstance(back, Cpdag) and back == cp
    with pytest.raises(GraphError):
        parse_arcs("A -> Z\n", nodes=("A", "B"))
