"""DAGs, local moves, CPDAGs and structural Hamming distance."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import combinations


class GraphError(ValueError):
    """Illegal graph or move."""


class MoveKind(str, Enum):
    ADD = "add"
    DELETE = "delete"
    REVERSE = "reverse"


# tie-break order between move kinds
KIND_ORDER = {MoveKind.ADD: 0, MoveKind.DELETE: 1, MoveKind.REVERSE: 2}


@dataclass(frozen=True)
class Move:
    kind: MoveKind
    source: str
    target: str

    def __str__(self):
        return f"{self.kind.value} {self.source} -> {self.target}"

    def inverse(self) -> "Move":
        if self.kind is MoveKind.ADD:
            return Move(MoveKind.DELETE, self.source, self.target)
        if self.kind is MoveKind.DELETE:
            return Move(MoveKind.ADD, self.source, self.target)
        return Move(MoveKind.REVERSE, self.target, self.source)


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    arcs: frozenset

    def __init__(self, nodes, arcs=()):
        nodes = tuple(nodes)
        arcs = frozenset((str(a), str(b)) for a, b in arcs)
        known = set(nodes)
        if len(known) != len(nodes):
            raise GraphError("duplicate node names")
        for a, b in arcs:
            if a not in known or b not in known:
                raise GraphError(f"arc {a} -> {b} references an unknown node")
            if a == b:
                raise GraphError(f"self-loop on {a}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "arcs", arcs)
        if _find_cycle_order(nodes, arcs) is None:
            raise GraphError("arc set is cyclic")

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(a for a, b in self.arcs if b == node))

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(b for a, b in self.arcs if a == node))

    def in_degree(self, node: str) -> int:
        return sum(1 for _, b in self.arcs if b == node)

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(arc) for arc in self.arcs)

    def v_structures(self) -> frozenset:
        """Triples (a, c, b) with a -> c <- b, a < b and a, b non-adjacent."""
        adj = self.skeleton()
        out = set()
        for c in self.nodes:
            pa = self.parents(c)
            for a, b in combinations(pa, 2):
                if frozenset((a, b)) not in adj:
                    out.add((a, c, b))
        return frozenset(out)

    def sorted_arcs(self) -> list[tuple[str, str]]:
        return sorted(self.arcs)


def _find_cycle_order(nodes, arcs):
    """Topological order of ``arcs`` or None if cyclic."""
    indeg = {v: 0 for v in nodes}
    out = {v: [] for v in nodes}
    for a, b in arcs:
        indeg[b] += 1
        out[a].append(b)
    ready = [v for v in nodes if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return order if len(order) == len(nodes) else None


def _reachable(arcs, start: str, goal: str, skip=None) -> bool:
    out: dict[str, list[str]] = {}
    for a, b in arcs:
        if (a, b) != skip:
            out.setdefault(a, []).append(b)
    stack, seen = [start], {start}
    while stack:
        v = stack.pop()
        if v == goal:
            return True
        for w in out.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def _check_move(dag: Dag, move: Move) -> None:
    known = set(dag.nodes)
    if move.source not in known or move.target not in known:
        raise GraphError(f"move {move} references an unknown node")
    if move.source == move.target:
        raise GraphError(f"move {move} is a self-loop")
    arc = (move.source, move.target)
    if move.kind is MoveKind.ADD:
        if arc in dag.arcs:
            raise GraphError(f"arc {arc[0]} -> {arc[1]} already present")
    elif arc not in dag.arcs:
        raise GraphError(f"arc {arc[0]} -> {arc[1]} not present")


def would_create_cycle(dag: Dag, move: Move) -> bool:
    _check_move(dag, move)
    a, b = move.source, move.target
    if move.kind is MoveKind.ADD:
        return _reachable(dag.arcs, b, a)
    if move.kind is MoveKind.REVERSE:
        return _reachable(dag.arcs, a, b, skip=(a, b))
    return False


def apply_move(dag: Dag, move: Move) -> Dag:
    if would_create_cycle(dag, move):
        raise GraphError(f"move {move} creates a cycle")
    arc = (move.source, move.target)
    arcs = set(dag.arcs)
    if move.kind is MoveKind.ADD:
        arcs.add(arc)
    elif move.kind is MoveKind.DELETE:
        arcs.remove(arc)
    else:
        arcs.remove(arc)
        arcs.add((move.target, move.source))
    return Dag(dag.nodes, arcs)


@dataclass(frozen=True)
class Cpdag:
    nodes: tuple[str, ...]
    directed: frozenset
    undirected: frozenset  # of frozenset pairs

    def skeleton(self) -> frozenset:
        return frozenset(frozenset(a) for a in self.directed) | self.undirected

    def edge_status(self, a: str, b: str):
        """'->' / '<-' relative to (a, b), '--', or None when non-adjacent."""
        if (a, b) in self.directed:
            return "->"
        if (b, a) in self.directed:
            return "<-"
        if frozenset((a, b)) in self.undirected:
            return "--"
        return None


def cpdag_of(dag: Dag) -> Cpdag:
    """Orient v-structures, then apply Meek's rules 1-4 until nothing changes."""
    adj = {v: set() for v in dag.nodes}
    for a, b in dag.arcs:
        adj[a].add(b)
        adj[b].add(a)
    directed = set()
    for a, c, b in dag.v_structures():
        directed.add((a, c))
        directed.add((b, c))
    undirected = {frozenset(e) for e in dag.skeleton()} - {frozenset(e) for e in directed}

    def is_dir(a, b):
        return (a, b) in directed

    def is_und(a, b):
        return frozenset((a, b)) in undirected

    def orient(a, b):
        undirected.discard(frozenset((a, b)))
        directed.add((a, b))

    changed = True
    while changed:
        changed = False
        for e in sorted(undirected, key=sorted):
            x, y = sorted(e)
            for a, b in ((x, y), (y, x)):
                if not is_und(a, b):
                    break
                # R1: c -> a -- b, c and b non-adjacent
                r1 = any(is_dir(c, a) and b not in adj[c] and c != b for c in adj[a])
                # R2: a -> c -> b
                r2 = any(is_dir(a, c) and is_dir(c, b) for c in adj[a] & adj[b])
                # R3: a -- c1 -> b, a -- c2 -> b, c1 and c2 non-adjacent
                r3 = False
                cands = [c for c in adj[a] & adj[b] if is_und(a, c) and is_dir(c, b)]
                for c1, c2 in combinations(cands, 2):
                    if c2 not in adj[c1]:
                        r3 = True
                        break
                # R4: a -- c, c -> d -> b, a adjacent to d, c and b non-adjacent
                r4 = False
                if not (r1 or r2 or r3):
                    for d in adj[b] & adj[a]:
                        if not is_dir(d, b):
                            continue
                        for c in adj[a]:
                            if is_und(a, c) and is_dir(c, d) and b not in adj[c] and c != b:
                                r4 = True
                                break
                        if r4:
                            break
                if r1 or r2 or r3 or r4:
                    orient(a, b)
                    changed = True
                    break
    return Cpdag(dag.nodes, frozenset(directed), frozenset(undirected))


def shd(a: Cpdag, b: Cpdag) -> int:
    if set(a.nodes) != set(b.nodes):
        raise GraphError("CPDAGs are defined over different node sets")
    pairs = a.skeleton() | b.skeleton()
    dist = 0
    for pair in pairs:
        u, v = sorted(pair)
        if a.edge_status(u, v) != b.edge_status(u, v):
            dist += 1
    return dist


def format_arcs(graph) -> str:
    """Arc-list text: 'a -> b', 'a -- b', and bare names for isolated nodes."""
    lines = []
    touched = set()
    if isinstance(graph, Cpdag):
        for a, b in graph.directed:
            lines.append(f"{a} -> {b}")
            touched.update((a, b))
        for e in graph.undirected:
            a, b = sorted(e)
            lines.append(f"{a} -- {b}")
            touched.update((a, b))
    else:
        for a, b in graph.arcs:
            lines.append(f"{a} -> {b}")
            touched.update((a, b))
    lines.extend(v for v in graph.nodes if v not in touched)
    return "".join(line + "\n" for line in sorted(lines))


def parse_arcs(text: str, nodes=None):
    """Parse arc-list text into a Dag, or a Cpdag when any '--' line is present."""
    directed, undirected, seen = [], [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " -> " in line:
            a, b = (s.strip() for s in line.split(" -> ", 1))
            directed.append((a, b))
            seen += [a, b]
        elif " -- " in line:
            a, b = (s.strip() for s in line.split(" -- ", 1))
            undirected.append(frozenset((a, b)))
            seen += [a, b]
        else:
            seen.append(line)
    if nodes is None:
        nodes = sorted(set(seen))
    else:
        missing = set(seen) - set(nodes)
        if missing:
            raise GraphError(f"unknown nodes in arc list: {sorted(missing)}")
    if undirected:
        return Cpdag(tuple(nodes), frozenset(directed), frozenset(undirected))
    return Dag(nodes, directed)


def all_dags(nodes) -> list[Dag]:
    """Every DAG over ``nodes`` (exhaustive; small node sets only)."""
    nodes = tuple(nodes)
    pairs = list(combinations(nodes, 2))
    out = []
    for mask in range(3 ** len(pairs)):
        arcs = []
        m = mask
        for a, b in pairs:
            m, r = divmod(m, 3)
            if r == 1:
                arcs.append((a, b))
            elif r == 2:
                arcs.append((b, a))
        if _find_cycle_order(nodes, arcs) is not None:
            out.append(Dag(nodes, arcs))
    return out
