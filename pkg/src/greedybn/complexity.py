"""Exact operation counts for local fits and whole greedy searches.

Every count is the literal sum of the cost terms of the corresponding
estimator (nothing asymptotic is dropped), evaluated in exact arithmetic:
results are ``int`` when integral and ``Fraction`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

NODE_CLASSES = ("discrete", "gbn_qr", "gbn_closed", "clg_qr", "clg_closed")
NETWORK_CLASSES = ("discrete", "gbn", "clgbn")


@dataclass(frozen=True)
class CostParams:
    n: int = 0
    j: int = 0                 # continuous parents (all parents for discrete nodes)
    D: int = 0                 # discrete parents
    l: int = 2                 # levels per discrete variable
    N: int = 0
    M: int = 0                 # Gaussian nodes (clgbn)
    degrees: tuple = ()        # in-degrees of discrete / Gaussian nodes
    discrete_parents: tuple = ()   # D_i per Gaussian node (clgbn)
    continuous_parents: tuple = ()  # G_i per Gaussian node (clgbn)
    c: float | None = None
    b: int | None = None
    t0: int = 0
    r0: int = 0
    r1: int = 0

    def __post_init__(self):
        for name in ("n", "j", "D", "l", "N", "M", "t0", "r0", "r1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for seq in (self.degrees, self.discrete_parents, self.continuous_parents):
            if any(d < 0 for d in seq):
                raise ValueError("parent counts must be non-negative")
        if self.c is not None and self.c < 0:
            raise ValueError("c must be non-negative")


def _exact(x):
    x = Fraction(x)
    return int(x) if x.denominator == 1 else x


def node_cost(cls: str, p: CostParams):
    """Operations to fit one local distribution (see the module docstring)."""
    n, j, l, D = p.n, p.j, p.l, p.D
    if cls == "discrete":
        k = j + D
        return n * (1 + k) + l ** (1 + k)
    if cls == "gbn_qr":
        return n * (1 + j) ** 2 + n * (1 + j) + (1 + j) ** 2 + n * (1 + j) + 3 * n
    if cls in ("gbn_closed", "clg_closed"):
        return _exact(Fraction(n * (1 + j) ** 2, 2) + n * (1 + j) + 3 * n)
    if cls == "clg_qr":
        return (n + l ** D) * (1 + j) ** 2 + 2 * n * (1 + j) + 3 * n
    raise ValueError(f"unknown node class {cls!r}; expected one of {NODE_CLASSES}")


def _cost(cls, n, l, j=0, D=0):
    return node_cost(cls, CostParams(n=n, j=j, D=D, l=l))


def _check_degrees(p: CostParams, count: int):
    if len(p.degrees) != count:
        raise ValueError(f"expected {count} in-degrees, got {len(p.degrees)}")
    if p.c is not None and Fraction(sum(p.degrees)) != Fraction(p.c) * count:
        raise ValueError("degree sequence does not sum to c * N")


def total_cost(cls: str, p: CostParams, estimator: str = "qr"):
    """Cost of a greedy search that adds every node's parents one at a time.

    Node ``i`` with ``d_i`` parents takes ``d_i + 1`` passes; pass ``j``
    refits the node once per candidate, with ``j`` parents in the fit. In
    ``clgbn`` the discrete nodes only consider the other ``N - M - 1``
    discrete nodes. A Gaussian node with ``D_i`` discrete and ``G_i``
    continuous parents adds the discrete ones first: in pass ``j <= D_i``
    a discrete candidate costs a fit with ``D = j`` and no regressors, a
    continuous candidate one with ``D = j`` and one regressor; afterwards
    (``g = j - D_i``) continuous candidates cost ``D = D_i`` with ``g``
    regressors and discrete candidates ``D = D_i`` with none.
    """
    n, l, N = p.n, p.l, p.N
    if cls == "discrete":
        _check_degrees(p, N)
        total = sum((N - 1) * _cost("discrete", n, l, j=j)
                    for d in p.degrees for j in range(1, d + 2))
        return _exact(total)
    if cls == "gbn":
        node = "gbn_" + ("closed" if estimator != "qr" else "qr")
        _check_degrees(p, N)
        total = sum((N - 1) * Fraction(_cost(node, n, l, j=j))
                    for d in p.degrees for j in range(1, d + 2))
        return _exact(total)
    if cls == "clgbn":
        M = p.M
        if not 0 < M < N:
            raise ValueError("clgbn needs 0 < M < N Gaussian nodes")
        _check_degrees_clg(p)
        node = "clg_" + ("closed" if estimator != "qr" else "qr")
        total = Fraction(0)
        for d in p.degrees:
            for j in range(1, d + 2):
                total += (N - M - 1) * _cost("discrete", n, l, j=j)
        for Di, Gi in zip(p.discrete_parents, p.continuous_parents):
            for j in range(1, Di + 1):
                total += (N - M) * Fraction(_cost(node, n, l, j=0, D=j))
                total += (M - 1) * Fraction(_cost(node, n, l, j=1, D=j))
            for g in range(1, Gi + 2):
                total += (N - M) * Fraction(_cost(node, n, l, j=0, D=Di))
                total += (M - 1) * Fraction(_cost(node, n, l, j=g, D=Di))
        return _exact(total)
    raise ValueError(f"unknown network class {cls!r}; expected one of {NETWORK_CLASSES}")


def _check_degrees_clg(p: CostParams):
    M, N = p.M, p.N
    if len(p.degrees) != N - M:
        raise ValueError(f"expected {N - M} discrete in-degrees, got {len(p.degrees)}")
    if len(p.discrete_parents) != M or len(p.continuous_parents) != M:
        raise ValueError(f"expected D_i and G_i for {M} Gaussian nodes")
    if any(d > N - M - 1 for d in p.degrees) or any(d > N - M for d in p.discrete_parents):
        raise ValueError("more discrete parents than discrete nodes")
    if p.c is not None:
        arcs = sum(p.degrees) + sum(p.discrete_parents) + sum(p.continuous_parents)
        if Fraction(arcs) != Fraction(p.c) * N:
            raise ValueError("degree sequence does not sum to c * N")


def naive_move_count(p: CostParams):
    """Move evaluations of an uncached search: c N^3 + (t0 + r0 (r1 + t0)) N^2."""
    if p.c is None:
        raise ValueError("naive_move_count needs c")
    N = p.N
    return _exact(Fraction(p.c) * N ** 3 + (p.t0 + p.r0 * (p.r1 + p.t0)) * N ** 2)
