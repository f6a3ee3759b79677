"""Exact EPT-sum by dynamic programming, plus tree supplies for experiments.

The solver memoises over connected vertex subsets encoded as bitmasks.  In
a tree, removing an edge from a connected subset ``S`` leaves ``S & A`` and
``S & B`` where ``A``/``B`` are the two sides of that edge in the whole
tree, so each split is two AND operations.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Optional, Sequence

import numpy as np

from .ept import Ept
from .tree import InputTree, check_weight

HARD_CAP = 64
DEFAULT_CAP = 20


class OracleCapError(ValueError):
    """The tree is larger than the exact solver is allowed to handle."""


def _edge_sides(g: InputTree) -> list[tuple[int, int, int, int, int, int]]:
    """Per canonical edge: (u, v, mask of both ends, u-side mask, v-side mask, x_e)."""
    n = g.n
    full = (1 << n) - 1
    parent = [-1] * n
    order = [0]
    for v in order:
        for x in g.adj[v]:
            if x != parent[v]:
                parent[x] = v
                order.append(x)
    below = [1 << v for v in range(n)]
    for v in reversed(order[1:]):
        below[parent[v]] |= below[v]
    out = []
    for u, v in g.edges:
        child = v if parent[v] == u else u
        side_child = below[child]
        side_u = side_child if child == u else full ^ side_child
        out.append((u, v, (1 << u) | (1 << v), side_u, full ^ side_u, g.edge_weight((u, v))))
    return out


def _low_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def optimal_ept_sum(g: InputTree, cap: int = DEFAULT_CAP) -> tuple[int, Ept]:
    """Minimum EPT-sum over all EPTs of ``g`` and one EPT attaining it.

    ``OPT(S) = 0`` for a single vertex, else the minimum over edges ``e`` of
    ``G[S]`` of ``x_e * w(S) + OPT(S1) + OPT(S2)``.  Equal costs keep the
    smallest canonical root edge.
    """
    n = g.n
    if n > min(cap, HARD_CAP):
        raise OracleCapError(f"exact solver capped at n <= {min(cap, HARD_CAP)}, tree has {n} vertices")
    sides = _edge_sides(g)
    w = g.weights
    # mask -> (cost, weight, index of best edge)
    memo: dict[int, tuple[int, int, int]] = {1 << v: (0, w[v], -1) for v in range(n)}

    def solve(s: int) -> tuple[int, int, int]:
        hit = memo.get(s)
        if hit is not None:
            return hit
        best = -1
        best_cost = 0
        weight = 0
        for i, (_, _, ends, side_u, side_v, x) in enumerate(sides):
            if s & ends == ends:
                c1, w1, _ = solve(s & side_u)
                c2, w2, _ = solve(s & side_v)
                weight = w1 + w2
                cost = x * weight + c1 + c2
                if best < 0 or cost < best_cost:
                    best, best_cost = i, cost
        memo[s] = r = (best_cost, weight, best)
        return r

    full = (1 << n) - 1
    cost = check_weight(solve(full)[0])

    vertex: list[int] = []
    edges: list = []
    left: list[int] = []
    right: list[int] = []

    def emit(s: int) -> int:
        x = len(vertex)
        left.append(-1)
        right.append(-1)
        if s & (s - 1) == 0:
            vertex.append(_low_bit(s))
            edges.append(None)
            return x
        u, v, _, side_u, side_v, _ = sides[memo[s][2]]
        vertex.append(-1)
        edges.append((u, v))
        a, b = s & side_u, s & side_v
        if _low_bit(a) > _low_bit(b):
            a, b = b, a
        left[x] = emit(a)
        right[x] = emit(b)
        return x

    root = emit(full)
    return cost, Ept(vertex, edges, left, right, root)


def enumerate_epts(g: InputTree, limit: int = 12) -> Iterator[Ept]:
    """Every EPT of ``g`` in canonical child order.  Count explodes; ``n <= limit``."""
    if g.n > limit:
        raise OracleCapError(f"EPT enumeration capped at n <= {limit}")
    sides = _edge_sides(g)
    shapes: dict[int, list] = {}

    def all_shapes(s: int) -> list:
        got = shapes.get(s)
        if got is not None:
            return got
        if s & (s - 1) == 0:
            out = [_low_bit(s)]
        else:
            out = []
            for u, v, ends, side_u, side_v, _ in sides:
                if s & ends == ends:
                    a, b = s & side_u, s & side_v
                    if _low_bit(a) > _low_bit(b):
                        a, b = b, a
                    for la in all_shapes(a):
                        for rb in all_shapes(b):
                            out.append(((u, v), la, rb))
        shapes[s] = out
        return out

    for shape in all_shapes((1 << g.n) - 1):
        vertex, edges, left, right = [], [], [], []
        stack = [(shape, -1, 0)]
        while stack:
            sh, parent, side = stack.pop()
            x = len(vertex)
            left.append(-1)
            right.append(-1)
            if isinstance(sh, int):
                vertex.append(sh)
                edges.append(None)
            else:
                vertex.append(-1)
                edges.append(sh[0])
                stack.append((sh[2], x, 1))
                stack.append((sh[1], x, 0))
            if parent >= 0:
                (left if side == 0 else right)[parent] = x
        yield Ept(vertex, edges, left, right, 0)


# -- tree supply -----------------------------------------------------------

def prufer_decode(seq: Sequence[int], n: int) -> InputTree:
    """Labelled tree on ``n`` vertices for a Prüfer sequence of length ``n - 2``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n == 1:
        if len(seq):
            raise ValueError("a single vertex has an empty Prüfer sequence")
        return InputTree(1, [])
    if len(seq) != n - 2:
        raise ValueError(f"Prüfer sequence for n={n} must have length {n - 2}, got {len(seq)}")
    degree = [1] * n
    for x in seq:
        if not 0 <= x < n:
            raise ValueError(f"Prüfer entry {x} out of range [0, {n})")
        degree[x] += 1
    edges = []
    ptr = degree.index(1)
    leaf = ptr
    for x in seq:
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1 and x < ptr:
            leaf = x
        else:
            ptr += 1
            while degree[ptr] != 1:
                ptr += 1
            leaf = ptr
    edges.append((leaf, n - 1))
    return InputTree(n, edges)


def labeled_tree_at(n: int, rank: int) -> InputTree:
    """The ``rank``-th tree in lexicographic Prüfer order."""
    seq = []
    for _ in range(n - 2):
        rank, d = divmod(rank, n)
        seq.append(d)
    seq.reverse()
    return prufer_decode(seq, n)


def enumerate_labeled_trees(n: int) -> Iterator[InputTree]:
    """All ``n ** (n - 2)`` labelled trees, in lexicographic Prüfer order."""
    if not 2 <= n <= 9:
        raise ValueError("exhaustive enumeration supports 2 <= n <= 9")
    for seq in itertools.product(range(n), repeat=n - 2):
        yield prufer_decode(seq, n)


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & ((1 << 64) - 1))


def random_tree(n: int, seed: int) -> InputTree:
    """Uniform labelled tree via a uniform random Prüfer sequence."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n <= 2:
        return prufer_decode([], n)
    seq = _rng(seed).integers(0, n, size=n - 2).tolist()
    return prufer_decode(seq, n)


def random_weights(g: InputTree, lo: int, hi: int, seed: int) -> InputTree:
    """Copy of ``g`` with independent uniform vertex weights in ``[lo, hi]``."""
    if lo < 1:
        raise ValueError("lower weight bound must be at least 1; build zero weights explicitly")
    if hi < lo:
        raise ValueError("empty weight range")
    check_weight(hi)
    weights = _rng(seed).integers(lo, hi, size=g.n, endpoint=True, dtype=np.uint64).tolist()
    return g.with_weights(weights)


def zero_mass_weights(g: InputTree, hi: int, seed: int, zero_fraction: Optional[float] = None) -> InputTree:
    """Weights in ``[0, hi]`` with a forced share of zero-weight vertices.

    Roughly ``zero_fraction`` of the vertices (random in [0.2, 0.8] when not
    given) get weight 0; the rest draw from ``[1, hi]``.  At least one vertex
    keeps positive weight.
    """
    if hi < 1:
        raise ValueError("upper weight bound must be at least 1")
    rng = _rng(seed)
    frac = rng.uniform(0.2, 0.8) if zero_fraction is None else zero_fraction
    weights = rng.integers(1, hi, size=g.n, endpoint=True, dtype=np.uint64).tolist()
    zero = rng.random(g.n) < frac
    keep = int(rng.integers(0, g.n))
    weights = [0 if z and i != keep else x for i, (x, z) in enumerate(zip(weights, zero))]
    return g.with_weights(weights)
