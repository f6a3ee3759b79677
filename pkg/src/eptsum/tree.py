"""Vertex-weighted input trees: parsing, validation and cut queries.

Vertices are dense 0-based integers.  Edges are canonical ``(u, v)`` tuples
with ``u < v``; that order is also the tie-break order for balanced edges.
All weights are exact Python integers bounded to the unsigned 64-bit range.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional

import numpy as np

U64_MAX = (1 << 64) - 1

Edge = tuple[int, int]


class InvalidTreeError(ValueError):
    """The input does not describe a valid vertex-weighted tree."""


class TreeSyntaxError(InvalidTreeError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class WeightOverflowError(OverflowError):
    """A weight or a sum of weights left the unsigned 64-bit range."""


def checked_add(a: int, b: int) -> int:
    s = a + b
    if s > U64_MAX:
        raise WeightOverflowError(f"weight sum {a} + {b} exceeds 2**64 - 1")
    return s


def check_weight(value: int) -> int:
    """Raise unless ``value`` fits in an unsigned 64-bit integer."""
    if value > U64_MAX:
        raise WeightOverflowError(f"weight {value} exceeds 2**64 - 1")
    return value


def canonical(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class InputTree:
    """An immutable unrooted tree with vertex weights and optional edge weights.

    Construction validates everything: ``n - 1`` distinct edges forming a
    connected graph, weights in range, and a positive total vertex weight.
    """

    __slots__ = ("n", "edges", "adj", "weights", "edge_weights", "total_weight", "__dict__")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]],
        weights: Optional[Iterable[int]] = None,
        edge_weights: Optional[Mapping[tuple[int, int], int]] = None,
    ):
        if not isinstance(n, int) or n < 1:
            raise InvalidTreeError(f"vertex count must be a positive integer, got {n!r}")
        adj: list[list[int]] = [[] for _ in range(n)]
        seen: set[Edge] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidTreeError(f"edge ({u}, {v}) has a vertex outside [0, {n})")
            if u == v:
                raise InvalidTreeError(f"self-loop at vertex {u}")
            e = canonical(u, v)
            if e in seen:
                raise InvalidTreeError(f"duplicate edge {e}")
            seen.add(e)
            adj[u].append(v)
            adj[v].append(u)
        if len(seen) != n - 1:
            raise InvalidTreeError(f"a tree on {n} vertices needs {n - 1} edges, got {len(seen)}")
        # n - 1 edges plus connectivity rules out cycles
        reached = bytearray(n)
        reached[0] = 1
        stack = [0]
        count = 1
        while stack:
            v = stack.pop()
            for x in adj[v]:
                if not reached[x]:
                    reached[x] = 1
                    count += 1
                    stack.append(x)
        if count != n:
            raise InvalidTreeError(f"edge set is disconnected ({count} of {n} vertices reachable from 0)")

        if weights is None:
            w = (1,) * n
        else:
            w = tuple(weights)
            if len(w) != n:
                raise InvalidTreeError(f"expected {n} vertex weights, got {len(w)}")
            for i, x in enumerate(w):
                if not isinstance(x, (int, np.integer)) or isinstance(x, bool):
                    raise InvalidTreeError(f"weight of vertex {i} is not an integer: {x!r}")
                if x < 0:
                    raise InvalidTreeError(f"weight of vertex {i} is negative")
                check_weight(x)
            w = tuple(int(x) for x in w)
        total = sum(w)
        if total > U64_MAX:
            raise WeightOverflowError(f"total vertex weight {total} exceeds 2**64 - 1")
        if total == 0:
            raise InvalidTreeError("total vertex weight must be positive")

        ew: Optional[dict[Edge, int]] = None
        if edge_weights:
            ew = {}
            for (u, v), x in edge_weights.items():
                e = canonical(u, v)
                if e not in seen:
                    raise InvalidTreeError(f"edge weight given for non-edge {e}")
                if not isinstance(x, (int, np.integer)) or isinstance(x, bool) or x < 1:
                    raise InvalidTreeError(f"edge weight of {e} must be an integer >= 1")
                ew[e] = int(check_weight(x))
            if all(x == 1 for x in ew.values()):
                ew = None

        self.n = n
        self.edges: tuple[Edge, ...] = tuple(sorted(seen))
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(a)) for a in adj)
        self.weights: tuple[int, ...] = w
        self.edge_weights = ew
        self.total_weight = total

    def __repr__(self) -> str:
        return f"InputTree(n={self.n}, total_weight={self.total_weight})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, InputTree):
            return NotImplemented
        return (
            self.n == other.n
            and self.edges == other.edges
            and self.weights == other.weights
            and (self.edge_weights or {}) == (other.edge_weights or {})
        )

    def __hash__(self) -> int:
        return hash((self.n, self.edges, self.weights))

    @property
    def unit_weights(self) -> bool:
        return all(x == 1 for x in self.weights)

    def edge_weight(self, e: Edge) -> int:
        if self.edge_weights is None:
            return 1
        return self.edge_weights.get(e, 1)

    def has_edge(self, u: int, v: int) -> bool:
        if not (0 <= u < self.n and 0 <= v < self.n):
            return False
        return v in self.adj[u]

    def with_weights(self, weights: Iterable[int]) -> "InputTree":
        return InputTree(self.n, self.edges, weights, self.edge_weights)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacency as ``(indptr, indices)`` int64 arrays, neighbours ascending."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum([len(a) for a in self.adj], out=indptr[1:])
        indices = np.fromiter(
            (x for a in self.adj for x in a), dtype=np.int64, count=2 * (self.n - 1)
        )
        return indptr, indices


# -- text format -----------------------------------------------------------

def parse_tree(text: str) -> InputTree:
    """Parse the line-oriented tree format.

    ``tree <n>`` first, then ``edge <u> <v>`` lines, then optional
    ``weight <v> <w>`` and ``eweight <u> <v> <x>`` lines.  ``#`` starts a
    comment line.
    """
    n: Optional[int] = None
    edges: list[Edge] = []
    edge_lines: dict[Edge, int] = {}
    weights: Optional[list[int]] = None
    weight_lines: dict[int, int] = {}
    eweights: dict[Edge, int] = {}
    eweight_lines: dict[Edge, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        try:
            nums = [int(a) for a in args]
        except ValueError:
            raise TreeSyntaxError(lineno, f"expected integers after {key!r}") from None
        if n is None:
            if key != "tree" or len(nums) != 1:
                raise TreeSyntaxError(lineno, "first line must be 'tree <n>'")
            n = nums[0]
            if n < 1:
                raise TreeSyntaxError(lineno, "vertex count must be at least 1")
            weights = [1] * n
            continue
        if key == "edge":
            if len(nums) != 2:
                raise TreeSyntaxError(lineno, "expected 'edge <u> <v>'")
            u, v = nums
            if not (0 <= u < n and 0 <= v < n):
                raise TreeSyntaxError(lineno, f"vertex index out of range [0, {n})")
            if u == v:
                raise TreeSyntaxError(lineno, f"self-loop at vertex {u}")
            e = canonical(u, v)
            if e in edge_lines:
                raise TreeSyntaxError(lineno, f"duplicate edge {u} {v} (first on line {edge_lines[e]})")
            if len(edges) == n - 1:
                raise TreeSyntaxError(lineno, f"too many edges: a tree on {n} vertices has exactly {n - 1}")
            edge_lines[e] = lineno
            edges.append(e)
        elif key == "weight":
            if len(nums) != 2:
                raise TreeSyntaxError(lineno, "expected 'weight <v> <w>'")
            v, x = nums
            if not 0 <= v < n:
                raise TreeSyntaxError(lineno, f"vertex index out of range [0, {n})")
            if v in weight_lines:
                raise TreeSyntaxError(lineno, f"weight of vertex {v} already set on line {weight_lines[v]}")
            if x < 0:
                raise TreeSyntaxError(lineno, "vertex weights must be non-negative")
            if x > U64_MAX:
                raise WeightOverflowError(f"line {lineno}: weight {x} exceeds 2**64 - 1")
            weight_lines[v] = lineno
            weights[v] = x
        elif key == "eweight":
            if len(nums) != 3:
                raise TreeSyntaxError(lineno, "expected 'eweight <u> <v> <x>'")
            u, v, x = nums
            e = canonical(u, v)
            if e in eweight_lines:
                raise TreeSyntaxError(lineno, f"weight of edge {u} {v} already set on line {eweight_lines[e]}")
            if x < 1:
                raise TreeSyntaxError(lineno, "edge weights must be at least 1")
            if x > U64_MAX:
                raise WeightOverflowError(f"line {lineno}: edge weight {x} exceeds 2**64 - 1")
            eweight_lines[e] = lineno
            eweights[e] = x
        else:
            raise TreeSyntaxError(lineno, f"unknown directive {key!r}")

    if n is None:
        raise TreeSyntaxError(1, "missing 'tree <n>' header")
    for e, lineno in eweight_lines.items():
        if e not in edge_lines:
            raise TreeSyntaxError(lineno, f"eweight refers to non-edge {e[0]} {e[1]}")
    return InputTree(n, edges, weights, eweights or None)


def format_tree(tree: InputTree) -> str:
    """Serialize to the text format; edges in canonical order, unit weights omitted."""
    lines = [f"tree {tree.n}"]
    lines.extend(f"edge {u} {v}" for u, v in tree.edges)
    lines.extend(f"weight {v} {w}" for v, w in enumerate(tree.weights) if w != 1)
    if tree.edge_weights:
        lines.extend(
            f"eweight {u} {v} {x}" for (u, v), x in sorted(tree.edge_weights.items()) if x != 1
        )
    return "\n".join(lines) + "\n"


# -- restricted queries ------------------------------------------------------

@dataclass(frozen=True)
class CutResult:
    edge: Edge
    side_u_weight: int
    side_v_weight: int

    @property
    def max_side(self) -> int:
        return max(self.side_u_weight, self.side_v_weight)


def _members(tree: InputTree, restriction: Optional[Iterable[int]]) -> Optional[set[int]]:
    if restriction is None:
        return None
    s = restriction if isinstance(restriction, (set, frozenset)) else set(restriction)
    for v in s:
        if not 0 <= v < tree.n:
            raise InvalidTreeError(f"restriction vertex {v} out of range")
    return s


def _walk(tree: InputTree, members: Optional[set[int]], start: int) -> tuple[list[int], dict[int, int]]:
    """BFS order and parent map of the restricted subtree, rooted at ``start``."""
    adj = tree.adj
    order = [start]
    parent = {start: -1}
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        p = parent[v]
        for x in adj[v]:
            if x != p and (members is None or x in members):
                parent[x] = v
                order.append(x)
    size = tree.n if members is None else len(members)
    if len(order) != size:
        raise InvalidTreeError("restriction does not induce a connected subtree")
    return order, parent


def _subtree_weights(tree: InputTree, order: list[int], parent: dict[int, int]) -> dict[int, int]:
    w = tree.weights
    sub = {v: w[v] for v in order}
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            sub[p] += sub[v]
    return sub


def restricted_cuts(tree: InputTree, restriction: Optional[Iterable[int]] = None) -> list[CutResult]:
    """Side weights for every edge of the restricted subtree, in canonical edge order."""
    members = _members(tree, restriction)
    start = 0 if members is None else min(members, default=None)
    if start is None:
        raise InvalidTreeError("empty restriction")
    order, parent = _walk(tree, members, start)
    sub = _subtree_weights(tree, order, parent)
    total = sub[start]
    cuts = []
    for ch in order[1:]:
        p = parent[ch]
        below = sub[ch]
        if p < ch:
            cuts.append(CutResult((p, ch), total - below, below))
        else:
            cuts.append(CutResult((ch, p), below, total - below))
    cuts.sort(key=lambda c: c.edge)
    return cuts


def component_weights(tree: InputTree, restriction: Optional[Iterable[int]], e: Edge) -> CutResult:
    """Weights of the two components of the restricted subtree minus ``e``."""
    u, v = canonical(*e)
    members = _members(tree, restriction)
    if not tree.has_edge(u, v) or (members is not None and (u not in members or v not in members)):
        raise InvalidTreeError(f"edge {(u, v)} is not inside the restriction")
    _walk(tree, members, u)  # connectivity check
    adj, w = tree.adj, tree.weights
    seen = {u, v}
    stack = [u]
    side_u = 0
    while stack:
        x = stack.pop()
        side_u += w[x]
        for y in adj[x]:
            if y not in seen and (members is None or y in members):
                seen.add(y)
                stack.append(y)
    total = tree.total_weight if members is None else sum(w[x] for x in members)
    return CutResult((u, v), side_u, total - side_u)


def find_centroid(tree: InputTree, restriction: Optional[Iterable[int]] = None) -> int:
    """Smallest-index vertex whose removal leaves components of weight <= W/2."""
    members = _members(tree, restriction)
    start = 0 if members is None else min(members, default=None)
    if start is None:
        raise InvalidTreeError("empty restriction")
    order, parent = _walk(tree, members, start)
    sub = _subtree_weights(tree, order, parent)
    total = sub[start]
    heaviest = {v: total - sub[v] for v in order}
    for ch in order[1:]:
        p = parent[ch]
        if sub[ch] > heaviest[p]:
            heaviest[p] = sub[ch]
    return min(v for v in order if 2 * heaviest[v] <= total)


def find_balanced_edge(tree: InputTree, restriction: Optional[Iterable[int]] = None) -> CutResult:
    """An edge minimising the heavier side; ties go to the smallest canonical edge.

    Scans every edge of the restricted subtree, so the result does not rely
    on the centroid shortcut (which can miss ties when weights are zero).
    """
    cuts = restricted_cuts(tree, restriction)
    if not cuts:
        raise InvalidTreeError("a balanced edge needs at least 2 vertices")
    return min(cuts, key=lambda c: (c.max_side, c.edge))
