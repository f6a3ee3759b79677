"""Edge partition trees: representation, evaluation, validation, transforms.

An :class:`Ept` is stored as parallel lists indexed by node id.  A leaf has
``vertex[i] >= 0`` and no children; an internal node carries a canonical
edge in ``edge[i]`` and child ids in ``left[i]``/``right[i]`` (``-1`` when
missing, which only a malformed tree can have).  Builders give leaves the
node id of their vertex and number internal nodes from ``n`` upwards, but
nothing here depends on that.

Children are ordered so the left subtree holds the smaller minimum vertex.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

from .tree import Edge, InputTree, U64_MAX, WeightOverflowError, canonical


class Ept:
    __slots__ = ("vertex", "edge", "left", "right", "root")

    def __init__(
        self,
        vertex: list[int],
        edge: list[Optional[Edge]],
        left: list[int],
        right: list[int],
        root: int,
    ):
        self.vertex = vertex
        self.edge = edge
        self.left = left
        self.right = right
        self.root = root

    @classmethod
    def single(cls, v: int) -> "Ept":
        return cls([v], [None], [-1], [-1], 0)

    @classmethod
    def from_obj(cls, obj: Any) -> "Ept":
        """Build from the nested ``{"vertex": v}`` / ``{"edge": [u, v], ...}`` form."""
        return _from_obj(obj, allow_subdiv=False)[0]

    def to_obj(self) -> dict:
        return json.loads(ept_to_json(self))

    def is_leaf(self, x: int) -> bool:
        return self.edge[x] is None

    def preorder(self) -> Iterator[int]:
        stack = [self.root]
        left, right = self.left, self.right
        while stack:
            x = stack.pop()
            yield x
            if right[x] >= 0:
                stack.append(right[x])
            if left[x] >= 0:
                stack.append(left[x])

    def postorder(self) -> list[int]:
        order = list(self.preorder())
        order.reverse()
        return order

    def internal_nodes(self) -> list[int]:
        return [x for x in self.preorder() if self.edge[x] is not None]

    def leaves(self, x: Optional[int] = None) -> list[int]:
        """Vertices of the leaves below node ``x`` (the root by default)."""
        sub = Ept(self.vertex, self.edge, self.left, self.right, self.root if x is None else x)
        return [self.vertex[y] for y in sub.preorder() if self.edge[y] is None]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ept):
            return NotImplemented
        return ept_to_json(self) == ept_to_json(other)

    def __repr__(self) -> str:
        n_leaves = sum(1 for x in self.preorder() if self.edge[x] is None)
        return f"Ept(leaves={n_leaves})"


def leaf(v: int) -> dict:
    """Nested-form leaf, for writing EPTs by hand."""
    return {"vertex": v}


def node(u: int, v: int, left: dict, right: dict) -> dict:
    return {"edge": [u, v], "left": left, "right": right}


# -- serialization -----------------------------------------------------------

def _dump(t: Ept, subdiv: Optional[list[bool]]) -> str:
    # iterative: caterpillar EPTs of stars are as deep as the tree is large
    out: list[str] = []
    stack: list[Any] = [t.root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        x = item
        close = ""
        if subdiv is not None and subdiv[x]:
            out.append('{"subdiv":')
            close = "}"
        e = t.edge[x]
        if e is None:
            out.append(f'{{"vertex":{t.vertex[x]}}}{close}')
            continue
        out.append(f'{{"edge":[{e[0]},{e[1]}],"left":')
        stack.append("}" + close)
        stack.append(t.right[x])
        stack.append(',"right":')
        stack.append(t.left[x])
    return "".join(out)


def ept_to_json(t: Ept) -> str:
    return _dump(t, None)


_TOKEN = re.compile(r'\s*(?:(\{)|(\})|(\[)|(\])|(:)|(,)|"([a-z]+)"|(-?\d+))')


def _tokens(text: str) -> Iterator[tuple[int, Any]]:
    pos = 0
    end = len(text.rstrip())
    while pos < end:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ValueError(f"unexpected character at offset {pos} in EPT document")
        pos = m.end()
        kind = m.lastindex
        yield kind, m.group(kind)


def _load(text: str) -> Any:
    """JSON subset reader that does not recurse, for arbitrarily deep EPTs."""
    try:
        return json.loads(text)
    except RecursionError:
        pass
    stack: list[Any] = []
    key: list[Optional[str]] = []
    result: Any = None
    value_ready = False
    for kind, tok in _tokens(text):
        if kind in (1, 3):
            stack.append({} if kind == 1 else [])
            key.append(None)
            continue
        if kind in (2, 4):
            value = stack.pop()
            key.pop()
        elif kind == 7:
            if stack and isinstance(stack[-1], dict) and key[-1] is None:
                key[-1] = tok
                continue
            value = tok
        elif kind == 8:
            value = int(tok)
        else:
            continue
        if not stack:
            result, value_ready = value, True
        elif isinstance(stack[-1], list):
            stack[-1].append(value)
        else:
            stack[-1][key[-1]] = value
            key[-1] = None
    if stack or not value_ready:
        raise ValueError("truncated EPT document")
    return result


def _from_obj(obj: Any, allow_subdiv: bool) -> tuple[Ept, list[bool]]:
    vertex: list[int] = []
    edges: list[Optional[Edge]] = []
    left: list[int] = []
    right: list[int] = []
    subdiv: list[bool] = []
    # (object, parent id, side, wrapped in subdiv)
    stack: list[tuple[Any, int, int, bool]] = [(obj, -1, 0, False)]
    while stack:
        o, parent, side, wrapped = stack.pop()
        if not isinstance(o, dict):
            raise ValueError(f"EPT node must be an object, got {type(o).__name__}")
        if "subdiv" in o:
            if not allow_subdiv:
                raise ValueError("subdivision node in a plain EPT")
            if set(o) != {"subdiv"} or wrapped:
                raise ValueError("malformed subdivision node")
            stack.append((o["subdiv"], parent, side, True))
            continue
        x = len(vertex)
        if "vertex" in o:
            if set(o) != {"vertex"} or not isinstance(o["vertex"], int):
                raise ValueError("leaf must be exactly {\"vertex\": <int>}")
            vertex.append(o["vertex"])
            edges.append(None)
        elif "edge" in o:
            if not set(o) <= {"edge", "left", "right"}:
                raise ValueError(f"unknown keys in internal node: {sorted(o)}")
            e = o["edge"]
            if not (isinstance(e, list) and len(e) == 2 and all(isinstance(a, int) for a in e)):
                raise ValueError("edge must be a pair of integers")
            vertex.append(-1)
            edges.append(canonical(e[0], e[1]))
        else:
            raise ValueError(f"unrecognised EPT node with keys {sorted(o)}")
        left.append(-1)
        right.append(-1)
        subdiv.append(wrapped)
        if parent >= 0:
            (left if side == 0 else right)[parent] = x
        if "edge" in o:
            if "right" in o:
                stack.append((o["right"], x, 1, False))
            if "left" in o:
                stack.append((o["left"], x, 0, False))
    return Ept(vertex, edges, left, right, 0), subdiv


def ept_from_json(text: str) -> Ept:
    return _from_obj(_load(text), allow_subdiv=False)[0]


# -- evaluation --------------------------------------------------------------

def _below_weights(g: InputTree, t: Ept) -> list[int]:
    """Leaf weight below every node (0 for nodes outside the traversal)."""
    below = [0] * len(t.edge)
    w = g.weights
    for x in t.postorder():
        if t.edge[x] is None:
            below[x] = w[t.vertex[x]]
        else:
            below[x] = (below[t.left[x]] if t.left[x] >= 0 else 0) + (
                below[t.right[x]] if t.right[x] >= 0 else 0
            )
    return below


def _bounded(total: int) -> int:
    # all terms are non-negative, so checking the final sum catches any
    # intermediate overflow as well
    if total > U64_MAX:
        raise WeightOverflowError(f"EPT-sum {total} exceeds 2**64 - 1")
    return total


@dataclass(frozen=True)
class CostBreakdown:
    total: int
    per_internal_node: dict[Edge, int] = field(default_factory=dict)


def ept_sum_edges(g: InputTree, t: Ept) -> CostBreakdown:
    """Sum over internal nodes of edge weight times the leaf weight below."""
    below = _below_weights(g, t)
    per: dict[Edge, int] = {}
    for x in t.preorder():
        e = t.edge[x]
        if e is not None:
            per[e] = g.edge_weight(e) * below[x]
    return CostBreakdown(_bounded(sum(per.values())), per)


def ept_cost(g: InputTree, t: Ept) -> int:
    """Same total as :func:`ept_sum_edges`, without the per-node map."""
    below = _below_weights(g, t)
    if g.edge_weights is None:
        return _bounded(sum(below[x] for x in t.preorder() if t.edge[x] is not None))
    return _bounded(sum(g.edge_weight(t.edge[x]) * below[x] for x in t.preorder() if t.edge[x] is not None))


def ept_sum_leaves(g: InputTree, t: Ept) -> int:
    """Sum over vertices of weight times the edge-weight length of the root path."""
    w = g.weights
    total = 0
    stack = [(t.root, 0)]
    while stack:
        x, acc = stack.pop()
        e = t.edge[x]
        if e is None:
            total += w[t.vertex[x]] * acc
            continue
        acc += g.edge_weight(e)
        if t.left[x] >= 0:
            stack.append((t.left[x], acc))
        if t.right[x] >= 0:
            stack.append((t.right[x], acc))
    return _bounded(total)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_ept`; truthy when valid."""

    violation: Optional[str] = None  # "full-binary", "bijection", "partition", "child-order"
    node: Optional[int] = None
    message: str = ""

    @property
    def valid(self) -> bool:
        return self.violation is None

    def __bool__(self) -> bool:
        return self.valid

    def __str__(self) -> str:
        return "valid" if self.valid else f"{self.violation} violation: {self.message}"


def _describe(t: Ept, x: int) -> str:
    e = t.edge[x]
    return f"leaf {t.vertex[x]}" if e is None else f"edge ({e[0]},{e[1]})"


def _fmt(s: Iterable[int]) -> str:
    return "{" + ", ".join(map(str, sorted(s))) + "}"


def validate_ept(g: InputTree, t: Ept, restriction: Optional[Iterable[int]] = None) -> ValidationReport:
    """Check that ``t`` is a canonical EPT of ``g`` (or of ``g`` restricted).

    Checks run in order: full binary shape, the vertex/leaf and edge/internal
    bijections, the partition property at every internal node (components
    are recomputed from ``g``), and the left-has-smaller-minimum child order.
    """
    order = list(t.preorder())
    for x in order:
        has_l, has_r = t.left[x] >= 0, t.right[x] >= 0
        if t.edge[x] is None:
            if has_l or has_r:
                return ValidationReport("full-binary", x, f"leaf node {x} has children")
        elif not (has_l and has_r):
            return ValidationReport("full-binary", x, f"internal node {_describe(t, x)} needs two children")

    verts = set(range(g.n)) if restriction is None else set(restriction)
    want_edges = {e for e in g.edges if e[0] in verts and e[1] in verts}
    seen_v: set[int] = set()
    seen_e: set[Edge] = set()
    for x in order:
        e = t.edge[x]
        if e is None:
            v = t.vertex[x]
            if v not in verts:
                return ValidationReport("bijection", x, f"leaf {v} is not a vertex of the tree")
            if v in seen_v:
                return ValidationReport("bijection", x, f"vertex {v} appears on two leaves")
            seen_v.add(v)
        else:
            if e not in want_edges:
                return ValidationReport("bijection", x, f"internal node {_describe(t, x)} is not an edge of the tree")
            if e in seen_e:
                return ValidationReport("bijection", x, f"edge {e} appears on two internal nodes")
            seen_e.add(e)
    if seen_v != verts:
        return ValidationReport("bijection", t.root, f"vertices {_fmt(verts - seen_v)} have no leaf")
    if seen_e != want_edges:
        missing = sorted(want_edges - seen_e)
        return ValidationReport("bijection", t.root, f"edges {missing} have no internal node")

    leafsets: dict[int, frozenset[int]] = {}
    for x in reversed(order):
        if t.edge[x] is None:
            leafsets[x] = frozenset((t.vertex[x],))
        else:
            leafsets[x] = leafsets[t.left[x]] | leafsets[t.right[x]]
    for x in order:
        e = t.edge[x]
        if e is None:
            continue
        members = leafsets[x]
        side_u = _component(g, members, e[0], e)
        side_v = members - side_u
        got = {leafsets[t.left[x]], leafsets[t.right[x]]}
        if e[1] not in members or got != {side_u, side_v}:
            return ValidationReport(
                "partition",
                x,
                f"at {_describe(t, x)}: components are {_fmt(side_u)} and {_fmt(side_v)}, "
                f"children hold {_fmt(leafsets[t.left[x]])} and {_fmt(leafsets[t.right[x]])}",
            )
    for x in order:
        if t.edge[x] is not None and min(leafsets[t.left[x]]) > min(leafsets[t.right[x]]):
            return ValidationReport(
                "child-order", x, f"at {_describe(t, x)}: left child must hold the smaller minimum vertex"
            )
    return ValidationReport()


def _component(g: InputTree, members: frozenset[int], start: int, cut: Edge) -> frozenset[int]:
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in g.adj[x]:
            if y in members and y not in seen and canonical(x, y) != cut:
                seen.add(y)
                stack.append(y)
    return frozenset(seen)


# -- augmented trees ---------------------------------------------------------

class AugTree:
    """An EPT plus one flag per node marking its parent edge as subdivided."""

    __slots__ = ("ept", "subdiv")

    def __init__(self, ept: Ept, subdiv: list[bool]):
        self.ept = ept
        self.subdiv = subdiv

    def erase(self) -> Ept:
        """Drop every subdivision node."""
        t = self.ept
        return Ept(list(t.vertex), list(t.edge), list(t.left), list(t.right), t.root)


def augment(g: InputTree, t: Ept) -> AugTree:
    """Subdivide the edge to the lighter child of every internal node.

    Weight ties subdivide the right child.
    """
    below = _below_weights(g, t)
    subdiv = [False] * len(t.edge)
    for x in t.preorder():
        if t.edge[x] is not None:
            l, r = t.left[x], t.right[x]
            subdiv[l if below[l] < below[r] else r] = True
    return AugTree(t, subdiv)


def aug_sum(g: InputTree, a: AugTree) -> int:
    """Weighted leaf depth in the augmented tree, subdivision nodes included.

    A subdivision node counts with the edge weight of its parent node, so
    for unit edge weights this is the plain weighted depth sum.
    """
    t, subdiv, w = a.ept, a.subdiv, g.weights
    total = 0
    stack = [(t.root, 0)]
    while stack:
        x, acc = stack.pop()
        e = t.edge[x]
        if e is None:
            total += w[t.vertex[x]] * acc
            continue
        xe = g.edge_weight(e)
        for ch in (t.left[x], t.right[x]):
            stack.append((ch, acc + xe + (xe if subdiv[ch] else 0)))
    return _bounded(total)


def check_aug(g: InputTree, a: AugTree) -> list[str]:
    """Problems with the augmented-tree invariants; empty when all hold."""
    problems = []
    report = validate_ept(g, a.ept, {a.ept.vertex[x] for x in a.ept.preorder() if a.ept.edge[x] is None})
    if not report:
        problems.append(f"erased tree is not a valid EPT: {report}")
        return problems
    t = a.ept
    if a.subdiv[t.root]:
        problems.append("root carries a subdivision")
    below = _below_weights(g, t)
    for x in t.internal_nodes():
        l, r = t.left[x], t.right[x]
        marks = a.subdiv[l] + a.subdiv[r]
        if marks != 1:
            problems.append(f"{_describe(t, x)} has {marks} subdivided child edges")
        elif below[l if a.subdiv[l] else r] > below[r if a.subdiv[l] else l]:
            problems.append(f"{_describe(t, x)} subdivides the heavier child")
    return problems


def aug_to_json(a: AugTree) -> str:
    return _dump(a.ept, a.subdiv)


def aug_from_json(text: str) -> AugTree:
    t, subdiv = _from_obj(_load(text), allow_subdiv=True)
    return AugTree(t, subdiv)


# -- splitting ---------------------------------------------------------------

def _canonicalize(vertex, edges, children: list[list[int]], root: int) -> Ept:
    """Order each internal node's two children by minimum leaf vertex."""
    m = len(vertex)
    left, right = [-1] * m, [-1] * m
    order = [root]
    i = 0
    while i < len(order):
        order.extend(children[order[i]])
        i += 1
    low = [0] * m
    for x in reversed(order):
        ch = children[x]
        if edges[x] is None:
            if ch:
                raise ValueError("leaf acquired children while splitting; input EPT is invalid")
            low[x] = vertex[x]
            continue
        if len(ch) != 2:
            raise ValueError("internal node lost binary shape while splitting; input EPT is invalid")
        a, b = ch
        if low[a] > low[b]:
            a, b = b, a
        left[x], right[x] = a, b
        low[x] = low[a]
    return Ept(vertex, edges, left, right, root)


def split(g: InputTree, t: Ept, e: Edge) -> tuple[Ept, Ept]:
    """Split ``t`` along edge ``e = (u, v)`` into EPTs of the two sides.

    Every node keeps the elements (vertex or edge) of one side and is
    re-parented to its lowest ancestor on the same side.  Returns
    ``(T_u, T_v)`` for the components containing ``u`` and ``v``.
    """
    u, v = canonical(*e)
    if not g.has_edge(u, v):
        raise ValueError(f"{(u, v)} is not an edge of the tree")
    members = frozenset(t.leaves())
    if u not in members or v not in members:
        raise ValueError(f"edge {(u, v)} is not covered by this EPT")
    side_u = _component(g, members, u, (u, v))

    parts: list[tuple[list, list, list[list[int]], list[int]]] = [([], [], [], []), ([], [], [], [])]
    # (node, new parent on the u side, new parent on the v side)
    stack = [(t.root, -1, -1)]
    while stack:
        x, pu, pv = stack.pop()
        ex = t.edge[x]
        if ex == (u, v):
            s = -1
        elif ex is None:
            s = 0 if t.vertex[x] in side_u else 1
        else:
            s = 0 if ex[0] in side_u else 1
        if s >= 0:
            vertex, edges, children, roots = parts[s]
            nid = len(vertex)
            vertex.append(t.vertex[x])
            edges.append(ex)
            children.append([])
            parent = pu if s == 0 else pv
            if parent < 0:
                roots.append(nid)
            else:
                children[parent].append(nid)
            if s == 0:
                pu = nid
            else:
                pv = nid
        if ex is not None:
            stack.append((t.right[x], pu, pv))
            stack.append((t.left[x], pu, pv))

    out = []
    for vertex, edges, children, roots in parts:
        if len(roots) != 1:
            raise ValueError("split side has no unique root; input EPT is invalid")
        out.append(_canonicalize(vertex, edges, children, roots[0]))
    return out[0], out[1]


# -- balancedness ------------------------------------------------------------

def correctly_placed(g: InputTree, t: Ept, x: int) -> bool:
    """Whether node ``x``'s edge is a most balanced edge of the subtree it partitions."""
    from .tree import restricted_cuts

    e = t.edge[x]
    if e is None:
        return True
    cuts = restricted_cuts(g, set(t.leaves(x)))
    best = min(c.max_side for c in cuts)
    own = next(c.max_side for c in cuts if c.edge == e)
    return own == best


def correctly_placed_all(g: InputTree, t: Ept) -> bool:
    """True iff every internal node is correctly placed.

    Only optimal balancedness is required, not agreement on tie-breaks.
    """
    return all(correctly_placed(g, t, x) for x in t.internal_nodes())
