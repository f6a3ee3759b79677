"""Balanced EPT construction.

Two builders produce byte-identical EPTs on positive weights:

* :func:`build_balanced_naive` re-scans the current component for its most
  balanced edge at every node, O(n) per node and O(n^2) overall.
* :func:`build_balanced_fast` works centroid by centroid.  Each centroid
  emits a caterpillar of balanced edges in one go, and every component
  handed to the next round weighs under 2/3 of its parent, which gives
  O(n log n) for unit weights.

Ties: the smallest-index centroid, and among equally balanced edges the
smallest canonical ``(u, v)``.  Around a centroid ``c`` the canonical edge
order equals ascending neighbour order, which is what the incidence sort
uses for equal component weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .ept import Ept
from .tree import InputTree, find_balanced_edge

_WEIGHT_MAX = np.uint64(np.iinfo(np.uint64).max)


def _to_ept(n: int, root: int, eu, ev, lch, rch) -> Ept:
    vertex = list(range(n)) + [-1] * (n - 1)
    edges = [None] * n + list(zip(eu, ev))
    left = [-1] * n + list(lch)
    right = [-1] * n + list(rch)
    return Ept(vertex, edges, left, right, root)


def build_balanced_naive(g: InputTree) -> Ept:
    """Root every sub-EPT at the most balanced edge of its component."""
    n = g.n
    eu, ev, lch, rch = [], [], [], []
    root = -1
    # (component vertices, parent internal index, side)
    work: list[tuple[set[int], int, int]] = [(set(range(n)), -1, 0)]
    adj = g.adj
    while work:
        members, parent, side = work.pop()
        if len(members) == 1:
            x = next(iter(members))
        else:
            u, v = find_balanced_edge(g, members).edge
            side_u = {u}
            stack = [u]
            while stack:
                a = stack.pop()
                for b in adj[a]:
                    if b in members and b not in side_u and b != v:
                        side_u.add(b)
                        stack.append(b)
            side_v = members - side_u
            k = len(eu)
            x = n + k
            eu.append(u)
            ev.append(v)
            lch.append(-1)
            rch.append(-1)
            first, second = (side_u, side_v) if min(side_u) < min(side_v) else (side_v, side_u)
            work.append((second, k, 1))
            work.append((first, k, 0))
        if parent < 0:
            root = x
        elif side == 0:
            lch[parent] = x
        else:
            rch[parent] = x
    return _to_ept(n, root, eu, ev, lch, rch)


# -- incidence sort and caterpillar length ---------------------------------

@numba.njit(cache=True)
def _incidence_order(weights, unit):
    """Permutation listing weights in non-increasing order, ties by position.

    Positions are assumed to be in ascending neighbour order.  Unit mode
    buckets by size: one LIFO stack per size, then the few distinct sizes
    are sorted.  Otherwise a stable comparison sort.
    """
    k = weights.shape[0]
    perm = np.empty(k, np.int64)
    if k == 0 or not unit:
        return np.argsort(_WEIGHT_MAX - weights, kind="mergesort")
    top = 0
    for i in range(k):
        if weights[i] > weights[top]:
            top = i
    size_cap = np.int64(weights[top])
    head = np.full(size_cap + 1, -1, np.int64)
    nxt = np.empty(k, np.int64)
    distinct = np.empty(k, np.int64)
    nd = 0
    for i in range(k):
        s = np.int64(weights[i])
        if head[s] < 0:
            distinct[nd] = s
            nd += 1
        nxt[i] = head[s]
        head[s] = i
    sizes = np.sort(distinct[:nd])
    pos = 0
    for j in range(nd - 1, -1, -1):
        start = pos
        i = head[sizes[j]]
        while i >= 0:
            perm[pos] = i
            pos += 1
            i = nxt[i]
        # stack pops give descending positions; restore ascending order
        lo, hi = start, pos - 1
        while lo < hi:
            perm[lo], perm[hi] = perm[hi], perm[lo]
            lo += 1
            hi -= 1
    return perm


@numba.njit(cache=True)
def _prefix_length(sorted_weights, total):
    """Smallest s with total - (C_1 + ... + C_s) < 2 C_s, else all of them."""
    k = sorted_weights.shape[0]
    acc = np.uint64(0)
    for j in range(k):
        c = sorted_weights[j]
        acc += c
        if total - acc < c + c:
            return j + 1
    return k


@dataclass(frozen=True)
class SortedIncidence:
    centroid: int
    edges: list[tuple[int, int]]  # (neighbour, component weight)


def sort_incident_components(
    sizes: list[tuple[int, int]], total: int, centroid: int = -1, unit: bool = False
) -> SortedIncidence:
    """Order a centroid's incident components by non-increasing weight.

    ``unit`` selects the bucket sort, valid when weights are vertex counts.
    Equal weights keep ascending neighbour order.
    """
    items = sorted(sizes)
    if sum(w for _, w in items) > total:
        raise ValueError("component weights exceed the component total")
    weights = np.array([w for _, w in items], dtype=np.uint64)
    perm = _incidence_order(weights, unit)
    return SortedIncidence(centroid, [items[i] for i in perm])


def caterpillar_prefix(sorted_inc: SortedIncidence | list[int], total: int) -> int:
    """Number of centroid edges stacked into one caterpillar.

    Takes the minimum s with ``total - sum(C_1..C_s) < 2 C_s``.  When no such
    s exists, which only positive non-unit weights (a heavy centroid) allow,
    all incident edges are used: the centroid stays a centroid of what is
    left throughout, so each edge remains balanced.
    """
    if isinstance(sorted_inc, SortedIncidence):
        sorted_inc = [w for _, w in sorted_inc.edges]
    if not sorted_inc:
        raise ValueError("a caterpillar needs at least one incident edge")
    return int(_prefix_length(np.array(sorted_inc, dtype=np.uint64), np.uint64(total)))


# -- the centroid-caterpillar builder --------------------------------------

@numba.njit(cache=True)
def _fast_kernel(indptr, indices, rev, label, w, unit, depth_cap):
    """Centroid-caterpillar construction over CSR adjacency.

    ``rev[j]`` is the slot of the reverse direction of adjacency slot ``j``.
    Vertices are working ids; ``label`` maps them back to input ids, and
    every tie-break and every emitted id goes through it.
    Components are never relabelled: cutting an edge flags both of its
    slots, and a pending component is identified by any one of its vertices.
    Each component costs one DFS plus a few sequential passes.
    """
    n = w.shape[0]
    m = max(n - 1, 0)
    eu = np.empty(m, np.int64)
    ev = np.empty(m, np.int64)
    lch = np.full(m, -1, np.int64)
    rch = np.full(m, -1, np.int64)
    if n == 1:
        return label[0], eu, ev, lch, rch

    cut = np.zeros(indices.shape[0], np.bool_)
    order = np.empty(n, np.int64)
    pos = np.empty(n, np.int64)
    parent = np.empty(n, np.int64)
    count = np.empty(n, np.int64)
    low = np.empty(n, np.int64)
    sub = np.empty(n, np.uint64)
    heavy = np.empty(n, np.uint64)
    dfs = np.empty(n, np.int64)
    inc_v = np.empty(n, np.int64)
    inc_slot = np.empty(n, np.int64)
    inc_w = np.empty(n, np.uint64)
    inc_low = np.empty(n, np.int64)
    suffix_low = np.empty(n + 1, np.int64)

    # pending components: representative, attach node, side, parent weight, depth
    st_rep = np.empty(n + 1, np.int64)
    st_node = np.empty(n + 1, np.int64)
    st_side = np.empty(n + 1, np.int64)
    st_pw = np.empty(n + 1, np.uint64)
    st_depth = np.empty(n + 1, np.int64)
    st_rep[0] = 0
    st_node[0] = -1
    st_side[0] = 0
    st_pw[0] = 0
    st_depth[0] = 0
    top = 1
    root = -1
    next_internal = 0
    zero = np.uint64(0)

    while top > 0:
        top -= 1
        rep = st_rep[top]
        attach = st_node[top]
        side = st_side[top]
        pw = st_pw[top]
        depth = st_depth[top]

        # preorder DFS: every subtree is a contiguous run of `order`
        parent[rep] = -1
        dfs[0] = rep
        sp = 1
        cnt = 0
        while sp > 0:
            sp -= 1
            v = dfs[sp]
            order[cnt] = v
            pos[v] = cnt
            cnt += 1
            sub[v] = w[v]
            heavy[v] = zero
            low[v] = label[v]
            count[v] = 1
            for j in range(indptr[v], indptr[v + 1]):
                x = indices[j]
                if not cut[j] and x != parent[v]:
                    parent[x] = v
                    dfs[sp] = x
                    sp += 1

        if cnt == 1:
            leaf = label[rep]
            if attach < 0:
                root = leaf
            elif side == 0:
                lch[attach] = leaf
            else:
                rch[attach] = leaf
            continue

        for i in range(cnt - 1, 0, -1):
            v = order[i]
            p = parent[v]
            sub[p] += sub[v]
            if sub[v] > heavy[p]:
                heavy[p] = sub[v]
            if low[v] < low[p]:
                low[p] = low[v]
            count[p] += count[v]
        total = sub[rep]
        if unit:
            if depth > depth_cap:
                raise AssertionError("recursion deeper than log_{3/2}(n) + 1")
            if depth > 0 and not (total + total + total < pw + pw):
                raise AssertionError("component does not shrink below 2/3 of its parent")

        # smallest-index centroid
        c = -1
        for i in range(cnt):
            v = order[i]
            h = heavy[v]
            up = total - sub[v]
            if up > h:
                h = up
            if h + h <= total and (c < 0 or label[v] < label[c]):
                c = v

        k = 0
        for j in range(indptr[c], indptr[c + 1]):
            if cut[j]:
                continue
            x = indices[j]
            inc_v[k] = x
            inc_slot[k] = j
            if parent[x] == c:
                inc_w[k] = sub[x]
                inc_low[k] = low[x]
            else:
                inc_w[k] = total - sub[c]
                # everything outside c's subtree run
                lo = n
                start = pos[c]
                stop = start + count[c]
                for i in range(start):
                    if label[order[i]] < lo:
                        lo = label[order[i]]
                for i in range(stop, cnt):
                    if label[order[i]] < lo:
                        lo = label[order[i]]
                inc_low[k] = lo
            k += 1
        perm = _incidence_order(inc_w[:k], unit)
        sorted_w = np.empty(k, np.uint64)
        for j in range(k):
            sorted_w[j] = inc_w[perm[j]]
        s = _prefix_length(sorted_w, total)

        # what stays with c: c itself plus the incident components not split off
        lc = label[c]
        rest_low = lc
        for j in range(s, k):
            if inc_low[perm[j]] < rest_low:
                rest_low = inc_low[perm[j]]
        suffix_low[s] = rest_low
        for j in range(s - 1, -1, -1):
            suffix_low[j] = min(inc_low[perm[j]], suffix_low[j + 1])

        # caterpillar c-v_1, ..., c-v_s, first one on top
        first = next_internal
        for j in range(s):
            node = first + j
            q = perm[j]
            vj = inc_v[q]
            lv = label[vj]
            cut[inc_slot[q]] = True
            cut[rev[inc_slot[q]]] = True
            if lc < lv:
                eu[node] = lc
                ev[node] = lv
            else:
                eu[node] = lv
                ev[node] = lc
            split_left = inc_low[q] < suffix_low[j + 1]
            st_rep[top + j] = vj
            st_node[top + j] = node
            st_side[top + j] = 0 if split_left else 1
            st_pw[top + j] = total
            st_depth[top + j] = depth + 1
            if j + 1 < s:
                if split_left:
                    rch[node] = n + node + 1
                else:
                    lch[node] = n + node + 1
        st_rep[top + s] = c
        st_node[top + s] = first + s - 1
        st_side[top + s] = 1 if inc_low[perm[s - 1]] < suffix_low[s] else 0
        st_pw[top + s] = total
        st_depth[top + s] = depth + 1
        top += s + 1
        next_internal += s

        if attach < 0:
            root = n + first
        elif side == 0:
            lch[attach] = n + first
        else:
            rch[attach] = n + first

    return root, eu, ev, lch, rch


@numba.njit(cache=True)
def _bfs_relabel(indptr, indices):
    """Renumber vertices in BFS order from 0 for memory locality.

    Returns the relabelled CSR, ``label`` (working id -> input id) and
    ``moved`` (input slot -> working slot).  Each neighbour list keeps its
    input order, so it stays sorted by input id.
    """
    n = indptr.shape[0] - 1
    label = np.empty(n, np.int64)
    new = np.full(n, -1, np.int64)
    label[0] = 0
    new[0] = 0
    tail = 1
    for i in range(n):
        v = label[i]
        for j in range(indptr[v], indptr[v + 1]):
            x = indices[j]
            if new[x] < 0:
                new[x] = tail
                label[tail] = x
                tail += 1
    ptr = np.empty(n + 1, np.int64)
    idx = np.empty(indices.shape[0], np.int64)
    moved = np.empty(indices.shape[0], np.int64)
    ptr[0] = 0
    for i in range(n):
        v = label[i]
        k = ptr[i]
        for j in range(indptr[v], indptr[v + 1]):
            idx[k] = new[indices[j]]
            moved[j] = k
            k += 1
        ptr[i + 1] = k
    return ptr, idx, label, moved


def _reverse_slots(indptr: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """For each CSR slot (v -> x), the slot of (x -> v)."""
    src = np.repeat(np.arange(indptr.shape[0] - 1, dtype=np.int64), np.diff(indptr))
    # slots sorted by (target, source) line up with slots sorted by (source, target)
    by_target = np.lexsort((src, indices))
    rev = np.empty_like(by_target)
    rev[by_target] = np.arange(indices.shape[0], dtype=np.int64)
    return rev


def build_balanced_fast(g: InputTree) -> Ept:
    """Balanced EPT in O(n log n) for unit weights.

    For other positive weights the round count is O(log W); zero weights
    keep the output balanced but void the bound.
    """
    indptr, indices = g.csr
    weights = np.array(g.weights, dtype=np.uint64)
    unit = g.unit_weights
    depth_cap = int(math.log(g.n) / math.log(1.5)) + 1 if g.n > 1 else 1
    ptr, idx, label, moved = _bfs_relabel(indptr, indices)
    rev = np.empty_like(moved)
    rev[moved] = moved[_reverse_slots(indptr, indices)]
    root, eu, ev, lch, rch = _fast_kernel(ptr, idx, rev, label, weights[label], unit, depth_cap)
    return _to_ept(g.n, int(root), eu.tolist(), ev.tolist(), lch.tolist(), rch.tolist())
