"""Fill-reducing symmetric orderings: reverse Cuthill-McKee and approximate
minimum degree."""
from __future__ import annotations

import heapq
import math

import numpy as np

from ..storage import Permutation, SparseSymStore


def adjacency(store: SparseSymStore) -> list[list[int]]:
    """Sorted neighbour lists of the pattern of ``A + A^T``, diagonal ignored."""
    n = store.n
    adj: list[list[int]] = [[] for _ in range(n)]
    r, c, _ = store.triplets()
    off = r != c
    for i, j in zip(r[off].tolist(), c[off].tolist()):
        adj[i].append(j)
        adj[j].append(i)
    for a in adj:
        a.sort()
    return adj


def bandwidth(store: SparseSymStore, perm: Permutation | None = None) -> int:
    r, c, _ = store.triplets()
    if perm is not None:
        r, c = perm.inverse[r], perm.inverse[c]
    return int(np.max(np.abs(r - c))) if r.size else 0


def permute(store: SparseSymStore, perm: Permutation) -> SparseSymStore:
    """New store holding ``P A P^T``."""
    r, c, v = store.triplets()
    return SparseSymStore.from_triplets(store.n, perm.inverse[r], perm.inverse[c], v, store.kind)


def rcm_order(store: SparseSymStore) -> Permutation:
    """Reverse Cuthill-McKee.

    Each connected component starts from its unvisited vertex of least
    degree (lowest index on ties) and is traversed breadth first with
    neighbours in increasing degree; every component's order is reversed
    in place, so isolated vertices keep their positions.
    """
    adj = adjacency(store)
    n = store.n
    deg = [len(a) for a in adj]
    visited = [False] * n
    order: list[int] = []
    for start in sorted(range(n), key=lambda v: (deg[v], v)):
        if visited[start]:
            continue
        visited[start] = True
        comp = [start]
        head = 0
        while head < len(comp):
            v = comp[head]
            head += 1
            nbrs = [w for w in adj[v] if not visited[w]]
            nbrs.sort(key=lambda w: (deg[w], w))
            for w in nbrs:
                visited[w] = True
            comp.extend(nbrs)
        order.extend(reversed(comp))
    return Permutation.from_forward(order)


def amd_order(store: SparseSymStore, dense_factor: float = 10.0, aggressive: bool = True) -> Permutation:
    """Approximate minimum degree on the quotient graph.

    Eliminated vertices become elements; a variable's degree is bounded
    by the approximate external degree of Amestoy, Davis and Duff.  Rows
    with more than ``max(16, dense_factor * sqrt(n))`` off-diagonal
    entries are removed up front and ordered last.  Ties go to the lowest
    index.
    """
    n = store.n
    adj = adjacency(store)
    dense_cut = max(16.0, dense_factor * math.sqrt(n))
    dense = [v for v in range(n) if len(adj[v]) > dense_cut]
    dense_set = set(dense)

    var_adj = [set(a) - dense_set for a in adj]  # A_i, variables only
    elem_of: list[set[int]] = [set() for _ in range(n)]  # E_i
    elem_vars: dict[int, set[int]] = {}  # L_e
    alive = [v not in dense_set for v in range(n)]
    degree = [len(var_adj[v]) for v in range(n)]
    heap = [(degree[v], v) for v in range(n) if alive[v]]
    heapq.heapify(heap)
    remaining = n - len(dense)
    order: list[int] = []

    while heap:
        d, p = heapq.heappop(heap)
        if not alive[p] or d != degree[p]:
            continue
        alive[p] = False
        order.append(p)
        remaining -= 1

        lp = set(var_adj[p])
        for e in elem_of[p]:
            lp |= elem_vars.pop(e)
        lp.discard(p)
        absorbed = elem_of[p]
        elem_of[p] = set()
        var_adj[p] = set()
        if not lp:
            continue
        elem_vars[p] = lp

        for i in lp:
            var_adj[i] -= lp
            var_adj[i].discard(p)
            elem_of[i] -= absorbed
            elem_of[i].add(p)

        # |L_e \ L_p| for every other element adjacent to L_p
        outside: dict[int, int] = {}
        for i in lp:
            for e in elem_of[i]:
                if e == p:
                    continue
                if e not in outside:
                    outside[e] = len(elem_vars[e])
                outside[e] -= 1
        if aggressive:
            for e, w in list(outside.items()):
                if w == 0:
                    for i in elem_vars.pop(e):
                        elem_of[i].discard(e)
                    del outside[e]

        size_lp = len(lp)
        for i in lp:
            ext = size_lp - 1
            bound = len(var_adj[i]) + ext + sum(outside.get(e, len(elem_vars[e])) for e in elem_of[i] if e != p)
            new_deg = min(remaining - 1, degree[i] + ext, bound)
            degree[i] = new_deg
            heapq.heappush(heap, (new_deg, i))

    order.extend(dense)
    return Permutation.from_forward(order)


def exact_min_degree_order(store: SparseSymStore) -> Permutation:
    """Exact minimum degree on the explicit elimination graph (small n only)."""
    adj = [set(a) for a in adjacency(store)]
    n = store.n
    alive = set(range(n))
    order = []
    while alive:
        p = min(alive, key=lambda v: (len(adj[v]), v))
        nb = adj[p]
        for i in nb:
            adj[i] |= nb
            adj[i].discard(i)
            adj[i].discard(p)
        alive.discard(p)
        order.append(p)
    return Permutation.from_forward(order)


def symbolic_fill(store: SparseSymStore, perm: Permutation | None = None) -> int:
    """Off-diagonal nonzeros of the complete Cholesky-pattern factor of ``P A P^T``."""
    work = permute(store, perm) if perm is not None else store
    adj = [set(a) for a in adjacency(work)]
    total = 0
    for k in range(work.n):
        later = {j for j in adj[k] if j > k}
        total += len(later)
        for j in later:
            adj[j] |= later
            adj[j].discard(j)
    return total
