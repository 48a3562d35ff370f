"""Graph routines on adjacency lists (``succ[i]`` is the list of successors of ``i``)."""

from __future__ import annotations

import functools
import gc
from collections import deque
from typing import Sequence


def gc_paused(fn):
    """Run ``fn`` with the cyclic garbage collector paused.  Bulk chain builds
    allocate millions of acyclic tuples; generational passes over them would
    otherwise dominate the running time."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        if not gc.isenabled():
            return fn(*args, **kwargs)
        gc.disable()
        try:
            return fn(*args, **kwargs)
        finally:
            gc.enable()
    return wrapper


def reverse_adjacency(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    pred: list[list[int]] = [[] for _ in range(len(succ))]
    for i, row in enumerate(succ):
        for j in row:
            pred[j].append(i)
    return pred


def reach(adj: Sequence[Sequence[int]], sources: Sequence[int], blocked=None) -> bytearray:
    """Mark nodes reachable from ``sources`` along ``adj`` without entering ``blocked`` nodes.

    Blocked sources are not marked.  ``blocked`` is an optional bytearray / set-like with
    truthy membership by index.
    """
    seen = bytearray(len(adj))
    stack = []
    for s in sources:
        if (blocked is None or not blocked[s]) and not seen[s]:
            seen[s] = 1
            stack.append(s)
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if not seen[w] and (blocked is None or not blocked[w]):
                seen[w] = 1
                stack.append(w)
    return seen


def bfs_order(adj: Sequence[Sequence[int]], root: int) -> list[int]:
    """Breadth-first order from ``root``; each frontier is visited in ascending id.

    Nodes never reached are appended at the end in ascending id.
    """
    n = len(adj)
    seen = bytearray(n)
    seen[root] = 1
    order = [root]
    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = 1
                    nxt.append(w)
        nxt.sort()
        order.extend(nxt)
        frontier = nxt
    if len(order) < n:
        order.extend(i for i in range(n) if not seen[i])
    return order


def strongly_connected_components(succ: Sequence[Sequence[int]]) -> list[list[int]]:
    """Tarjan's algorithm (iterative).  Components come out in reverse topological
    order: every edge leaving a component points to an earlier one."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = bytearray(n)
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = 1
        while work:
            u, pos = work[-1]
            row = succ[u]
            if pos < len(row):
                work[-1] = (u, pos + 1)
                w = row[pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = 1
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[u]:
                    low[u] = index[w]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[u] < low[parent]:
                    low[parent] = low[u]
            if low[u] == index[u]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = 0
                    comp.append(w)
                    if w == u:
                        break
                comp.sort()
                comps.append(comp)
    return comps


def immediate_dominators(adj: Sequence[Sequence[int]], roots: Sequence[int]) -> list[int]:
    """Immediate dominators for the flow graph ``adj`` entered from a virtual root
    whose successors are ``roots``.

    Returns ``idom`` of length ``len(adj) + 1``; index ``len(adj)`` is the virtual
    root (its own idom), nodes unreachable from the root get ``-1``.  Uses the
    iterative algorithm of Cooper, Harvey and Kennedy.
    """
    n = len(adj)
    root = n
    # depth-first postorder from the virtual root
    post = [-1] * (n + 1)
    order: list[int] = []
    visited = bytearray(n + 1)
    visited[root] = 1
    root_succ = list(roots)
    work = [(root, iter(root_succ))]
    has_back_edge = False
    on_path = bytearray(n + 1)
    on_path[root] = 1
    while work:
        u, it = work[-1]
        advanced = False
        for w in it:
            if not visited[w]:
                visited[w] = 1
                on_path[w] = 1
                work.append((w, iter(adj[w])))
                advanced = True
                break
            if on_path[w] and w != u:
                has_back_edge = True
        if not advanced:
            work.pop()
            on_path[u] = 0
            post[u] = len(order)
            order.append(u)
    rpo = order[::-1]
    # predecessors in the flow graph
    preds: list[list[int]] = [[] for _ in range(n + 1)]
    for u in range(n):
        if visited[u]:
            for w in adj[u]:
                if w != u:
                    preds[w].append(u)
    for r in root_succ:
        preds[r].append(root)

    idom = [-1] * (n + 1)
    idom[root] = root
    changed = True
    while changed:
        changed = False
        for b in rpo:
            if b == root:
                continue
            new = -1
            for p in preds[b]:
                if idom[p] == -1:
                    continue
                if new == -1:
                    new = p
                    continue
                a, c = p, new
                while a != c:
                    while post[a] < post[c]:
                        a = idom[a]
                    while post[c] < post[a]:
                        c = idom[c]
                new = a
            if idom[b] != new:
                idom[b] = new
                changed = True
        if not has_back_edge:
            # on an acyclic flow graph one pass in reverse postorder is exact
            break
    return idom
