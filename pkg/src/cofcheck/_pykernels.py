"""Pure-Python graph kernels; reference implementation of the compiled ones.

Configurations are mixed-radix int64 codes: one digit per process local
state, one per register value.  ``tables`` is the dict built by
:func:`cofcheck.graph.encode_tables`.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import BudgetExceeded

HALTED, READ_KIND, WRITE_KIND = 0, 1, 2


def explore(tables: dict, roots: np.ndarray, budget: int):
    """Breadth-first closure of the step relation from ``roots``.

    Returns ``(codes, succ, parent, parent_proc)``.  ``succ[i, p]`` is the
    index of the successor via process ``p`` or -1 if ``p`` is halted.
    Roots have parent -1.
    """
    P = int(tables["P"])
    lmult = [int(x) for x in tables["lmult"]]
    lrad = [int(x) for x in tables["lrad"]]
    rmult = [int(x) for x in tables["rmult"]]
    rrad = [int(x) for x in tables["rrad"]]
    off = [int(x) for x in tables["off"]]
    kind = tables["kind"].tolist()
    reg = tables["reg"].tolist()
    wval = tables["wval"].tolist()
    wnext = tables["wnext"].tolist()
    roff = tables["roff"].tolist()
    rtab = tables["rtab"].tolist()

    index: dict[int, int] = {}
    codes: list[int] = []
    parent: list[int] = []
    parent_proc: list[int] = []
    succ: list[list[int]] = []
    queue: deque[int] = deque()
    for r in roots.tolist():
        if r not in index:
            index[r] = len(codes)
            codes.append(r)
            parent.append(-1)
            parent_proc.append(-1)
            queue.append(r)
    if len(codes) > budget:
        raise BudgetExceeded(budget, len(codes))
    edges = 0
    while queue:
        code = queue.popleft()
        row = [-1] * P
        for p in range(P):
            s = (code // lmult[p]) % lrad[p]
            k = off[p] + s
            kd = kind[k]
            if kd == HALTED:
                continue
            j = reg[k]
            v = (code // rmult[j]) % rrad[j]
            if kd == READ_KIND:
                t = rtab[roff[k] + v]
                nxt = code + (t - s) * lmult[p]
            else:
                t = wnext[k]
                nxt = code + (t - s) * lmult[p] + (wval[k] - v) * rmult[j]
            i = index.get(nxt)
            if i is None:
                i = len(codes)
                if i >= budget:
                    raise BudgetExceeded(budget, i, edges)
                index[nxt] = i
                codes.append(nxt)
                parent.append(index[code])
                parent_proc.append(p)
                queue.append(nxt)
            row[p] = i
            edges += 1
        succ.append(row)
    return (
        np.asarray(codes, dtype=np.int64),
        np.asarray(succ, dtype=np.int64).reshape(len(codes), P),
        np.asarray(parent, dtype=np.int64),
        np.asarray(parent_proc, dtype=np.int64),
    )


def scc(succ: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Iterative Tarjan over edges ``succ[i, p]`` with ``mask[i, p]`` set.

    Component ids are assigned in order of completion.
    """
    n, P = succ.shape
    adj = np.where(mask & (succ >= 0), succ, -1).tolist()
    UNSEEN = -1
    order = [UNSEEN] * n
    low = [0] * n
    comp = [-1] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if order[root] != UNSEEN:
            continue
        work = [(root, 0)]
        order[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, e = work[-1]
            row = adj[v]
            while e < P:
                w = row[e]
                e += 1
                if w < 0:
                    continue
                if order[w] == UNSEEN:
                    work[-1] = (v, e)
                    order[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                    break
                if on_stack[w] and order[w] < low[v]:
                    low[v] = order[w]
            else:
                work.pop()
                if low[v] == order[v]:
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
                if work:
                    u = work[-1][0]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return np.asarray(comp, dtype=np.int64)


def backward_reach(succ: np.ndarray, mask: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Nodes with a masked-edge path (possibly empty) into ``targets``."""
    n, P = succ.shape
    use = mask & (succ >= 0)
    src = np.repeat(np.arange(n, dtype=np.int64), P).reshape(n, P)[use]
    dst = succ[use]
    order = np.argsort(dst, kind="stable")
    src = src[order].tolist()
    starts = np.searchsorted(dst[order], np.arange(n + 1)).tolist()
    seen = targets.astype(bool).tolist()
    queue = deque(i for i in range(n) if seen[i])
    while queue:
        v = queue.popleft()
        for k in range(starts[v], starts[v + 1]):
            u = src[k]
            if not seen[u]:
                seen[u] = True
                queue.append(u)
    return np.asarray(seen, dtype=bool)
