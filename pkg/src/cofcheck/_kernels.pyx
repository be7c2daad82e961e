# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels; same contracts as ``cofcheck._pykernels``."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref

from .errors import BudgetExceeded

cnp.import_array()


def explore(dict tables, cnp.ndarray roots, long long budget):
    cdef int P = int(tables["P"])
    cdef int64_t[::1] lmult = np.ascontiguousarray(tables["lmult"], dtype=np.int64)
    cdef int64_t[::1] lrad = np.ascontiguousarray(tables["lrad"], dtype=np.int64)
    cdef int64_t[::1] rmult = np.ascontiguousarray(tables["rmult"], dtype=np.int64)
    cdef int64_t[::1] rrad = np.ascontiguousarray(tables["rrad"], dtype=np.int64)
    cdef int64_t[::1] off = np.ascontiguousarray(tables["off"], dtype=np.int64)
    cdef int64_t[::1] kind = np.ascontiguousarray(tables["kind"], dtype=np.int64)
    cdef int64_t[::1] reg = np.ascontiguousarray(tables["reg"], dtype=np.int64)
    cdef int64_t[::1] wval = np.ascontiguousarray(tables["wval"], dtype=np.int64)
    cdef int64_t[::1] wnext = np.ascontiguousarray(tables["wnext"], dtype=np.int64)
    cdef int64_t[::1] roff = np.ascontiguousarray(tables["roff"], dtype=np.int64)
    cdef int64_t[::1] rtab = np.ascontiguousarray(tables["rtab"], dtype=np.int64)
    cdef int64_t[::1] rts = np.ascontiguousarray(roots, dtype=np.int64)

    cdef unordered_map[int64_t, int64_t] index
    cdef vector[int64_t] codes
    cdef vector[int64_t] parent
    cdef vector[int64_t] parent_proc
    cdef vector[int64_t] succ
    cdef size_t head = 0
    cdef int64_t code, nxt, s, t, v, k, j, i, kd, edges = 0
    cdef int p
    cdef Py_ssize_t r
    cdef unordered_map[int64_t, int64_t].iterator it

    for r in range(rts.shape[0]):
        code = rts[r]
        if index.count(code) == 0:
            index[code] = <int64_t>codes.size()
            codes.push_back(code)
            parent.push_back(-1)
            parent_proc.push_back(-1)
    if <long long>codes.size() > budget:
        raise BudgetExceeded(budget, codes.size())
    while head < codes.size():
        code = codes[head]
        for p in range(P):
            s = (code // lmult[p]) % lrad[p]
            k = off[p] + s
            kd = kind[k]
            if kd == 0:
                succ.push_back(-1)
                continue
            j = reg[k]
            v = (code // rmult[j]) % rrad[j]
            if kd == 1:
                t = rtab[roff[k] + v]
                nxt = code + (t - s) * lmult[p]
            else:
                t = wnext[k]
                nxt = code + (t - s) * lmult[p] + (wval[k] - v) * rmult[j]
            it = index.find(nxt)
            if it == index.end():
                i = <int64_t>codes.size()
                if i >= budget:
                    raise BudgetExceeded(budget, i, edges)
                index[nxt] = i
                codes.push_back(nxt)
                parent.push_back(<int64_t>head)
                parent_proc.push_back(p)
            else:
                i = deref(it).second
            succ.push_back(i)
            edges += 1
        head += 1

    cdef Py_ssize_t n = codes.size()
    out_codes = np.empty(n, dtype=np.int64)
    out_parent = np.empty(n, dtype=np.int64)
    out_pp = np.empty(n, dtype=np.int64)
    out_succ = np.empty(n * P, dtype=np.int64)
    cdef int64_t[::1] oc = out_codes
    cdef int64_t[::1] op = out_parent
    cdef int64_t[::1] opp = out_pp
    cdef int64_t[::1] osu = out_succ
    for r in range(n):
        oc[r] = codes[r]
        op[r] = parent[r]
        opp[r] = parent_proc[r]
    for r in range(n * P):
        osu[r] = succ[r]
    return out_codes, out_succ.reshape(n, P), out_parent, out_pp


def scc(cnp.ndarray succ_in, cnp.ndarray mask_in):
    cdef Py_ssize_t n = succ_in.shape[0]
    cdef Py_ssize_t P = succ_in.shape[1]
    cdef int64_t[:, ::1] succ = np.ascontiguousarray(succ_in, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] mask = np.ascontiguousarray(mask_in, dtype=np.uint8)
    comp_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] comp = comp_arr
    cdef vector[int64_t] order = vector[int64_t](n, -1)
    cdef vector[int64_t] low = vector[int64_t](n, 0)
    cdef vector[char] on_stack = vector[char](n, 0)
    cdef vector[int64_t] stack
    cdef vector[int64_t] work_v
    cdef vector[int64_t] work_e
    cdef int64_t counter = 0, ncomp = 0, v, w, e, u
    cdef Py_ssize_t root
    cdef bint descended
    for root in range(n):
        if order[root] != -1:
            continue
        order[root] = counter
        low[root] = counter
        counter += 1
        stack.push_back(root)
        on_stack[root] = 1
        work_v.push_back(root)
        work_e.push_back(0)
        while work_v.size() > 0:
            v = work_v.back()
            e = work_e.back()
            descended = False
            while e < P:
                w = succ[v, e]
                e += 1
                if w < 0 or not mask[v, e - 1]:
                    continue
                if order[w] == -1:
                    work_e[work_e.size() - 1] = e
                    order[w] = counter
                    low[w] = counter
                    counter += 1
                    stack.push_back(w)
                    on_stack[w] = 1
                    work_v.push_back(w)
                    work_e.push_back(0)
                    descended = True
                    break
                if on_stack[w] and order[w] < low[v]:
                    low[v] = order[w]
            if descended:
                continue
            work_v.pop_back()
            work_e.pop_back()
            if low[v] == order[v]:
                while True:
                    w = stack.back()
                    stack.pop_back()
                    on_stack[w] = 0
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
            if work_v.size() > 0:
                u = work_v.back()
                if low[v] < low[u]:
                    low[u] = low[v]
    return comp_arr


def backward_reach(cnp.ndarray succ_in, cnp.ndarray mask_in, cnp.ndarray targets_in):
    cdef Py_ssize_t n = succ_in.shape[0]
    cdef Py_ssize_t P = succ_in.shape[1]
    cdef int64_t[:, ::1] succ = np.ascontiguousarray(succ_in, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] mask = np.ascontiguousarray(mask_in, dtype=np.uint8)
    cdef cnp.uint8_t[::1] targets = np.ascontiguousarray(targets_in, dtype=np.uint8)
    # Reverse adjacency in CSR form.
    cdef vector[int64_t] starts = vector[int64_t](n + 1, 0)
    cdef Py_ssize_t i, p
    cdef int64_t w, k, v
    for i in range(n):
        for p in range(P):
            w = succ[i, p]
            if w >= 0 and mask[i, p]:
                starts[w + 1] += 1
    for i in range(n):
        starts[i + 1] += starts[i]
    cdef vector[int64_t] fill = starts
    cdef vector[int64_t] src = vector[int64_t](starts[n], 0)
    for i in range(n):
        for p in range(P):
            w = succ[i, p]
            if w >= 0 and mask[i, p]:
                src[fill[w]] = i
                fill[w] += 1
    seen_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] seen = seen_arr
    cdef vector[int64_t] queue
    for i in range(n):
        if targets[i]:
            seen[i] = 1
            queue.push_back(i)
    cdef size_t head = 0
    while head < queue.size():
        v = queue[head]
        head += 1
        for k in range(starts[v], starts[v + 1]):
            w = src[k]
            if not seen[w]:
                seen[w] = 1
                queue.push_back(w)
    return seen_arr.astype(bool)
