"""Reachable configuration graphs over integer-encoded configurations."""

from __future__ import annotations

import os
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import SpecificationError
from .execution import Algorithm, Configuration, Read, Step

DEFAULT_BUDGET = 10**7
_INT64_LIMIT = 2**62


def default_budget() -> int:
    raw = os.environ.get("COFCHECK_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise SpecificationError(f"COFCHECK_BUDGET must be an integer, got {raw!r}") from None
    if value < 1:
        raise SpecificationError("COFCHECK_BUDGET must be >= 1")
    return value


class Encoder:
    """Mixed-radix codes: one digit per process local state, one per register."""

    def __init__(self, alg: Algorithm) -> None:
        self.alg = alg
        self.state_index = [{s: i for i, s in enumerate(a.local_states)} for a in alg.processes]
        self.value_index = [{v: i for i, v in enumerate(r.domain)} for r in alg.registers]
        P, R = len(alg.processes), len(alg.registers)
        self.P, self.R = P, R
        lrad = [len(a.local_states) for a in alg.processes]
        rrad = [len(r.domain) for r in alg.registers]
        mult = 1
        lmult, rmult = [], []
        for radix in lrad:
            lmult.append(mult)
            mult *= radix
        for radix in rrad:
            rmult.append(mult)
            mult *= radix
        if mult >= _INT64_LIMIT:
            raise SpecificationError(f"{alg.name}: configuration space too large to encode in 64 bits")
        self.space_size = mult
        off, kind, reg, wval, wnext, roff, rtab = [], [], [], [], [], [], []
        is_response, op_id = [], []
        self.operations: list[str] = sorted({o for a in alg.processes for o in a.operation.values()})
        ops = {o: i for i, o in enumerate(self.operations)}
        self.responses: list[str] = sorted({r for a in alg.processes for r in a.response.values()})
        resp_ids = {r: i for i, r in enumerate(self.responses)}
        response_id = []
        for pi, a in enumerate(alg.processes):
            off.append(len(kind))
            sidx = self.state_index[pi]
            for s in a.local_states:
                action = a.pending_action.get(s)
                is_response.append(s in a.response)
                response_id.append(resp_ids[a.response[s]] if s in a.response else -1)
                op_id.append(ops[a.operation[s]] if s in a.operation else -1)
                roff.append(len(rtab))
                if action is None:
                    kind.append(0)
                    reg.append(0)
                    wval.append(0)
                    wnext.append(0)
                    continue
                j = alg.reg_index[action.register]
                reg.append(j)
                if isinstance(action, Read):
                    kind.append(1)
                    wval.append(0)
                    wnext.append(0)
                    for v in alg.registers[j].domain:
                        rtab.append(sidx[a.on_read[s][v]])
                else:
                    kind.append(2)
                    wval.append(self.value_index[j][action.value])
                    wnext.append(sidx[a.on_write[s]])
        i64 = np.int64
        self.tables = {
            "P": P,
            "R": R,
            "lmult": np.asarray(lmult, dtype=i64),
            "lrad": np.asarray(lrad, dtype=i64),
            "rmult": np.asarray(rmult, dtype=i64).reshape(R),
            "rrad": np.asarray(rrad, dtype=i64).reshape(R),
            "off": np.asarray(off, dtype=i64),
            "kind": np.asarray(kind, dtype=i64),
            "reg": np.asarray(reg, dtype=i64),
            "wval": np.asarray(wval, dtype=i64),
            "wnext": np.asarray(wnext, dtype=i64),
            "roff": np.asarray(roff, dtype=i64),
            "rtab": np.asarray(rtab if rtab else [0], dtype=i64),
        }
        self.is_response = np.asarray(is_response, dtype=bool)
        self.op_id = np.asarray(op_id, dtype=i64)
        self.response_id = np.asarray(response_id, dtype=i64)

    def encode(self, c: Configuration) -> int:
        code = 0
        for p, s in enumerate(c.local):
            code += self.state_index[p][s] * int(self.tables["lmult"][p])
        for j, v in enumerate(c.memory):
            code += self.value_index[j][v] * int(self.tables["rmult"][j])
        return code

    def decode(self, code: int) -> Configuration:
        local = tuple(
            self.alg.processes[p].local_states[(code // int(self.tables["lmult"][p])) % int(self.tables["lrad"][p])]
            for p in range(self.P)
        )
        memory = tuple(
            self.alg.registers[j].domain[(code // int(self.tables["rmult"][j])) % int(self.tables["rrad"][j])]
            for j in range(self.R)
        )
        return Configuration(local, memory)

    def local_digits(self, codes: np.ndarray) -> np.ndarray:
        """Local-state index of every process, shape ``(len(codes), P)``."""
        t = self.tables
        return (codes[:, None] // t["lmult"][None, :]) % t["lrad"][None, :]

    def memory_digits(self, codes: np.ndarray) -> np.ndarray:
        t = self.tables
        if self.R == 0:
            return np.zeros((len(codes), 0), dtype=np.int64)
        return (codes[:, None] // t["rmult"][None, :]) % t["rrad"][None, :]


@dataclass
class ConfigurationGraph:
    """Reachable configurations with one outgoing edge per non-halted process."""

    algorithm: Algorithm
    encoder: Encoder
    codes: np.ndarray
    succ: np.ndarray
    parent: np.ndarray
    parent_proc: np.ndarray
    roots: tuple[int, ...]
    _index: dict[int, int] | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.codes)

    def __len__(self) -> int:
        return self.n

    @property
    def edge_count(self) -> int:
        return int((self.succ >= 0).sum())

    def index_of(self, c: Configuration) -> int | None:
        if self._index is None:
            self._index = {int(x): i for i, x in enumerate(self.codes.tolist())}
        try:
            return self._index.get(self.encoder.encode(c))
        except KeyError:
            return None

    def configuration(self, i: int) -> Configuration:
        return self.encoder.decode(int(self.codes[i]))

    @cached_property
    def local_digits(self) -> np.ndarray:
        return self.encoder.local_digits(self.codes)

    @cached_property
    def flat_states(self) -> np.ndarray:
        """Row ``i``, column ``p``: index of p's local state in the flat per-process tables."""
        off = self.encoder.tables["off"]
        return self.local_digits + off[None, :]

    @cached_property
    def op_ids(self) -> np.ndarray:
        """Operation index (into ``encoder.operations``) p is executing, -1 if halted."""
        return self.encoder.op_id[self.flat_states]

    @cached_property
    def response_ids(self) -> np.ndarray:
        """Response index carried by p's local state, -1 if none."""
        return self.encoder.response_id[self.flat_states]

    @cached_property
    def completes(self) -> np.ndarray:
        """``completes[i, p]``: the step of p from node i enters a response state."""
        has = self.succ >= 0
        tgt = np.where(has, self.succ, 0)
        cols = np.arange(self.succ.shape[1])[None, :]
        return has & self.encoder.is_response[self.flat_states[tgt, cols]]

    def decided_mask(self, value: str) -> np.ndarray:
        """Nodes where some process's local state carries response ``value``."""
        try:
            rid = self.encoder.responses.index(value)
        except ValueError:
            return np.zeros(self.n, dtype=bool)
        return (self.response_ids == rid).any(axis=1)

    def decided_values(self, i: int) -> frozenset[str]:
        return frozenset(self.encoder.responses[r] for r in self.response_ids[i].tolist() if r >= 0)

    def step(self, i: int, p: int) -> Step | None:
        c = self.configuration(i)
        return self.algorithm.enabled_step(c, self.algorithm.process_ids[p])

    def root_of(self, i: int) -> int:
        while self.parent[i] >= 0:
            i = int(self.parent[i])
        return i

    def path_to(self, i: int) -> tuple[int, list[str]]:
        """Root index and BFS-tree schedule from that root to ``i``."""
        procs = []
        while self.parent[i] >= 0:
            procs.append(self.algorithm.process_ids[int(self.parent_proc[i])])
            i = int(self.parent[i])
        procs.reverse()
        return i, procs

    def walk(self, src: int, dst: int, mask: np.ndarray, allowed_nodes: np.ndarray | None = None) -> list[int] | None:
        """Shortest masked-edge path from ``src`` to ``dst`` as a list of process indices."""
        if src == dst:
            return []
        prev: dict[int, tuple[int, int]] = {src: (-1, -1)}
        queue = deque([src])
        P = self.succ.shape[1]
        while queue:
            v = queue.popleft()
            for p in range(P):
                w = int(self.succ[v, p])
                if w < 0 or not mask[v, p] or w in prev:
                    continue
                if allowed_nodes is not None and not allowed_nodes[w]:
                    continue
                prev[w] = (v, p)
                if w == dst:
                    out = []
                    while w != src:
                        v2, p2 = prev[w]
                        out.append(p2)
                        w = v2
                    return out[::-1]
                queue.append(w)
        return None

    def statistics(self) -> dict[str, int]:
        return {"states": self.n, "edges": self.edge_count}


def build_graph(
    alg: Algorithm,
    inputs: Iterable | None = None,
    *,
    budget: int | None = None,
) -> ConfigurationGraph:
    """Explore every configuration reachable from the initial configuration(s).

    ``inputs`` is one input vector (mapping or sequence of values) or a list
    of them; each contributes a root.
    """
    budget = default_budget() if budget is None else budget
    if budget < 1:
        raise SpecificationError("budget must be >= 1")
    enc = Encoder(alg)
    vectors = _input_vectors(alg, inputs)
    root_codes = [enc.encode(alg.initial_configuration(iv)) for iv in vectors]
    codes, succ, parent, parent_proc = kernels.explore(enc.tables, np.asarray(root_codes, dtype=np.int64), budget)
    lookup = {c: i for i, c in enumerate(codes[: len(set(root_codes))].tolist())}
    roots = tuple(dict.fromkeys(lookup[c] for c in root_codes))
    return ConfigurationGraph(alg, enc, codes, succ, parent, parent_proc, roots)


def _input_vectors(alg: Algorithm, inputs) -> list[dict[str, str]]:
    if inputs is None:
        return [alg.normalize_inputs(None)]
    if isinstance(inputs, dict):
        return [alg.normalize_inputs(inputs)]
    items = list(inputs)
    if items and all(isinstance(x, str) for x in items):
        return [alg.normalize_inputs(items)]
    return [alg.normalize_inputs(x) for x in items]


def all_input_vectors(alg: Algorithm) -> list[dict[str, str]]:
    """Cartesian product of every process's accepted inputs, in declaration order."""
    vectors: list[dict[str, str]] = [{}]
    for p in alg.process_ids:
        vectors = [dict(v, **{p: x}) for v in vectors for x in alg.input_domains[p]]
    return vectors

