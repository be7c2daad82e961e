"""Small hand-checkable automata and independent oracles shared by the tests."""

from __future__ import annotations

import itertools
import random

from cofcheck.builder import Behavior, ReadThen, WriteThen, compile_automaton
from cofcheck.execution import Algorithm, ProcessAutomaton, Read, Register, Write
from cofcheck.linearizability import History, Invocation, Response
from cofcheck.objects import SequentialObject


def one_writer_toy() -> Algorithm:
    """One process writes 1 into a fresh register and halts with ack."""
    aut = ProcessAutomaton(
        id="w",
        local_states=("s0", "done"),
        initial={"x": "s0"},
        operation={"s0": "inc"},
        pending_action={"s0": Write("R", "1")},
        on_write={"s0": "done"},
        response={"done": "ack"},
    )
    return Algorithm("one-writer", "bounded-counter(1)", [Register("R", ("0", "1"), "0")], [aut], {"w": "x"})


def two_branch_toy() -> Algorithm:
    """Reader branches on R: on 0 it writes S, on 1 it reads S again."""
    reader = ProcessAutomaton(
        id="r",
        local_states=("look", "on0", "on1", "done"),
        initial={"x": "look"},
        operation={"look": "read", "on0": "read", "on1": "read"},
        pending_action={"look": Read("R"), "on0": Write("S", "1"), "on1": Read("S")},
        on_read={"look": {"0": "on0", "1": "on1"}, "on1": {"0": "done", "1": "done"}},
        on_write={"on0": "done"},
        response={"done": "0"},
    )
    writer = ProcessAutomaton(
        id="w",
        local_states=("go", "done"),
        initial={"x": "go"},
        operation={"go": "inc"},
        pending_action={"go": Write("R", "1")},
        on_write={"go": "done"},
        response={"done": "ack"},
    )
    regs = [Register("R", ("0", "1"), "0"), Register("S", ("0", "1"), "0")]
    return Algorithm("two-branch", "bounded-counter(1)", regs, [reader, writer], {"r": "x", "w": "x"})


def polling_toy() -> Algorithm:
    """p polls R forever through two local states; q writes Q once and halts."""
    p = ProcessAutomaton(
        id="p",
        local_states=("a", "b"),
        initial={"x": "a"},
        operation={"a": "read", "b": "read"},
        pending_action={"a": Read("R"), "b": Read("R")},
        on_read={"a": {"0": "b", "1": "b"}, "b": {"0": "a", "1": "a"}},
    )
    q = ProcessAutomaton(
        id="q",
        local_states=("go", "done"),
        initial={"x": "go"},
        operation={"go": "inc"},
        pending_action={"go": Write("Q", "1")},
        on_write={"go": "done"},
        response={"done": "ack"},
    )
    regs = [Register("R", ("0", "1"), "0"), Register("Q", ("0", "1"), "0")]
    return Algorithm("polling", "bounded-counter(1)", regs, [p, q], {"p": "x", "q": "x"})


def toggler_toy() -> Algorithm:
    """Single writer that writes 1 then loops writing 1 again (no compensating write of 0)."""
    p = ProcessAutomaton(
        id="p",
        local_states=("a", "b"),
        initial={"x": "a"},
        operation={"a": "inc", "b": "inc"},
        pending_action={"a": Write("R", "1"), "b": Write("R", "1")},
        on_write={"a": "b", "b": "b"},
    )
    return Algorithm("toggler", "bounded-counter(1)", [Register("R", ("0", "1"), "0")], [p], {"p": "x"})


def _consensus_like(name: str, behave_for, n: int = 3) -> Algorithm:
    procs = [f"p{i}" for i in range(n)]
    regs = [Register(f"R_{p}", ("_", "0", "1"), "_") for p in procs]
    domains = {r.id: r.domain for r in regs}
    automata = [
        compile_automaton(p, {v: ("start", v) for v in "01"}, behave_for(i, p), domains, lambda s: "/".join(s))
        for i, p in enumerate(procs)
    ]
    return Algorithm(name, "binary-consensus", regs, automata, {p: "1" if i else "0" for i, p in enumerate(procs)})


def decide_own_input() -> Algorithm:
    """Writes its input then decides it: breaks agreement."""

    def behave_for(i, p):
        def behave(s):
            if s[0] == "done":
                return Behavior(response=s[1])
            return Behavior(f"propose({s[1]})", action=WriteThen(f"R_{p}", s[1], ("done", s[1])))

        return behave

    return _consensus_like("decide-own", behave_for)


def decide_zero() -> Algorithm:
    """Writes its input then decides 0: breaks validity when nobody proposes 0."""

    def behave_for(i, p):
        def behave(s):
            if s[0] == "done":
                return Behavior(response="0")
            return Behavior(f"propose({s[1]})", action=WriteThen(f"R_{p}", s[1], ("done", s[1])))

        return behave

    return _consensus_like("decide-zero", behave_for)


def lazy_p0() -> Algorithm:
    """p0 polls its own register forever; p1 and p2 write their input and decide it."""

    def behave_for(i, p):
        def behave(s):
            if s[0] == "done":
                return Behavior(response=s[1])
            op = f"propose({s[1]})"
            if i == 0:
                return Behavior(op, action=ReadThen(f"R_{p}", lambda x: s))
            return Behavior(op, action=WriteThen(f"R_{p}", s[1], ("done", s[1])))

        return behave

    return _consensus_like("lazy-p0", behave_for)


# -- naive linearizability oracle -------------------------------------------------


def naive_linearizable(h: History, obj: SequentialObject) -> bool:
    """Try every subset of pending operations and every permutation respecting real time."""
    records = h.operations()
    done = [r for r in records if not r.pending]
    pending = [r for r in records if r.pending]
    for k in range(len(pending) + 1):
        for chosen in itertools.combinations(pending, k):
            ops = done + list(chosen)
            for perm in itertools.permutations(ops):
                ok = True
                for a in range(len(perm)):
                    for b in range(a + 1, len(perm)):
                        x, y = perm[a], perm[b]
                        if not y.pending and y.responded_at < x.invoked_at:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    continue
                q = obj.initial_state
                for r in perm:
                    resp, q = obj.transition[r.operation, q]
                    if not r.pending and resp != r.response:
                        ok = False
                        break
                if ok:
                    return True
    return False


def random_history(rng: random.Random, obj: SequentialObject, max_ops: int = 6, processes: int = 3) -> History:
    """Random well-formed history; responses drawn from a sequential run or at random."""
    procs = [f"p{i}" for i in range(processes)]
    n_ops = rng.randint(0, max_ops)
    events = []
    open_ops: dict[str, str] = {}
    started = 0
    q = obj.initial_state
    while started < n_ops or open_ops:
        can_invoke = [p for p in procs if p not in open_ops] if started < n_ops else []
        can_respond = list(open_ops)
        if can_invoke and (not can_respond or rng.random() < 0.5):
            p = rng.choice(can_invoke)
            op = rng.choice(obj.operations)
            open_ops[p] = op
            events.append(Invocation(p, op))
            started += 1
        else:
            p = rng.choice(can_respond)
            op = open_ops.pop(p)
            if started == n_ops and rng.random() < 0.15:
                continue  # no invocations remain: leave this operation pending
            if rng.random() < 0.6:
                resp, q = obj.transition[op, q]
            else:
                resp = rng.choice(obj.responses)
            events.append(Response(p, resp))
    return History(tuple(events))


# -- random lassos ------------------------------------------------------------------


def random_lassos(alg: Algorithm, inputs, rng: random.Random, count: int):
    """Lassos through random reachable nodes, cycling over random process subsets.

    Each lasso restricts its cycle to a random nonempty subset of processes,
    so some pending processes are absent from the cycle (crashed).
    """
    import numpy as np

    from cofcheck import kernels
    from cofcheck.graph import build_graph

    g = build_graph(alg, inputs)
    P = len(alg.process_ids)
    subsets = [s for k in range(1, P + 1) for s in itertools.combinations(range(P), k)]
    pools = {}
    for s in subsets:
        mask = np.zeros_like(g.succ, dtype=bool)
        mask[:, list(s)] = True
        mask &= g.succ >= 0
        comp = kernels.scc(g.succ, mask)
        tgt = np.where(g.succ >= 0, g.succ, 0)
        inner = mask & (comp[tgt] == comp[:, None])
        nodes = np.flatnonzero(inner.any(axis=1))
        if len(nodes):
            pools[s] = (mask, comp, nodes)
    keys = sorted(pools)
    out = []
    while len(out) < count:
        mask, comp, nodes = pools[rng.choice(keys)]
        i = int(rng.choice(nodes.tolist()))
        # Random walk inside the component, then the shortest way back.
        walk, v = [], i
        for _ in range(rng.randint(1, 12)):
            options = [p for p in range(P) if mask[v, p] and comp[g.succ[v, p]] == comp[i]]
            p = rng.choice(options)
            walk.append(p)
            v = int(g.succ[v, p])
        back = g.walk(v, i, mask, allowed_nodes=comp == comp[i])
        root, prefix = g.path_to(i)
        cycle = [alg.process_ids[p] for p in walk + back]
        lasso = alg.close_lasso(g.configuration(i), cycle, start=g.configuration(root), prefix=prefix)
        assert lasso is not None
        out.append(lasso)
    return out
