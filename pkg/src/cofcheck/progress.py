"""Contention predicates on lassos and exhaustive WF/OF/COF checking.

An instance pending at the anchor of a lasso either completes during the
next pass through the cycle or never completes: the cycle returns to the
anchor, so a pass without a completion by the invoking process repeats
forever.  Unrolling ``prefix . cycle . cycle`` therefore decides
completion for every instance invoked in ``prefix . cycle``.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels
from .errors import InternalError, UsageError
from .execution import Algorithm, Lasso, OperationInstance, TraceEntry
from .graph import ConfigurationGraph, build_graph
from .objects import ConflictRelation


class Condition(str, enum.Enum):
    WF = "wf"
    OF = "of"
    COF = "cof"

    @classmethod
    def parse(cls, value: str | Condition) -> Condition:
        if isinstance(value, Condition):
            return value
        try:
            return cls(value.lower())
        except ValueError:
            raise UsageError(f"unknown progress condition {value!r}; expected wf, of or cof") from None


@dataclass(frozen=True)
class InstanceStatus:
    instance: OperationInstance
    invoked_at: int
    completed_at: int | None
    response: str | None
    steps_in_cycle: bool
    contended: bool
    conflicting_steps_in_cycle: bool

    @property
    def completed(self) -> bool:
        return self.completed_at is not None


def _unrolled(l: Lasso) -> tuple[list[TraceEntry], int, int]:
    """Trace of ``prefix . cycle . cycle`` plus the seq bounds of the second pass."""
    trace = l.unroll(2)
    n_prefix = len(l.prefix)
    return trace, n_prefix + len(l.cycle), n_prefix + 2 * len(l.cycle)


def _instance_entries(trace: Sequence[TraceEntry], inst: OperationInstance) -> list[TraceEntry]:
    return [e for e in trace if e.process == inst.process and e.ordinal == inst.ordinal]


def _locate(l: Lasso, inst: OperationInstance) -> tuple[list[TraceEntry], list[TraceEntry], int, int]:
    if inst.process not in l.algorithm.proc_index:
        raise UsageError(f"unknown process {inst.process!r}")
    trace, lo, hi = _unrolled(l)
    mine = _instance_entries(trace, inst)
    if not mine:
        raise UsageError(f"instance {inst} is not invoked in the lasso")
    if mine[0].seq > lo:
        # Invoked only during the second pass: shift the window by one pass.
        trace = l.unroll(3)
        lo, hi = hi, hi + len(l.cycle)
        mine = _instance_entries(trace, inst)
    if mine[0].operation != inst.operation:
        raise UsageError(f"instance {inst} does not match the operation invoked ({mine[0].operation})")
    return trace, mine, lo, hi


def _completion(mine: Sequence[TraceEntry]) -> TraceEntry | None:
    last = mine[-1]
    return last if last.response is not None else None


def instance_status(l: Lasso, inst: OperationInstance, cr: ConflictRelation | None = None) -> InstanceStatus:
    """Classify ``inst`` within ``l``.

    ``contended`` is true when another process steps while ``inst`` is
    pending (between its invocation and completion, or anywhere in the
    cycle if it never completes).  ``conflicting_steps_in_cycle`` only
    applies to instances that never complete.
    """
    trace, mine, lo, hi = _locate(l, inst)
    done = _completion(mine)
    start = mine[0].seq
    if done is not None:
        window = [e for e in trace if start <= e.seq <= done.seq]
        in_cycle = [e for e in mine if lo - len(l.cycle) < e.seq <= lo]
        conflicting = False
    else:
        window = [e for e in trace if lo < e.seq <= hi]
        in_cycle = [e for e in window if e.process == inst.process]
        conflicting = cr is not None and any(
            e.process != inst.process and cr.conflicts(inst.operation, e.operation) for e in window
        )
    return InstanceStatus(
        instance=inst,
        invoked_at=start,
        completed_at=None if done is None else done.seq,
        response=None if done is None else done.response,
        steps_in_cycle=bool(in_cycle),
        contended=any(e.process != inst.process for e in window),
        conflicting_steps_in_cycle=conflicting,
    )


def eventually_scf(l: Lasso, inst: OperationInstance) -> bool:
    """True iff ``inst`` completes or, from the anchor on, only its process steps."""
    _, mine, _, _ = _locate(l, inst)
    if _completion(mine) is not None:
        return True
    return all(p == inst.process for p in l.cycle)


def eventually_conflict_scf(l: Lasso, inst: OperationInstance, cr: ConflictRelation) -> bool:
    """True iff ``inst`` completes or no conflicting operation of another process steps in the cycle."""
    return not instance_status(l, inst, cr).conflicting_steps_in_cycle


def pending_at_anchor(l: Lasso) -> dict[str, OperationInstance]:
    """Instances invoked in the prefix and not yet completed at the anchor."""
    _, trace = l.algorithm.run(l.start, l.prefix)
    open_ops: dict[str, OperationInstance] = {}
    for e in trace:
        if e.invokes:
            open_ops[e.process] = OperationInstance(l.algorithm.object_name, e.operation, e.process, e.ordinal)
        if e.response is not None:
            open_ops.pop(e.process, None)
    return open_ops


def correct_in(l: Lasso, p: str) -> bool:
    """True iff ``p`` steps in the cycle or has no pending instance at the anchor."""
    if p not in l.algorithm.proc_index:
        raise UsageError(f"unknown process {p!r}")
    return p in l.cycle or p not in pending_at_anchor(l)


def instances(l: Lasso) -> list[OperationInstance]:
    """Every instance invoked in ``prefix . cycle``, in invocation order."""
    trace = l.unroll(1)
    return [
        OperationInstance(l.algorithm.object_name, e.operation, e.process, e.ordinal) for e in trace if e.invokes
    ]


@dataclass
class ProgressVerdict:
    condition: Condition
    holds: bool
    witness: Lasso | None = None
    instance: OperationInstance | None = None
    statistics: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.holds != (self.witness is None):
            raise InternalError("a verdict carries a witness iff the condition is violated")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "condition": self.condition.value,
            "holds": self.holds,
            "statistics": dict(self.statistics),
        }
        if self.witness is not None:
            alg = self.witness.algorithm
            out["witness"] = {
                "start": alg.describe(self.witness.start),
                "prefix": list(self.witness.prefix),
                "cycle": list(self.witness.cycle),
                "anchor": alg.describe(self.witness.anchor),
                "instance": {
                    "object": self.instance.object,
                    "operation": self.instance.operation,
                    "process": self.instance.process,
                    "ordinal": self.instance.ordinal,
                },
            }
        else:
            out["witness"] = None
        return out


def allowed_mask(g: ConfigurationGraph, p: int, condition: Condition, cr: ConflictRelation) -> np.ndarray:
    """Edges a violating cycle for a pending instance of process ``p`` may use.

    Process p may take any step that does not complete its instance.  Other
    processes: WF any step, OF none, COF steps of operations not in
    conflict with p's.
    """
    has = g.succ >= 0
    mask = np.zeros_like(has)
    mask[:, p] = has[:, p] & ~g.completes[:, p]
    if condition is Condition.WF:
        others = has.copy()
    elif condition is Condition.OF:
        others = np.zeros_like(has)
    else:
        ops = g.encoder.operations
        k = len(ops)
        table = np.zeros((k + 1, k + 1), dtype=bool)
        for a in range(k):
            for b in range(k):
                table[a, b] = cr.conflicts(ops[a], ops[b])
        ids = g.op_ids
        mine = ids[:, p]
        others = has & ~table[mine[:, None], ids]
    others[:, p] = False
    return mask | others


def _violation_for(g: ConfigurationGraph, p: int, condition: Condition, cr: ConflictRelation):
    mask = allowed_mask(g, p, condition, cr)
    comp = kernels.scc(g.succ, mask)
    col = g.succ[:, p]
    inner = mask[:, p] & (col >= 0)
    inner &= comp[np.where(col >= 0, col, 0)] == comp
    hits = np.flatnonzero(inner)
    ncomp = int(comp.max()) + 1 if len(comp) else 0
    if len(hits) == 0:
        return None, ncomp
    # Prefer the violating step closest to a root (lowest BFS index).
    i = int(hits[0])
    j = int(g.succ[i, p])
    back = g.walk(j, i, mask, allowed_nodes=comp == comp[i])
    if back is None:
        raise InternalError("no closed walk inside a strongly connected component")
    return (i, [p] + back), ncomp


def find_violation(
    alg: Algorithm,
    inputs: Iterable | None,
    condition: Condition | str,
    cr: ConflictRelation,
    *,
    budget: int | None = None,
    graph: ConfigurationGraph | None = None,
    parallel: int = 1,
) -> ProgressVerdict:
    """Search the reachable configuration graph for a lasso violating ``condition``.

    A violation is a closed walk through a reachable node in which some
    process ``p`` steps, its instance never completes, and every step by
    another process is allowed by the condition (see :func:`allowed_mask`).
    """
    condition = Condition.parse(condition)
    g = graph if graph is not None else build_graph(alg, inputs, budget=budget)
    P = len(alg.process_ids)
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(lambda p: _violation_for(g, p, condition, cr), range(P)))
    else:
        results = [_violation_for(g, p, condition, cr) for p in range(P)]
    full = kernels.scc(g.succ, g.succ >= 0)
    stats = {
        "states": g.n,
        "edges": g.edge_count,
        "sccs": int(full.max()) + 1 if len(full) else 0,
    }
    for p, (found, _) in enumerate(results):
        if found is None:
            continue
        i, cycle_procs = found
        root, prefix = g.path_to(i)
        pid = alg.process_ids
        lasso = alg.close_lasso(
            g.configuration(i),
            [pid[q] for q in cycle_procs],
            start=g.configuration(root),
            prefix=prefix,
        )
        if lasso is None:
            raise InternalError("violation cycle failed to close")
        inst = _cycle_instance(lasso, pid[p])
        _recheck(lasso, inst, condition, cr)
        return ProgressVerdict(condition, False, lasso, inst, stats)
    return ProgressVerdict(condition, True, None, None, stats)


def _cycle_instance(l: Lasso, p: str) -> OperationInstance:
    trace = l.unroll(1)
    for e in trace[len(l.prefix) :]:
        if e.process == p:
            return OperationInstance(l.algorithm.object_name, e.operation, p, e.ordinal)
    raise InternalError(f"process {p} takes no step in the violation cycle")


def _recheck(l: Lasso, inst: OperationInstance, condition: Condition, cr: ConflictRelation) -> None:
    status = instance_status(l, inst, cr)
    ok = (
        l.is_closed()
        and correct_in(l, inst.process)
        and not status.completed
        and (condition is not Condition.OF or eventually_scf(l, inst))
        and (condition is not Condition.COF or eventually_conflict_scf(l, inst, cr))
    )
    if not ok:
        raise InternalError(f"{condition.value} witness for {inst} failed independent re-check")


def check_lasso(l: Lasso, condition: Condition | str, cr: ConflictRelation) -> list[OperationInstance]:
    """Instances of correct processes that ``condition`` requires to complete but never do."""
    condition = Condition.parse(condition)
    bad = []
    for inst in instances(l):
        status = instance_status(l, inst, cr)
        if status.completed or inst.process not in l.cycle:
            # Completed, or pending forever without stepping: a faulty process.
            continue
        if condition is Condition.WF:
            required = True
        elif condition is Condition.OF:
            required = eventually_scf(l, inst)
        else:
            required = not status.conflicting_steps_in_cycle
        if required:
            bad.append(inst)
    return bad
