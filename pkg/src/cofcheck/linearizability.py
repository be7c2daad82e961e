"""Histories and a linearizability checker for desk-scale histories.

A history is a sequence of invocation and response events.  Text form is
one event per line::

    INV p0 propose(0)
    RES p0 0

The checker is a depth-first search over linearization prefixes in the
style of Wing and Gong, memoized on (object state, set of linearized
operations).  Pending operations may be linearized with any response or
dropped.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import Union

from .errors import InternalError, SpecificationError
from .execution import TraceEntry
from .objects import SequentialObject


@dataclass(frozen=True)
class Invocation:
    process: str
    operation: str

    def __str__(self) -> str:
        return f"INV {self.process} {self.operation}"


@dataclass(frozen=True)
class Response:
    process: str
    value: str

    def __str__(self) -> str:
        return f"RES {self.process} {self.value}"


Event = Union[Invocation, Response]


@dataclass(frozen=True)
class OperationRecord:
    """One operation of a history; ``response`` is None while pending."""

    index: int
    process: str
    operation: str
    invoked_at: int
    response: str | None = None
    responded_at: int | None = None

    @property
    def pending(self) -> bool:
        return self.responded_at is None


@dataclass(frozen=True)
class History:
    events: tuple[Event, ...]

    def __post_init__(self) -> None:
        self.operations()

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def operations(self) -> list[OperationRecord]:
        """Pair invocations with responses; raises on malformed histories."""
        open_ops: dict[str, int] = {}
        records: list[OperationRecord] = []
        for i, e in enumerate(self.events):
            if isinstance(e, Invocation):
                if e.process in open_ops:
                    raise SpecificationError(f"event {i}: {e.process} invokes while an operation is pending")
                open_ops[e.process] = len(records)
                records.append(OperationRecord(len(records), e.process, e.operation, i))
            elif isinstance(e, Response):
                k = open_ops.pop(e.process, None)
                if k is None:
                    raise SpecificationError(f"event {i}: response by {e.process} without an invocation")
                r = records[k]
                records[k] = OperationRecord(r.index, r.process, r.operation, r.invoked_at, e.value, i)
            else:
                raise SpecificationError(f"event {i}: not an invocation or response: {e!r}")
        return records

    def without_pending(self, process: str) -> History:
        """Drop the pending invocation of ``process`` (if any)."""
        for r in self.operations():
            if r.process == process and r.pending:
                return History(self.events[: r.invoked_at] + self.events[r.invoked_at + 1 :])
        return self

    def to_text(self) -> str:
        return "".join(f"{e}\n" for e in self.events)

    @classmethod
    def from_text(cls, text: str) -> History:
        events: list[Event] = []
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("INV", "RES"):
                raise SpecificationError(f"history line {n}: expected 'INV p op' or 'RES p val', got {raw!r}")
            kind, p, x = parts
            events.append(Invocation(p, x) if kind == "INV" else Response(p, x))
        return cls(tuple(events))


def collect_history(trace: Iterable[TraceEntry]) -> History:
    """Invocation at each instance's first step, response where a response state is entered."""
    events: list[Event] = []
    open_ops: dict[str, tuple[str, int]] = {}
    for e in trace:
        current = open_ops.get(e.process)
        if e.invokes:
            if current is not None:
                raise InternalError(f"trace step {e.seq}: {e.process} invokes with an instance still open")
            events.append(Invocation(e.process, e.operation))
            open_ops[e.process] = (e.operation, e.ordinal)
        elif current is None:
            raise InternalError(f"trace step {e.seq}: {e.process} steps without an open instance")
        elif current != (e.operation, e.ordinal):
            raise InternalError(f"trace step {e.seq}: step attributed to a different instance of {e.process}")
        if e.response is not None:
            events.append(Response(e.process, e.response))
            del open_ops[e.process]
    return History(tuple(events))


@dataclass(frozen=True)
class LinearizabilityResult:
    linearizable: bool
    witness: tuple[OperationRecord, ...] | None = None
    counterexample: History | None = None

    def __bool__(self) -> bool:
        return self.linearizable

    def __iter__(self) -> Iterator[object]:
        # Unpacks as (verdict, witness order).
        return iter((self.linearizable, self.witness))

    def witness_operations(self) -> list[str]:
        return [r.operation for r in self.witness or ()]


def _search(records: Sequence[OperationRecord], obj: SequentialObject) -> tuple[OperationRecord, ...] | None:
    n = len(records)
    completed_mask = 0
    # before[i]: completed operations whose response precedes i's invocation.
    before = [0] * n
    for r in records:
        if not r.pending:
            completed_mask |= 1 << r.index
    for r in records:
        m = 0
        for s in records:
            if not s.pending and s.responded_at < r.invoked_at:
                m |= 1 << s.index
        before[r.index] = m

    failed: set[tuple[int, str]] = set()
    order: list[OperationRecord] = []

    def dfs(done: int, q: str) -> bool:
        if done & completed_mask == completed_mask:
            return True
        if (done, q) in failed:
            return False
        for r in records:
            bit = 1 << r.index
            if done & bit or before[r.index] & ~done:
                continue
            resp, q2 = obj.transition[r.operation, q]
            if not r.pending and resp != r.response:
                continue
            order.append(r if not r.pending else OperationRecord(r.index, r.process, r.operation, r.invoked_at, resp))
            if dfs(done | bit, q2):
                return True
            order.pop()
        failed.add((done, q))
        return False

    return tuple(order) if dfs(0, obj.initial_state) else None


def is_linearizable(h: History, obj: SequentialObject) -> LinearizabilityResult:
    """Decide linearizability; the witness lists operations in linearization order.

    Pending operations placed in the witness carry the response the object
    would give them.  On failure the shortest non-linearizable prefix of
    ``h`` is reported as the counterexample.
    """
    records = h.operations()
    for r in records:
        if r.operation not in obj.operation_set:
            raise SpecificationError(f"{obj.name}: history uses unknown operation {r.operation!r}")
    witness = _search(records, obj)
    if witness is not None:
        return LinearizabilityResult(True, witness)
    for k in range(1, len(h.events) + 1):
        prefix = History(h.events[:k])
        if _search(prefix.operations(), obj) is None:
            return LinearizabilityResult(False, None, prefix)
    raise InternalError("full history rejected but every prefix accepted")
