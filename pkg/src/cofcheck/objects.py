"""Sequential objects, commutativity and the derived conflict relation.

A sequential object is the tuple ``(Q, q0, O, R, sigma)``: a finite state set,
an initial state, operations, responses, and a total transition function
``sigma(o, q) -> (response, next_state)``.  Transition tables are explicit
data so objects can be exchanged as JSON files::

    {
      "name": "binary-consensus",
      "states": ["⊥", "0", "1"],
      "initial": "⊥",
      "operations": ["propose(0)", "propose(1)"],
      "responses": ["0", "1"],
      "transitions": [
        {"op": "propose(0)", "from": "⊥", "response": "0", "to": "0"},
        ...
      ]
    }
"""

from __future__ import annotations

import json
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Any

from .errors import SpecificationError

BOTTOM = "⊥"
ACK = "ack"


@dataclass(frozen=True)
class SequentialObject:
    name: str
    states: tuple[str, ...]
    initial_state: str
    operations: tuple[str, ...]
    responses: tuple[str, ...]
    transition: Mapping[tuple[str, str], tuple[str, str]] = field(repr=False, hash=False)

    def __post_init__(self) -> None:
        states = set(self.states)
        if len(states) != len(self.states) or not states:
            raise SpecificationError(f"{self.name}: states must be nonempty and distinct")
        if len(set(self.operations)) != len(self.operations) or not self.operations:
            raise SpecificationError(f"{self.name}: operations must be nonempty and distinct")
        if self.initial_state not in states:
            raise SpecificationError(f"{self.name}: initial state {self.initial_state!r} not in Q")
        responses = set(self.responses)
        for o in self.operations:
            for q in self.states:
                if (o, q) not in self.transition:
                    raise SpecificationError(f"{self.name}: sigma undefined for ({o}, {q})")
                r, q2 = self.transition[o, q]
                if q2 not in states:
                    raise SpecificationError(f"{self.name}: sigma({o}, {q}) targets unknown state {q2!r}")
                if r not in responses:
                    raise SpecificationError(f"{self.name}: sigma({o}, {q}) returns unknown response {r!r}")
        extra = set(self.transition) - {(o, q) for o in self.operations for q in self.states}
        if extra:
            raise SpecificationError(f"{self.name}: transitions for unknown (op, state) pairs: {sorted(extra)}")

    def step(self, op: str, state: str) -> tuple[str, str]:
        """Return ``sigma(op, state)`` after validating both identifiers."""
        self._check_state(state)
        self._check_op(op)
        return self.transition[op, state]

    def _check_state(self, state: str) -> None:
        if state not in self.transition_states:
            raise SpecificationError(f"{self.name}: unknown state {state!r}")

    def _check_op(self, op: str) -> None:
        if op not in self.operation_set:
            raise SpecificationError(f"{self.name}: unknown operation {op!r}")

    @cached_property
    def transition_states(self) -> frozenset[str]:
        return frozenset(self.states)

    @cached_property
    def operation_set(self) -> frozenset[str]:
        return frozenset(self.operations)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "states": list(self.states),
            "initial": self.initial_state,
            "operations": list(self.operations),
            "responses": list(self.responses),
            "transitions": [
                {"op": o, "from": q, "response": self.transition[o, q][0], "to": self.transition[o, q][1]}
                for o in self.operations
                for q in self.states
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SequentialObject:
        try:
            table = {}
            for row in data["transitions"]:
                key = (str(row["op"]), str(row["from"]))
                if key in table:
                    raise SpecificationError(f"duplicate transition for {key}")
                table[key] = (str(row["response"]), str(row["to"]))
            return cls(
                name=str(data.get("name", "object")),
                states=tuple(str(s) for s in data["states"]),
                initial_state=str(data["initial"]),
                operations=tuple(str(o) for o in data["operations"]),
                responses=tuple(str(r) for r in data["responses"]),
                transition=table,
            )
        except (KeyError, TypeError) as exc:
            raise SpecificationError(f"malformed object description: {exc!r}") from exc


@dataclass(frozen=True)
class ConflictRelation:
    """Unordered operation pairs that fail to commute in some state.

    ``witnesses`` maps each pair to the first state (in ``Q`` order) where the
    two operations do not commute.  Self-pairs appear as one-element sets.
    """

    pairs: frozenset[frozenset[str]]
    witnesses: Mapping[frozenset[str], str] = field(default_factory=dict, compare=False, repr=False)

    def conflicts(self, o: str, o2: str) -> bool:
        return frozenset((o, o2)) in self.pairs

    def __contains__(self, pair: Iterable[str]) -> bool:
        return frozenset(pair) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def sorted_pairs(self) -> list[tuple[str, str]]:
        out = []
        for p in self.pairs:
            items = sorted(p)
            out.append((items[0], items[-1]))
        return sorted(out)

    @classmethod
    def empty(cls) -> ConflictRelation:
        return cls(frozenset())

    @classmethod
    def total(cls, operations: Iterable[str]) -> ConflictRelation:
        ops = sorted(set(operations))
        return cls(frozenset(frozenset(p) for p in combinations_with_replacement(ops, 2)))


def apply_sequence(obj: SequentialObject, q: str, s: Sequence[str]) -> tuple[list[str], str]:
    """Apply ``s`` left to right from ``q``; return the responses and ``s(q)``."""
    obj._check_state(q)
    responses = []
    for op in s:
        r, q = obj.step(op, q)
        responses.append(r)
    return responses, q


def commute_in_state(obj: SequentialObject, o: str, o2: str, q: str) -> bool:
    # Responses are compared per instance: o's response when it runs first in
    # o.o2 against its response when it runs second in o2.o, and likewise o2.
    # For o == o2 this compares the first and second application of o.
    r_o_first, q1 = obj.step(o, q)
    r_o2_second, q12 = obj.step(o2, q1)
    r_o2_first, q2 = obj.step(o2, q)
    r_o_second, q21 = obj.step(o, q2)
    return q12 == q21 and r_o_first == r_o_second and r_o2_first == r_o2_second


def conflict_relation(obj: SequentialObject) -> ConflictRelation:
    """Derive the conflict relation by quantifying over every state in ``Q``."""
    pairs = set()
    witnesses = {}
    for o, o2 in combinations_with_replacement(obj.operations, 2):
        for q in obj.states:
            if not commute_in_state(obj, o, o2, q):
                key = frozenset((o, o2))
                pairs.add(key)
                witnesses[key] = q
                break
    return ConflictRelation(frozenset(pairs), witnesses)


def binary_consensus() -> SequentialObject:
    table = {}
    for v in ("0", "1"):
        op = f"propose({v})"
        table[op, BOTTOM] = (v, v)
        for decided in ("0", "1"):
            table[op, decided] = (decided, decided)
    return SequentialObject(
        name="binary-consensus",
        states=("0", "1", BOTTOM),
        initial_state=BOTTOM,
        operations=("propose(0)", "propose(1)"),
        responses=("0", "1"),
        transition=table,
    )


def bounded_counter(cap: int) -> SequentialObject:
    """Counter over ``{0..cap}``; ``inc`` saturates at ``cap`` and returns ``ack``."""
    if not isinstance(cap, int) or cap < 1:
        raise SpecificationError(f"bounded counter cap must be an integer >= 1, got {cap!r}")
    states = tuple(str(i) for i in range(cap + 1))
    table = {}
    for i in range(cap + 1):
        table["read", str(i)] = (str(i), str(i))
        table["inc", str(i)] = (ACK, str(min(i + 1, cap)))
    return SequentialObject(
        name=f"bounded-counter({cap})",
        states=states,
        initial_state="0",
        operations=("read", "inc"),
        responses=(ACK,) + states,
        transition=table,
    )


def total_conflict_register() -> SequentialObject:
    # swap(v) stores v and returns the previous value: swap(0) and swap(1)
    # disagree on the final state, and swap(v) disagrees with itself on the
    # response it returns in state 1-v.
    table = {}
    for v in ("0", "1"):
        for q in ("0", "1"):
            table[f"swap({v})", q] = (q, v)
    return SequentialObject(
        name="total-conflict-register",
        states=("0", "1"),
        initial_state="0",
        operations=("swap(0)", "swap(1)"),
        responses=("0", "1"),
        transition=table,
    )


def commuting_only() -> SequentialObject:
    table = {("ping", "idle"): (ACK, "idle"), ("pong", "idle"): (ACK, "idle")}
    return SequentialObject(
        name="commuting-only",
        states=("idle",),
        initial_state="idle",
        operations=("ping", "pong"),
        responses=(ACK,),
        transition=table,
    )


def builtin_objects(counter_caps: Iterable[int] = (1, 2, 3, 6)) -> dict[str, SequentialObject]:
    catalog = {
        "binary-consensus": binary_consensus(),
        "total-conflict-register": total_conflict_register(),
        "commuting-only": commuting_only(),
    }
    for cap in counter_caps:
        obj = bounded_counter(cap)
        catalog[obj.name] = obj
    return catalog


_COUNTER_RE = re.compile(r"^bounded-counter\((\d+)\)$")


def resolve_object(name: str) -> SequentialObject:
    """Look up a builtin by name; ``bounded-counter(N)`` accepts any cap."""
    m = _COUNTER_RE.match(name)
    if m:
        return bounded_counter(int(m.group(1)))
    catalog = builtin_objects(())
    if name not in catalog:
        raise SpecificationError(f"unknown builtin object {name!r}")
    return catalog[name]


def load_object(path: str | Path) -> SequentialObject:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecificationError(f"{path}: not valid JSON: {exc}") from exc
    return SequentialObject.from_dict(data)


def dump_object(obj: SequentialObject, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
