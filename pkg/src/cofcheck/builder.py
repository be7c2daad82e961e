"""Compile automata from transition functions over structured local states.

Writing automaton tables by hand is error-prone, so reference algorithms
describe each local state as a hashable value and supply a function that
maps it to a :class:`Behavior`.  :func:`compile_automaton` enumerates the
local states reachable from the initial ones (branching over every value a
read can return) and emits a :class:`ProcessAutomaton`.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Callable, Hashable, Mapping
from dataclasses import dataclass
from typing import Union

from .errors import SpecificationError
from .execution import ProcessAutomaton, Read, Write

State = Hashable


@dataclass(frozen=True)
class ReadThen:
    register: str
    next: Callable[[str], State]


@dataclass(frozen=True)
class WriteThen:
    register: str
    value: str
    next: State


@dataclass(frozen=True)
class Behavior:
    """What a local state does: its operation label, response, and pending action."""

    operation: str | None = None
    response: str | None = None
    action: Union[ReadThen, WriteThen, None] = None


def compile_automaton(
    pid: str,
    initial: Mapping[str, State],
    behave: Callable[[State], Behavior],
    domains: Mapping[str, tuple[str, ...]],
    name: Callable[[State], str] = str,
) -> ProcessAutomaton:
    order: list[State] = []
    seen: set[State] = set()
    queue: deque[State] = deque()
    for s in initial.values():
        if s not in seen:
            seen.add(s)
            order.append(s)
            queue.append(s)
    operation: dict[str, str] = {}
    pending: dict[str, Read | Write] = {}
    on_read: dict[str, dict[str, str]] = {}
    on_write: dict[str, str] = {}
    response: dict[str, str] = {}
    names: dict[State, str] = {}

    def label(s: State) -> str:
        if s not in names:
            n = name(s)
            if n in names.values():
                raise SpecificationError(f"{pid}: two local states share the name {n!r}")
            names[s] = n
        return names[s]

    def visit(t: State) -> str:
        if t not in seen:
            seen.add(t)
            order.append(t)
            queue.append(t)
        return label(t)

    while queue:
        s = queue.popleft()
        n = label(s)
        b = behave(s)
        if b.response is not None:
            response[n] = b.response
        if b.action is None:
            continue
        if b.operation is None:
            raise SpecificationError(f"{pid}: state {n!r} acts without an operation label")
        operation[n] = b.operation
        a = b.action
        if isinstance(a, ReadThen):
            pending[n] = Read(a.register)
            on_read[n] = {v: visit(a.next(v)) for v in domains[a.register]}
        else:
            pending[n] = Write(a.register, a.value)
            on_write[n] = visit(a.next)
    return ProcessAutomaton(
        id=pid,
        local_states=tuple(label(s) for s in order),
        initial={k: label(s) for k, s in initial.items()},
        operation=operation,
        pending_action=pending,
        on_read=on_read,
        on_write=on_write,
        response=response,
    )
