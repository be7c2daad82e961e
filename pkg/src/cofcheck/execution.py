"""Deterministic process automata over atomic read/write registers.

An :class:`Algorithm` is one automaton per process plus a register
declaration.  Each non-halted local state has exactly one pending action, a
read of one register or a write of a fixed value to one register.  The next
local state depends on the value read (reads) or only on the current state
(writes).  A local state may carry a response: entering it completes the
operation instance that was in progress.  Every non-halted state is labelled
with the operation it is executing, so instances can be attributed to steps.

Algorithm files are JSON documents::

    {
      "name": "...", "object": "binary-consensus",
      "registers": [{"id": "R0", "domain": ["_", "0A0", ...], "initial": "_"}],
      "processes": [
        {"id": "p0",
         "local_states": [...],
         "initial": {"<input>": "<state>", ...},
         "operation": {"<state>": "<op>", ...},
         "pending_action": {"<state>": {"read": "R1"} | {"write": "R0", "value": "0A0"}},
         "on_read": {"<state>": {"<value>": "<state>", ...}},
         "on_write": {"<state>": "<state>"},
         "response": {"<state>": "<response>"}}
      ],
      "inputs": {"p0": "0", ...}
    }
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Union

from .errors import SpecificationError, UsageError

READ = "R"
WRITE = "W"


@dataclass(frozen=True)
class Register:
    id: str
    domain: tuple[str, ...]
    initial: str

    def __post_init__(self) -> None:
        if not self.domain:
            raise SpecificationError(f"register {self.id}: empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise SpecificationError(f"register {self.id}: duplicate domain values")
        if self.initial not in self.domain:
            raise SpecificationError(f"register {self.id}: initial value {self.initial!r} outside domain")


@dataclass(frozen=True)
class Read:
    register: str


@dataclass(frozen=True)
class Write:
    register: str
    value: str


Action = Union[Read, Write]


@dataclass(frozen=True)
class Step:
    """A step ``(p, m, a)``: process, register accessed, and R or W."""

    process: str
    register: str
    action: str

    def __str__(self) -> str:
        return f"({self.process},{self.register},{self.action})"


@dataclass(frozen=True)
class OperationInstance:
    """``(x, o, p)`` plus the invocation ordinal of ``p`` (0 for its first)."""

    object: str
    operation: str
    process: str
    ordinal: int = 0

    def __str__(self) -> str:
        return f"({self.object},{self.operation},{self.process})#{self.ordinal}"


@dataclass(frozen=True)
class Configuration:
    """Local state of every process and value of every register, in declaration order."""

    local: tuple[str, ...]
    memory: tuple[str, ...]


@dataclass(frozen=True)
class TraceEntry:
    seq: int
    process: str
    register: str
    action: str
    value: str
    operation: str
    ordinal: int
    invokes: bool
    response: str | None = None

    @property
    def step(self) -> Step:
        return Step(self.process, self.register, self.action)

    def line(self) -> str:
        resp = "-" if self.response is None else self.response
        return f"{self.seq} {self.process} {self.register} {self.action} {self.value} {resp}"


def format_trace(trace: Iterable[TraceEntry]) -> str:
    """Line-oriented trace: ``seq process register action value response-or-dash``."""
    return "".join(e.line() + "\n" for e in trace)


@dataclass(frozen=True)
class ProcessAutomaton:
    id: str
    local_states: tuple[str, ...]
    initial: Mapping[str, str]
    operation: Mapping[str, str]
    pending_action: Mapping[str, Action]
    on_read: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    on_write: Mapping[str, str] = field(default_factory=dict)
    response: Mapping[str, str] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.id, self.local_states))

    def is_halted(self, state: str) -> bool:
        return state not in self.pending_action

    def to_dict(self) -> dict[str, Any]:
        actions: dict[str, Any] = {}
        for s, a in self.pending_action.items():
            actions[s] = {"read": a.register} if isinstance(a, Read) else {"write": a.register, "value": a.value}
        return {
            "id": self.id,
            "local_states": list(self.local_states),
            "initial": dict(self.initial),
            "operation": dict(self.operation),
            "pending_action": actions,
            "on_read": {s: dict(t) for s, t in self.on_read.items()},
            "on_write": dict(self.on_write),
            "response": dict(self.response),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ProcessAutomaton:
        actions: dict[str, Action] = {}
        for s, a in data.get("pending_action", {}).items():
            if "read" in a and "write" not in a:
                actions[s] = Read(str(a["read"]))
            elif "write" in a and "value" in a and "read" not in a:
                actions[s] = Write(str(a["write"]), str(a["value"]))
            else:
                raise SpecificationError(f"process {data.get('id')}: bad pending action for {s}: {a!r}")
        return cls(
            id=str(data["id"]),
            local_states=tuple(str(s) for s in data["local_states"]),
            initial={str(k): str(v) for k, v in data["initial"].items()},
            operation={str(k): str(v) for k, v in data.get("operation", {}).items()},
            pending_action=actions,
            on_read={str(s): {str(v): str(t) for v, t in m.items()} for s, m in data.get("on_read", {}).items()},
            on_write={str(k): str(v) for k, v in data.get("on_write", {}).items()},
            response={str(k): str(v) for k, v in data.get("response", {}).items()},
        )


InputVector = Mapping[str, str]


class Algorithm:
    """A finite-state read/write algorithm: registers plus one automaton per process."""

    def __init__(
        self,
        name: str,
        object_name: str,
        registers: Sequence[Register],
        processes: Sequence[ProcessAutomaton],
        inputs: Mapping[str, str] | None = None,
    ) -> None:
        self.name = name
        self.object_name = object_name
        self.registers = tuple(registers)
        self.processes = tuple(processes)
        self.process_ids = tuple(p.id for p in self.processes)
        self.register_ids = tuple(r.id for r in self.registers)
        self.proc_index = {p: i for i, p in enumerate(self.process_ids)}
        self.reg_index = {r: i for i, r in enumerate(self.register_ids)}
        if len(self.proc_index) != len(self.processes) or not self.processes:
            raise SpecificationError(f"{name}: process ids must be nonempty and distinct")
        if len(self.reg_index) != len(self.registers):
            raise SpecificationError(f"{name}: register ids must be distinct")
        self.inputs = dict(inputs) if inputs else None
        self.validate()

    def __repr__(self) -> str:
        return f"Algorithm({self.name!r}, processes={list(self.process_ids)}, registers={len(self.registers)})"

    def validate(self) -> None:
        domains = {r.id: set(r.domain) for r in self.registers}
        for aut in self.processes:
            where = f"{self.name}/{aut.id}"
            states = set(aut.local_states)
            if len(states) != len(aut.local_states):
                raise SpecificationError(f"{where}: duplicate local states")
            if not aut.initial:
                raise SpecificationError(f"{where}: no initial states")
            for inp, s in aut.initial.items():
                if s not in states:
                    raise SpecificationError(f"{where}: initial state {s!r} for input {inp!r} undeclared")
                if s in aut.response:
                    raise SpecificationError(f"{where}: initial state {s!r} carries a response")
            for table in (aut.pending_action, aut.on_read, aut.on_write, aut.response, aut.operation):
                unknown = set(table) - states
                if unknown:
                    raise SpecificationError(f"{where}: tables mention undeclared states {sorted(unknown)[:5]}")
            for s in aut.local_states:
                action = aut.pending_action.get(s)
                if action is None:
                    if s in aut.operation:
                        raise SpecificationError(f"{where}: halted state {s!r} is labelled with an operation")
                    continue
                if s not in aut.operation:
                    raise SpecificationError(f"{where}: state {s!r} has a pending action but no operation")
                if action.register not in domains:
                    raise SpecificationError(f"{where}: state {s!r} accesses unknown register {action.register!r}")
                if isinstance(action, Read):
                    branches = aut.on_read.get(s)
                    if branches is None or set(branches) != domains[action.register]:
                        raise SpecificationError(
                            f"{where}: on_read for {s!r} must cover the domain of {action.register}"
                        )
                    succs = list(branches.values())
                else:
                    if action.value not in domains[action.register]:
                        raise SpecificationError(
                            f"{where}: state {s!r} writes {action.value!r} outside the domain of {action.register}"
                        )
                    if s not in aut.on_write:
                        raise SpecificationError(f"{where}: write state {s!r} has no on_write successor")
                    succs = [aut.on_write[s]]
                for t in succs:
                    if t not in states:
                        raise SpecificationError(f"{where}: successor {t!r} of {s!r} undeclared")
                    if t in aut.response:
                        continue
                    if aut.is_halted(t):
                        raise SpecificationError(f"{where}: {s!r} halts in {t!r} without a response")
                    if aut.operation[t] != aut.operation[s]:
                        raise SpecificationError(
                            f"{where}: operation changes from {aut.operation[s]!r} to "
                            f"{aut.operation[t]!r} without a response"
                        )
            for s in aut.local_states:
                if s in aut.on_write and not isinstance(aut.pending_action.get(s), Write):
                    raise SpecificationError(f"{where}: on_write given for non-write state {s!r}")
                if s in aut.on_read and not isinstance(aut.pending_action.get(s), Read):
                    raise SpecificationError(f"{where}: on_read given for non-read state {s!r}")
        if self.inputs is not None:
            self.initial_configuration(self.inputs)

    # -- identifiers ------------------------------------------------------

    def automaton(self, p: str) -> ProcessAutomaton:
        try:
            return self.processes[self.proc_index[p]]
        except KeyError:
            raise UsageError(f"{self.name}: unknown process {p!r}") from None

    @cached_property
    def input_domains(self) -> dict[str, tuple[str, ...]]:
        return {aut.id: tuple(aut.initial) for aut in self.processes}

    def normalize_inputs(self, inputs: InputVector | Sequence[str] | None) -> dict[str, str]:
        if inputs is None:
            if self.inputs is None:
                raise UsageError(f"{self.name}: no input vector given and no default declared")
            inputs = self.inputs
        if not isinstance(inputs, Mapping):
            values = list(inputs)
            if len(values) != len(self.process_ids):
                raise UsageError(f"{self.name}: expected {len(self.process_ids)} inputs, got {len(values)}")
            inputs = dict(zip(self.process_ids, values))
        out = {}
        for p in self.process_ids:
            if p not in inputs:
                raise UsageError(f"{self.name}: no input for process {p}")
            v = str(inputs[p])
            if v not in self.automaton(p).initial:
                raise UsageError(f"{self.name}: input {v!r} not accepted by {p}")
            out[p] = v
        extra = set(inputs) - set(self.process_ids)
        if extra:
            raise UsageError(f"{self.name}: inputs for unknown processes {sorted(extra)}")
        return out

    def initial_configuration(self, inputs: InputVector | Sequence[str] | None = None) -> Configuration:
        iv = self.normalize_inputs(inputs)
        return Configuration(
            local=tuple(aut.initial[iv[aut.id]] for aut in self.processes),
            memory=tuple(r.initial for r in self.registers),
        )

    def local_state(self, c: Configuration, p: str) -> str:
        return c.local[self.proc_index[p]]

    def value(self, c: Configuration, register: str) -> str:
        return c.memory[self.reg_index[register]]

    def describe(self, c: Configuration) -> dict[str, dict[str, str]]:
        return {"local": dict(zip(self.process_ids, c.local)), "memory": dict(zip(self.register_ids, c.memory))}

    def check_configuration(self, c: Configuration) -> None:
        if len(c.local) != len(self.processes) or len(c.memory) != len(self.registers):
            raise SpecificationError(f"{self.name}: configuration shape does not match the declaration")
        for aut, s in zip(self.processes, c.local):
            if s not in aut.pending_action and s not in aut.response and s not in set(aut.local_states):
                raise SpecificationError(f"{self.name}: {aut.id} in undeclared state {s!r}")
        for r, v in zip(self.registers, c.memory):
            if v not in r.domain:
                raise SpecificationError(f"{self.name}: register {r.id} holds {v!r} outside its domain")

    # -- semantics ----------------------------------------------------------

    def operation_of(self, c: Configuration, p: str) -> str | None:
        """Operation ``p`` is executing in ``c``, or None if ``p`` is halted."""
        aut = self.automaton(p)
        return aut.operation.get(c.local[self.proc_index[p]])

    def decisions(self, c: Configuration) -> dict[str, str]:
        """Processes whose local state carries a response, mapped to that response."""
        out = {}
        for aut, s in zip(self.processes, c.local):
            r = aut.response.get(s)
            if r is not None:
                out[aut.id] = r
        return out

    def decided_values(self, c: Configuration) -> frozenset[str]:
        return frozenset(self.decisions(c).values())

    def is_halted(self, c: Configuration, p: str) -> bool:
        return self.automaton(p).is_halted(c.local[self.proc_index[p]])

    def enabled_step(self, c: Configuration, p: str) -> Step | None:
        aut = self.automaton(p)
        action = aut.pending_action.get(c.local[self.proc_index[p]])
        if action is None:
            return None
        return Step(p, action.register, READ if isinstance(action, Read) else WRITE)

    def _transition(self, c: Configuration, p: str) -> tuple[Configuration, Step, str, str | None]:
        i = self.proc_index[p]
        aut = self.processes[i]
        s = c.local[i]
        action = aut.pending_action.get(s)
        if action is None:
            raise UsageError(f"{self.name}: process {p} is halted in {s!r}")
        k = self.reg_index[action.register]
        if isinstance(action, Read):
            value = c.memory[k]
            t = aut.on_read[s][value]
            memory = c.memory
            step = Step(p, action.register, READ)
        else:
            value = action.value
            t = aut.on_write[s]
            memory = c.memory[:k] + (value,) + c.memory[k + 1 :]
            step = Step(p, action.register, WRITE)
        local = c.local[:i] + (t,) + c.local[i + 1 :]
        return Configuration(local, memory), step, value, aut.response.get(t)

    def apply_step(self, c: Configuration, p: str) -> Configuration:
        return self._transition(c, p)[0]

    def run(
        self,
        c: Configuration,
        schedule: Iterable[str],
        *,
        invoked: Mapping[str, int] | None = None,
        ordinals: Mapping[str, int] | None = None,
    ) -> tuple[Configuration, list[TraceEntry]]:
        """Fold :meth:`apply_step` over ``schedule``; halted processes are skipped.

        ``invoked`` lists processes whose current operation was already
        invoked before ``c`` (their first step here does not invoke).
        ``ordinals`` gives the ordinal of each process's current instance.
        """
        already = set(invoked or ())
        ords = {p: 0 for p in self.process_ids}
        if ordinals:
            ords.update(ordinals)
        fresh = {p: p not in already for p in self.process_ids}
        trace = []
        for p in schedule:
            if p not in self.proc_index:
                raise UsageError(f"{self.name}: schedule names unknown process {p!r}")
            if self.is_halted(c, p):
                continue
            op = self.operation_of(c, p)
            c, step, value, resp = self._transition(c, p)
            trace.append(
                TraceEntry(
                    seq=len(trace) + 1,
                    process=p,
                    register=step.register,
                    action=step.action,
                    value=value,
                    operation=op,
                    ordinal=ords[p],
                    invokes=fresh[p],
                    response=resp,
                )
            )
            fresh[p] = False
            if resp is not None:
                ords[p] += 1
                fresh[p] = True
        return c, trace

    def close_lasso(
        self,
        prefix_end: Configuration,
        cycle: Sequence[str],
        *,
        start: Configuration | None = None,
        prefix: Sequence[str] = (),
    ) -> Lasso | None:
        """Return a lasso if running ``cycle`` from ``prefix_end`` comes back to it.

        Halted entries are dropped from both schedules; a cycle without any
        effective step is rejected.
        """
        if not cycle:
            raise UsageError("candidate cycle must be nonempty")
        if start is None:
            start, prefix = prefix_end, ()
        end, ptrace = self.run(start, prefix)
        if end != prefix_end:
            return None
        back, ctrace = self.run(prefix_end, cycle)
        if not ctrace or back != prefix_end:
            return None
        return Lasso(
            algorithm=self,
            start=start,
            prefix=tuple(e.process for e in ptrace),
            cycle=tuple(e.process for e in ctrace),
            anchor=prefix_end,
        )

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "name": self.name,
            "object": self.object_name,
            "registers": [{"id": r.id, "domain": list(r.domain), "initial": r.initial} for r in self.registers],
            "processes": [aut.to_dict() for aut in self.processes],
        }
        if self.inputs is not None:
            out["inputs"] = dict(self.inputs)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Algorithm:
        try:
            registers = [
                Register(str(r["id"]), tuple(str(v) for v in r["domain"]), str(r["initial"]))
                for r in data["registers"]
            ]
            processes = [ProcessAutomaton.from_dict(p) for p in data["processes"]]
            inputs = data.get("inputs")
            return cls(
                name=str(data.get("name", "algorithm")),
                object_name=str(data.get("object", "")),
                registers=registers,
                processes=processes,
                inputs={str(k): str(v) for k, v in inputs.items()} if inputs else None,
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise SpecificationError(f"malformed algorithm description: {exc!r}") from exc


@dataclass(frozen=True)
class Lasso:
    """``prefix . cycle^omega`` from ``start``; ``anchor`` is the configuration after the prefix."""

    algorithm: Algorithm = field(compare=False, repr=False)
    start: Configuration
    prefix: tuple[str, ...]
    cycle: tuple[str, ...]
    anchor: Configuration

    def __post_init__(self) -> None:
        if not self.cycle:
            raise UsageError("lasso cycle must be nonempty")

    def is_closed(self) -> bool:
        end, _ = self.algorithm.run(self.start, self.prefix)
        if end != self.anchor:
            return False
        back, trace = self.algorithm.run(self.anchor, self.cycle)
        return back == self.anchor and len(trace) == len(self.cycle)

    def unroll(self, times: int) -> list[TraceEntry]:
        """Trace of ``prefix . cycle^times`` with invocation bookkeeping carried across."""
        _, trace = self.algorithm.run(self.start, self.prefix + self.cycle * times)
        return trace

    def cycle_processes(self) -> frozenset[str]:
        return frozenset(self.cycle)

    def to_dict(self) -> dict[str, Any]:
        return {"prefix": list(self.prefix), "cycle": list(self.cycle)}


def is_p_only(schedule: Iterable[str], processes: Iterable[str]) -> bool:
    allowed = set(processes)
    return all(p in allowed for p in schedule)


def indistinguishable(alg: Algorithm, c1: Configuration, c2: Configuration, processes: Iterable[str]) -> bool:
    """Equal memory and equal local states for every process in ``processes``."""
    if c1.memory != c2.memory:
        return False
    return all(c1.local[alg.proc_index[p]] == c2.local[alg.proc_index[p]] for p in processes)


def load_algorithm(path: str | Path) -> Algorithm:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecificationError(f"{path}: not valid JSON: {exc}") from exc
    return Algorithm.from_dict(data)


def dump_algorithm(alg: Algorithm, path: str | Path) -> None:
    Path(path).write_text(json.dumps(alg.to_dict(), indent=1, ensure_ascii=False) + "\n", encoding="utf-8")


def parse_schedule(text: str) -> tuple[tuple[str, ...], tuple[str, ...] | None]:
    """Parse a schedule file: one process id per line, ``#`` comments, optional ``CYCLE:`` marker.

    Returns ``(prefix, cycle)``; ``cycle`` is None when there is no marker.
    """
    prefix: list[str] = []
    cycle: list[str] | None = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.upper().startswith("CYCLE:"):
            if cycle is not None:
                raise SpecificationError("schedule has more than one CYCLE: marker")
            cycle = []
            line = line[len("CYCLE:") :].strip()
            if not line:
                continue
        if len(line.split()) != 1:
            raise SpecificationError(f"schedule line must hold one process id: {raw!r}")
        (cycle if cycle is not None else prefix).append(line)
    if cycle is not None and not cycle:
        raise SpecificationError("CYCLE: marker with an empty cycle")
    return tuple(prefix), None if cycle is None else tuple(cycle)


def format_schedule(prefix: Sequence[str], cycle: Sequence[str] | None = None) -> str:
    lines = list(prefix)
    if cycle:
        lines.append("CYCLE:")
        lines.extend(cycle)
    return "\n".join(lines) + "\n"
