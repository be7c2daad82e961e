"""Valency analysis of three-process binary consensus candidates.

Valency is taken with respect to the observer set {p1, p2} (the second and
third declared processes) and the input vector (0, 1, 1).  A configuration
is v-valent when no {p1, p2}-only path from it reaches a configuration in
which some process has decided 1-v, and bivalent when both decisions are
reachable that way.  When neither decision is reachable the configuration
is tagged ``undecided``, a diagnostic class kept apart from the three
valency tags.

The analyzer checks the chain of facts that rules out conflict-obstruction-
free consensus for three processes, on one concrete candidate:

* the initial configuration is 1-valent (bridged through the (1, 1, 1)
  graph, which {p1, p2} cannot tell apart);
* some bivalent configuration is reachable;
* every bivalent configuration has a {p1, p2} step leading to a bivalent
  configuration;
* following such steps closes a {p1, p2}-only cycle of bivalent
  configurations in which the two pending ``propose(1)`` instances commute
  yet never complete.
"""

from __future__ import annotations

import enum
import random
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np

from . import kernels
from .errors import InternalError, UsageError
from .execution import Algorithm, Configuration, Lasso, OperationInstance, Step
from .graph import ConfigurationGraph, build_graph
from .linearizability import collect_history, is_linearizable
from .objects import binary_consensus, conflict_relation
from .progress import (
    Condition,
    correct_in,
    eventually_conflict_scf,
    find_violation,
    instance_status,
)

IMPOSSIBILITY_INPUTS = ("0", "1", "1")
OBSERVERS = (1, 2)


class ValencyTag(str, enum.Enum):
    ZERO = "0-valent"
    ONE = "1-valent"
    BIVALENT = "bivalent"
    UNDECIDED = "undecided"

    def univalent(self) -> bool:
        return self in (ValencyTag.ZERO, ValencyTag.ONE)


TAG_CODES = (ValencyTag.UNDECIDED, ValencyTag.ZERO, ValencyTag.ONE, ValencyTag.BIVALENT)


def _require_three(alg: Algorithm) -> None:
    if len(alg.process_ids) != 3:
        raise UsageError(f"{alg.name}: the valency analyzer needs exactly 3 processes, got {len(alg.process_ids)}")


def observer_mask(g: ConfigurationGraph) -> np.ndarray:
    mask = np.zeros(g.succ.shape, dtype=bool)
    for p in OBSERVERS:
        mask[:, p] = g.succ[:, p] >= 0
    return mask


@dataclass
class ValencyGraph:
    """A configuration graph from one input vector plus valency tags."""

    graph: ConfigurationGraph
    inputs: dict[str, str]

    @property
    def algorithm(self) -> Algorithm:
        return self.graph.algorithm

    @property
    def root(self) -> int:
        return self.graph.roots[0]

    @cached_property
    def deciding0(self) -> np.ndarray:
        return self.graph.decided_mask("0")

    @cached_property
    def deciding1(self) -> np.ndarray:
        return self.graph.decided_mask("1")

    @cached_property
    def reaches(self) -> tuple[np.ndarray, np.ndarray]:
        mask = observer_mask(self.graph)
        r0 = kernels.backward_reach(self.graph.succ, mask, self.deciding0)
        r1 = kernels.backward_reach(self.graph.succ, mask, self.deciding1)
        return r0, r1

    @cached_property
    def tags(self) -> np.ndarray:
        """Per node: 0 undecided, 1 zero-valent, 2 one-valent, 3 bivalent (see ``TAG_CODES``)."""
        r0, r1 = self.reaches
        return r0.astype(np.int8) + 2 * r1.astype(np.int8)

    def is_deciding(self, i: int, v: str) -> bool:
        return bool((self.deciding0 if v == "0" else self.deciding1)[i])

    def valency(self, i: int) -> ValencyTag:
        return TAG_CODES[int(self.tags[i])]

    def tag_counts(self) -> dict[str, int]:
        counts = np.bincount(self.tags, minlength=4)
        return {TAG_CODES[k].value: int(counts[k]) for k in range(4)}


def build_valency_graph(
    alg: Algorithm, inputs: Sequence[str] = IMPOSSIBILITY_INPUTS, *, budget: int | None = None
) -> ValencyGraph:
    _require_three(alg)
    iv = alg.normalize_inputs(list(inputs))
    return ValencyGraph(build_graph(alg, iv, budget=budget), iv)


# -- safety ---------------------------------------------------------------------


@dataclass
class SafetyReport:
    validity: bool = True
    agreement: bool = True
    linearizable: bool = True
    persistent: bool = True
    violations: list[dict[str, Any]] = field(default_factory=list)
    sampled_paths: int = 0

    @property
    def ok(self) -> bool:
        return self.validity and self.agreement and self.linearizable and self.persistent

    def violated(self) -> list[str]:
        names = []
        for key in ("validity", "agreement", "persistent", "linearizable"):
            if not getattr(self, key):
                names.append(key)
        return names

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "validity": self.validity,
            "agreement": self.agreement,
            "decisions_persistent": self.persistent,
            "linearizable": self.linearizable,
            "sampled_paths": self.sampled_paths,
            "violations": self.violations,
        }


def _first(mask: np.ndarray) -> int | None:
    hits = np.flatnonzero(mask)
    return int(hits[0]) if len(hits) else None


def check_safety(
    g: ConfigurationGraph,
    *,
    samples: int = 200,
    seed: int = 0,
    max_path: int = 400,
) -> SafetyReport:
    """Validity, agreement and decision persistence on every node of a one-root graph.

    Also extracts histories from ``samples`` seeded random maximal paths and
    checks them for linearizability against binary consensus.
    """
    if len(g.roots) != 1:
        raise UsageError("check_safety needs a graph built from a single input vector")
    alg = g.algorithm
    report = SafetyReport()
    root = g.roots[0]
    start = g.configuration(root)
    proposed = {aut.id: inp for aut in alg.processes for inp, s in aut.initial.items() if s == start.local[alg.proc_index[aut.id]]}
    values = set(proposed.values())

    def witness(kind: str, i: int) -> None:
        _, path = g.path_to(i)
        report.violations.append({"property": kind, "path": path, "configuration": alg.describe(g.configuration(i))})

    for v in ("0", "1"):
        if v not in values:
            bad = _first(g.decided_mask(v))
            if bad is not None:
                report.validity = False
                witness("validity", bad)
    both = _first(g.decided_mask("0") & g.decided_mask("1"))
    if both is not None:
        report.agreement = False
        witness("agreement", both)
    # A decided process must stay decided: response states are halted.
    for aut in alg.processes:
        for s in aut.response:
            if not aut.is_halted(s):
                report.persistent = False
                report.violations.append({"property": "persistent", "process": aut.id, "state": s})
                break

    obj = binary_consensus()
    rng = random.Random(seed)
    for _ in range(samples):
        c = start
        schedule: list[str] = []
        for _ in range(max_path):
            live = [p for p in alg.process_ids if not alg.is_halted(c, p)]
            if not live:
                break
            p = rng.choice(live)
            schedule.append(p)
            c = alg.apply_step(c, p)
        _, trace = alg.run(start, schedule)
        result = is_linearizable(collect_history(trace), obj)
        report.sampled_paths += 1
        if not result:
            report.linearizable = False
            report.violations.append(
                {"property": "linearizable", "path": schedule, "history": result.counterexample.to_text()}
            )
            break
    return report


# -- valency premises --------------------------------------------------------------


@dataclass
class BridgeReport:
    """Outcome of comparing {p1,p2}-only executions from (0,1,1) and (1,1,1)."""

    holds: bool
    nodes_compared: int
    zero_reachable: bool
    valid_111: bool
    mismatch: dict[str, Any] | None = None


def observer_closure(g: ConfigurationGraph, root: int) -> np.ndarray:
    """Nodes reachable from ``root`` by {p1,p2}-only paths."""
    mask = observer_mask(g)
    seen = np.zeros(g.n, dtype=bool)
    seen[root] = True
    frontier = np.array([root], dtype=np.int64)
    cols = list(OBSERVERS)
    while len(frontier):
        nxt = g.succ[frontier][:, cols][mask[frontier][:, cols]]
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    return seen


def check_initial_valency(vg: ValencyGraph, *, budget: int | None = None) -> BridgeReport:
    """The root under (0,1,1) reaches no 0-decision by {p1,p2}-only paths.

    Every {p1,p2}-only execution from (0,1,1) leaves p0 in its initial
    state, so replacing p0's state by its (1,1,1) initial state gives a
    configuration of the (1,1,1) graph with the same memory and the same
    p1, p2 states.  The check builds that graph, maps every node of the
    {p1,p2}-only closure across, compares the observers' decisions, and uses
    validity on (1,1,1) to exclude 0.
    """
    alg = vg.algorithm
    g = vg.graph
    ones = {p: "1" for p in alg.process_ids}
    other = build_graph(alg, ones, budget=budget)
    closure = np.flatnonzero(observer_closure(g, vg.root))
    p0 = alg.processes[0]
    initial_111 = p0.initial["1"]
    valid_111 = not other.decided_mask("0").any()
    zero_reachable = False
    for i in closure.tolist():
        c = g.configuration(i)
        if c.local[0] != g.configuration(vg.root).local[0]:
            raise InternalError("p0 moved along a {p1,p2}-only path")
        mapped = Configuration((initial_111,) + c.local[1:], c.memory)
        j = other.index_of(mapped)
        if j is None:
            return BridgeReport(False, int(len(closure)), False, valid_111, {"node": alg.describe(c), "reason": "no counterpart"})
        if vg.deciding0[i]:
            zero_reachable = True
        mine = {p: r for p, r in alg.decisions(c).items() if p != alg.process_ids[0]}
        theirs = {p: r for p, r in alg.decisions(mapped).items() if p != alg.process_ids[0]}
        if mine != theirs:
            return BridgeReport(False, int(len(closure)), zero_reachable, valid_111, {"node": alg.describe(c), "reason": "observer decisions differ"})
    holds = valid_111 and not zero_reachable
    return BridgeReport(holds, int(len(closure)), zero_reachable, valid_111)


@dataclass
class PremiseReport:
    solo_p0_decides: str | None
    solo_p0_steps: int
    message: str


def solo_run(alg: Algorithm, c: Configuration, p: str, limit: int = 100_000) -> tuple[Configuration, int, bool]:
    """Run ``p`` alone until it halts or a configuration repeats; returns (end, steps, halted)."""
    seen = {c}
    steps = 0
    while not alg.is_halted(c, p):
        c = alg.apply_step(c, p)
        steps += 1
        if c in seen or steps >= limit:
            return c, steps, False
        seen.add(c)
    return c, steps, True


def solo_premise(vg: ValencyGraph) -> PremiseReport:
    alg = vg.algorithm
    p0 = alg.process_ids[0]
    end, steps, halted = solo_run(alg, vg.graph.configuration(vg.root), p0)
    decided = alg.decisions(end).get(p0) if halted else None
    if decided is None:
        msg = "solo termination of p0 fails"
    elif decided != vg.inputs[p0]:
        msg = f"p0 running solo decides {decided}, not its input"
    else:
        msg = f"p0 running solo decides {decided} after {steps} steps"
    return PremiseReport(decided, steps, msg)


def find_bivalent(vg: ValencyGraph) -> tuple[int, list[str]] | None:
    """A bivalent node closest to the root (BFS order) and the schedule reaching it."""
    i = _first(vg.tags == 3)
    if i is None:
        return None
    _, path = vg.graph.path_to(i)
    return i, path


def extend_bivalent(vg: ValencyGraph, i: int) -> tuple[Step, int] | None:
    """A {p1,p2} step from bivalent node ``i`` to a bivalent node; p1 preferred."""
    if vg.tags[i] != 3:
        raise UsageError("extend_bivalent needs a bivalent configuration")
    for p in OBSERVERS:
        j = int(vg.graph.succ[i, p])
        if j >= 0 and vg.tags[j] == 3:
            return vg.graph.step(i, p), j
    return None


@dataclass
class ExtensionScan:
    bivalent: int
    counterexamples: list[int]
    p1_extensions: int
    p2_only_extensions: int

    @property
    def holds(self) -> bool:
        return not self.counterexamples


def scan_extensions(vg: ValencyGraph) -> ExtensionScan:
    """Check at every bivalent node that some {p1,p2} step stays bivalent."""
    biv = vg.tags == 3
    succ = vg.graph.succ
    ok = np.zeros(vg.graph.n, dtype=bool)
    via = {}
    for p in OBSERVERS:
        col = succ[:, p]
        good = (col >= 0) & biv[np.where(col >= 0, col, 0)]
        via[p] = good
        ok |= good
    bad = np.flatnonzero(biv & ~ok)
    return ExtensionScan(
        bivalent=int(biv.sum()),
        counterexamples=[int(x) for x in bad[:20]],
        p1_extensions=int((biv & via[1]).sum()),
        p2_only_extensions=int((biv & via[2] & ~via[1]).sum()),
    )


def check_monotonicity(vg: ValencyGraph) -> list[tuple[int, int]]:
    """{p1,p2} edges from a univalent node to a node with a different tag."""
    bad = []
    for p in OBSERVERS:
        col = vg.graph.succ[:, p]
        src = np.flatnonzero((col >= 0) & ((vg.tags == 1) | (vg.tags == 2)))
        differ = vg.tags[col[src]] != vg.tags[src]
        bad.extend((int(a), int(b)) for a, b in zip(src[differ], col[src][differ]))
    return bad


# -- the refutation ---------------------------------------------------------------


@dataclass
class Refutation:
    """Outcome of the full analysis; ``lasso`` is set iff every step succeeded."""

    algorithm: str
    inputs: dict[str, str]
    safety: SafetyReport
    premise: PremiseReport | None = None
    bridge: BridgeReport | None = None
    root_tag: ValencyTag | None = None
    bivalent_path: list[str] | None = None
    extensions: ExtensionScan | None = None
    lasso: Lasso | None = None
    cycle_tags: list[str] = field(default_factory=list)
    pending: list[OperationInstance] = field(default_factory=list)
    cross_check: dict[str, Any] | None = None
    statistics: dict[str, Any] = field(default_factory=dict)
    failure: str | None = None

    @property
    def verified(self) -> bool:
        return self.lasso is not None and self.failure is None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "algorithm": self.algorithm,
            "inputs": self.inputs,
            "verified": self.verified,
            "failure": self.failure,
            "premises": {
                "safety": self.safety.to_dict(),
                "solo_p0": None
                if self.premise is None
                else {"decides": self.premise.solo_p0_decides, "steps": self.premise.solo_p0_steps, "message": self.premise.message},
                "initial_valency_bridge": None
                if self.bridge is None
                else {
                    "holds": self.bridge.holds,
                    "nodes_compared": self.bridge.nodes_compared,
                    "zero_reachable": self.bridge.zero_reachable,
                    "valid_111": self.bridge.valid_111,
                    "mismatch": self.bridge.mismatch,
                },
            },
            "root_tag": None if self.root_tag is None else self.root_tag.value,
            "bivalent_path": self.bivalent_path,
            "bivalent_extension_scan": None
            if self.extensions is None
            else {
                "bivalent": self.extensions.bivalent,
                "holds": self.extensions.holds,
                "p1_extensions": self.extensions.p1_extensions,
                "p2_only_extensions": self.extensions.p2_only_extensions,
            },
            "lasso": None if self.lasso is None else self.lasso.to_dict(),
            "cycle_tags": self.cycle_tags,
            "pending": [f"{i.operation} by {i.process}" for i in self.pending],
            "cross_check": self.cross_check,
            "statistics": self.statistics,
        }
        return out


def construct_refutation(
    alg: Algorithm,
    *,
    budget: int | None = None,
    vg: ValencyGraph | None = None,
    cross_check: bool = True,
    seed: int = 0,
) -> Refutation:
    """Run the whole chain on ``alg`` with inputs (0,1,1).

    Stops at the first failed premise and names it in ``failure``.
    """
    _require_three(alg)
    if vg is None:
        vg = build_valency_graph(alg, budget=budget)
    g = vg.graph
    safety = check_safety(g, seed=seed)
    ref = Refutation(alg.name, vg.inputs, safety, statistics={"states": g.n, "edges": g.edge_count, "tags": vg.tag_counts()})
    if not safety.ok:
        ref.failure = "safety: " + ", ".join(safety.violated())
        return ref
    ref.premise = solo_premise(vg)
    if ref.premise.solo_p0_decides != vg.inputs[alg.process_ids[0]]:
        ref.failure = ref.premise.message
        return ref
    ref.bridge = check_initial_valency(vg, budget=budget)
    ref.root_tag = vg.valency(vg.root)
    if not ref.bridge.holds or ref.root_tag is not ValencyTag.ONE:
        ref.failure = f"initial configuration is {ref.root_tag.value}, expected 1-valent"
        return ref
    found = find_bivalent(vg)
    if found is None:
        ref.failure = "no bivalent configuration is reachable"
        return ref
    b, path = found
    ref.bivalent_path = path
    ref.extensions = scan_extensions(vg)
    if not ref.extensions.holds:
        ref.failure = "a bivalent configuration has no bivalent {p1,p2} extension"
        return ref

    # Follow bivalent extensions until a node repeats.
    position: dict[int, int] = {}
    walk: list[int] = []
    procs: list[str] = []
    node = b
    while node not in position:
        position[node] = len(walk)
        walk.append(node)
        ext = extend_bivalent(vg, node)
        if ext is None:
            raise InternalError("extension scan passed but a bivalent node has no extension")
        step, node = ext
        procs.append(step.process)
    k = position[node]
    root_cfg = g.configuration(vg.root)
    lasso = alg.close_lasso(g.configuration(node), procs[k:], start=root_cfg, prefix=path + procs[:k])
    if lasso is None:
        raise InternalError("refutation cycle failed to close")
    cycle_nodes = walk[k:]
    ref.cycle_tags = [vg.valency(i).value for i in cycle_nodes]
    cr = conflict_relation(binary_consensus())
    observers = {alg.process_ids[p] for p in OBSERVERS}
    problems = []
    if not set(lasso.cycle) <= observers:
        problems.append("cycle is not {p1,p2}-only")
    if any(vg.deciding0[i] or vg.deciding1[i] for i in cycle_nodes):
        problems.append("a cycle configuration is deciding")
    pending = []
    for p in sorted(observers):
        trace = lasso.unroll(1)
        mine = [e for e in trace if e.process == p]
        if not mine:
            problems.append(f"{p} takes no step")
            continue
        inst = OperationInstance(alg.object_name, mine[-1].operation, p, mine[-1].ordinal)
        pending.append(inst)
        status = instance_status(lasso, inst, cr)
        if status.completed:
            problems.append(f"{p} completes its proposal")
        if not correct_in(lasso, p):
            problems.append(f"{p} is not correct in the lasso")
        if not eventually_conflict_scf(lasso, inst, cr):
            problems.append(f"{p}'s proposal is not eventually conflict-step-contention free")
    ref.pending = pending
    ref.lasso = lasso
    if problems:
        ref.failure = "; ".join(problems)
        return ref
    if cross_check:
        verdict = find_violation(alg, vg.inputs, Condition.COF, cr, graph=g)
        ref.cross_check = {
            "cof_holds": verdict.holds,
            "agrees": not verdict.holds,
            "witness": None if verdict.witness is None else verdict.witness.to_dict(),
        }
        if verdict.holds:
            ref.failure = "progress checker found no COF violation"
    return ref


# -- DOT export ---------------------------------------------------------------------

TAG_COLORS = {
    ValencyTag.ZERO: "lightblue",
    ValencyTag.ONE: "salmon",
    ValencyTag.BIVALENT: "gold",
    ValencyTag.UNDECIDED: "lightgray",
}


def critical_edges(vg: ValencyGraph, nodes: np.ndarray | None = None) -> list[tuple[int, int, int]]:
    """Edges (src, process, dst) from a univalent node to a node with another tag."""
    out = []
    succ = vg.graph.succ
    src_all = np.flatnonzero((vg.tags == 1) | (vg.tags == 2)) if nodes is None else nodes
    for i in src_all.tolist():
        t = vg.tags[i]
        if t not in (1, 2):
            continue
        for p in range(succ.shape[1]):
            j = int(succ[i, p])
            if j >= 0 and vg.tags[j] != t:
                out.append((i, p, j))
    return out


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_valency_dot(
    vg: ValencyGraph,
    nodes: Sequence[int] | np.ndarray | None = None,
    *,
    max_nodes: int = 2000,
    highlight_path: Sequence[int] = (),
) -> str:
    """DOT rendering of (a subset of) the graph, nodes colored by valency tag.

    Without ``nodes`` the whole graph is drawn if it has at most
    ``max_nodes`` nodes; otherwise pass a subset.  Valency-changing steps
    out of univalent nodes are drawn bold red.  The legend lists the three
    valency classes; undecided nodes, if any, are drawn gray.
    """
    g = vg.graph
    alg = g.algorithm
    if nodes is None:
        if g.n > max_nodes:
            raise UsageError(f"graph has {g.n} nodes; pass a node subset to export")
        nodes = np.arange(g.n)
    keep = sorted({int(x) for x in nodes})
    present = set(keep)
    on_path = set(zip(list(highlight_path)[:-1], list(highlight_path)[1:]))
    lines = [
        "digraph valency {",
        "  rankdir=LR;",
        '  node [shape=box, style=filled, fontname="Helvetica", fontsize=9];',
        "  subgraph cluster_legend {",
        '    label="legend";',
    ]
    for tag in (ValencyTag.ZERO, ValencyTag.ONE, ValencyTag.BIVALENT):
        lines.append(f"    {_quote('legend ' + tag.value)} [label={_quote(tag.value)}, fillcolor={TAG_COLORS[tag]}];")
    lines.append("  }")
    for i in keep:
        tag = vg.valency(i)
        c = g.configuration(i)
        label = " | ".join(c.local) + "\\n" + " ".join(c.memory)
        extra = ", peripheries=2" if i == vg.root else ""
        lines.append(f"  n{i} [label={_quote(label)}, fillcolor={TAG_COLORS[tag]}, tooltip={_quote(tag.value)}{extra}];")
    critical = {(a, p, b) for a, p, b in critical_edges(vg, np.asarray(keep, dtype=np.int64))}
    for i in keep:
        for p in range(g.succ.shape[1]):
            j = int(g.succ[i, p])
            if j < 0 or j not in present:
                continue
            step = g.step(i, p)
            attrs = [f"label={_quote(str(step))}"]
            if (i, p, j) in critical:
                attrs += ["color=red", "penwidth=2.5", 'class="critical"']
            elif (i, j) in on_path:
                attrs += ["penwidth=2"]
            lines.append(f"  n{i} -> n{j} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def refutation_path(vg: ValencyGraph, ref: Refutation) -> list[int]:
    """Node indices visited by ``prefix . cycle`` of the refutation lasso."""
    if ref.lasso is None:
        return []
    alg = vg.algorithm
    c = ref.lasso.start
    path = [vg.graph.index_of(c)]
    for p in ref.lasso.prefix + ref.lasso.cycle:
        c = alg.apply_step(c, p)
        path.append(vg.graph.index_of(c))
    return path


def refutation_nodes(vg: ValencyGraph, ref: Refutation) -> list[int]:
    """Nodes along the refutation lasso plus their immediate successors."""
    path = refutation_path(vg, ref) or [vg.root]
    nodes = set(path)
    for i in path:
        for j in vg.graph.succ[i].tolist():
            if j >= 0:
                nodes.add(j)
    return sorted(nodes)
