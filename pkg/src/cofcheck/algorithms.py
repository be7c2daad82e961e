"""Reference algorithms and their manifests.

Every algorithm is generated from a transition function (see
:mod:`cofcheck.builder`) and also ships as JSON under ``cofcheck/data``;
the test suite checks the shipped files against regeneration.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .builder import Behavior, ReadThen, WriteThen, compile_automaton
from .errors import SpecificationError
from .execution import Algorithm, Register, dump_algorithm, load_algorithm
from .objects import ACK

EMPTY = "_"


def propose(v: str) -> str:
    return f"propose({v})"


# -- cons2: two-process commit/adopt rounds ------------------------------------
#
# Each process owns one register holding its round (mod 3), its phase (A or
# B), a commit flag in phase B, and its preference.  A round is: write
# (A, pref); read the other register and commit iff it shows no conflicting
# preference in this round; write (B, flag, pref); read the other register
# and decide on a commit that the other side cannot contradict, else move to
# the next round, adopting a value the other side committed.  Seeing the
# other process one round ahead makes a process jump to that round with the
# other's preference.  Two processes are never more than one round apart,
# so rounds mod 3 are unambiguous.


def _cons2_value(x: str) -> tuple[int, str, str, str] | None:
    if x == EMPTY:
        return None
    r, phase = int(x[0]), x[1]
    if phase == "A":
        return r, "A", "", x[2]
    return r, "B", x[2], x[3]


def _cons2_domain() -> tuple[str, ...]:
    vals = [EMPTY]
    for r in range(3):
        for v in "01":
            vals.append(f"{r}A{v}")
        for c in "cn":
            for v in "01":
                vals.append(f"{r}B{c}{v}")
    return tuple(vals)


def _cons2_behavior(own: str, other: str):
    def behave(s) -> Behavior:
        kind, inp = s[0], s[1]
        op = propose(inp)
        if kind == "D":
            return Behavior(response=s[2])
        if kind == "Aw":
            _, _, r, v = s
            return Behavior(op, action=WriteThen(own, f"{r}A{v}", ("Ar", inp, r, v)))
        if kind == "Ar":
            _, _, r, v = s

            def after_a(x: str):
                seen = _cons2_value(x)
                if seen is None:
                    return ("Bw", inp, r, "c", v)
                rx, _, _, vx = seen
                rel = (rx - r) % 3
                if rel == 1:
                    return ("Aw", inp, rx, vx)
                if rel == 2:
                    return ("Bw", inp, r, "c", v)
                return ("Bw", inp, r, "c" if vx == v else "n", v)

            return Behavior(op, action=ReadThen(other, after_a))
        if kind == "Bw":
            _, _, r, c, v = s
            return Behavior(op, action=WriteThen(own, f"{r}B{c}{v}", ("Br", inp, r, c, v)))
        if kind == "Br":
            _, _, r, c, v = s
            nxt = (r + 1) % 3

            def after_b(x: str):
                seen = _cons2_value(x)
                if seen is not None:
                    rx, phase, cx, vx = seen
                    rel = (rx - r) % 3
                    if rel == 1:
                        return ("Aw", inp, rx, vx)
                    if rel == 0 and phase == "B":
                        if c == "c" and cx == "c" and vx == v:
                            return ("D", inp, v)
                        if c == "n" and cx == "c":
                            return ("Aw", inp, nxt, vx)
                        return ("Aw", inp, nxt, v)
                return ("D", inp, v) if c == "c" else ("Aw", inp, nxt, v)

            return Behavior(op, action=ReadThen(other, after_b))
        raise SpecificationError(f"cons2: bad local state {s!r}")

    return behave


def _cons2_name(s) -> str:
    kind, inp, *rest = s
    return f"in{inp}/{kind}" + "".join(str(x) for x in rest)


def cons2() -> Algorithm:
    domain = _cons2_domain()
    procs = ("p0", "p1")
    regs = [Register(f"R_{p}", domain, EMPTY) for p in procs]
    domains = {r.id: r.domain for r in regs}
    automata = []
    for p, q in (procs, procs[::-1]):
        initial = {v: ("Aw", v, 0, v) for v in "01"}
        automata.append(compile_automaton(p, initial, _cons2_behavior(f"R_{p}", f"R_{q}"), domains, _cons2_name))
    return Algorithm("cons2", "binary-consensus", regs, automata, {"p0": "0", "p1": "1"})


# -- cons3-naive: three-process majority sweep ---------------------------------
#
# 2n-1 = 5 multi-writer registers over {_, 0, 1}.  A process repeatedly
# collects all registers one read at a time.  Its new preference is the
# majority value of the collect (ties keep the old preference).  If every
# register holds that value it decides, otherwise it writes the value into
# the first register that differs and collects again.  A process starts as
# if its first collect had returned all-empty, i.e. by writing its input to
# the first register.  Up to n-1 stale writes cannot overturn a majority of
# 2n-1 registers, which is what keeps decisions stable.

SWEEP_REGISTERS = 5


def _sweep_behavior(regs: Sequence[str]):
    m = len(regs)

    def finish(inp, v, c0, c1, f0, f1):
        # Collect done: adopt the majority and decide or repair the first mismatch.
        counts = {"0": c0, "1": c1}
        w = "1" if c1 > c0 else "0" if c0 > c1 else v
        if counts[w] == m:
            return ("D", inp, w)
        return ("W", inp, w, f0 if w == "0" else f1)

    def behave(s) -> Behavior:
        kind, inp = s[0], s[1]
        op = propose(inp)
        if kind == "D":
            return Behavior(response=s[2])
        if kind == "W":
            _, _, v, i = s
            return Behavior(op, action=WriteThen(regs[i], v, ("C", inp, v, 0, 0, 0, None, None)))
        _, _, v, k, c0, c1, f0, f1 = s

        def after(x: str):
            n0 = c0 + (x == "0")
            n1 = c1 + (x == "1")
            g0 = k if f0 is None and x != "0" else f0
            g1 = k if f1 is None and x != "1" else f1
            if k + 1 == m:
                return finish(inp, v, n0, n1, g0, g1)
            return ("C", inp, v, k + 1, n0, n1, g0, g1)

        return Behavior(op, action=ReadThen(regs[k], after))

    return behave


def _sweep_name(s) -> str:
    kind, inp, *rest = s
    return f"in{inp}/{kind}" + ",".join("-" if x is None else str(x) for x in rest)


def sweep_consensus(name: str, n: int, m: int) -> Algorithm:
    procs = tuple(f"p{i}" for i in range(n))
    regs = [Register(f"M{j}", (EMPTY, "0", "1"), EMPTY) for j in range(m)]
    domains = {r.id: r.domain for r in regs}
    reg_ids = [r.id for r in regs]
    automata = [
        compile_automaton(p, {v: ("W", v, v, 0) for v in "01"}, _sweep_behavior(reg_ids), domains, _sweep_name)
        for p in procs
    ]
    return Algorithm(name, "binary-consensus", regs, automata, {p: "1" if i else "0" for i, p in enumerate(procs)})


def cons3_naive() -> Algorithm:
    return sweep_consensus("cons3-naive", 3, SWEEP_REGISTERS)


# -- counters over single-writer registers ------------------------------------
#
# Register C_p holds the number of increments p has performed.  inc reads C_p
# and writes it back plus one; read reads every register and returns the sum.


def counter_scripts(max_ops: int) -> list[str]:
    """Operation scripts of length 1..max_ops, e.g. ``inc-read``."""
    out: list[str] = []
    level = [()]
    for _ in range(max_ops):
        level = [s + (o,) for s in level for o in ("inc", "read")]
        out.extend("-".join(s) for s in level)
    return out


def _counter_behavior(own: str, regs: Sequence[str], cap: int, max_ops: int):
    def behave(s) -> Behavior:
        kind, script = s[0], s[1]
        ops = script.split("-")
        if kind == "go":
            _, _, pos, resp = s
            if pos == len(ops):
                return Behavior(response=resp)
            if ops[pos] == "inc":
                return Behavior("inc", resp, ReadThen(own, lambda x: ("incw", script, pos, int(x))))
            return Behavior("read", resp, ReadThen(regs[0], lambda x: ("rd", script, pos, 1, int(x))))
        if kind == "incw":
            _, _, pos, x = s
            return Behavior("inc", action=WriteThen(own, str(min(x + 1, max_ops)), ("go", script, pos + 1, ACK)))
        _, _, pos, k, acc = s

        def after(x: str):
            total = acc + int(x)
            if k + 1 == len(regs):
                return ("go", script, pos + 1, str(min(total, cap)))
            return ("rd", script, pos, k + 1, total)

        return Behavior("read", action=ReadThen(regs[k], after))

    return behave


def _counter_name(s) -> str:
    kind, script, *rest = s
    return f"{script}/{kind}" + ",".join("-" if x is None else str(x) for x in rest)


def counter_swsr(max_ops: int = 2, processes: Sequence[str] = ("p1", "p2", "p3")) -> Algorithm:
    cap = max_ops * len(processes)
    regs = [Register(f"C_{p}", tuple(str(i) for i in range(max_ops + 1)), "0") for p in processes]
    domains = {r.id: r.domain for r in regs}
    reg_ids = [r.id for r in regs]
    scripts = counter_scripts(max_ops)
    automata = [
        compile_automaton(
            p,
            {sc: ("go", sc, 0, None) for sc in scripts},
            _counter_behavior(f"C_{p}", reg_ids, cap, max_ops),
            domains,
            _counter_name,
        )
        for p in processes
    ]
    # Default scripts: a reader and two incrementers, cut to max_ops.
    defaults = {
        p: "-".join(sc.split("-")[:max_ops]) for p, sc in zip(processes, ("read-read", "inc-inc", "inc-read"))
    }
    return Algorithm("counter-swsr", f"bounded-counter({cap})", regs, automata, defaults)


def _loop_behavior(own: str, regs: Sequence[str]):
    def behave(s) -> Behavior:
        kind, op = s[0], s[1]
        if kind == "go":
            resp = s[2]
            if op == "inc":
                return Behavior("inc", resp, ReadThen(own, lambda x: ("incw", op, int(x))))
            return Behavior("read", resp, ReadThen(regs[0], lambda x: ("rd", op, 1, int(x))))
        if kind == "incw":
            return Behavior("inc", action=WriteThen(own, str((s[2] + 1) % 2), ("go", op, ACK)))
        _, _, k, acc = s

        def after(x: str):
            if k + 1 == len(regs):
                return ("go", op, str(acc + int(x)))
            return ("rd", op, k + 1, acc + int(x))

        return Behavior("read", action=ReadThen(regs[k], after))

    return behave


def counter_loop(processes: Sequence[str] = ("p1", "p2", "p3")) -> Algorithm:
    """Looping counter for infinite executions: registers keep counts mod 2.

    Each process invokes its operation (its input) forever.  Reads return
    the sum of the parity bits, so only progress properties are claimed.
    """
    regs = [Register(f"C_{p}", ("0", "1"), "0") for p in processes]
    domains = {r.id: r.domain for r in regs}
    reg_ids = [r.id for r in regs]
    automata = [
        compile_automaton(
            p, {op: ("go", op, None) for op in ("inc", "read")}, _loop_behavior(f"C_{p}", reg_ids), domains,
            _counter_name,
        )
        for p in processes
    ]
    defaults = dict(zip(processes, ("read", "inc", "inc")))
    return Algorithm("counter-loop", "bounded-counter(6)", regs, automata, defaults)


def lasso_from_pattern(alg: Algorithm, start, prefix: Sequence[str], pattern: Sequence[str], limit: int = 1000):
    """Run ``prefix`` then repeat ``pattern`` until a configuration recurs at a pattern boundary.

    The recurring configuration becomes the anchor; returns the lasso.
    """
    c, _ = alg.run(start, prefix)
    seen = {c: 0}
    boundaries = [c]
    for k in range(1, limit + 1):
        c, _ = alg.run(c, pattern)
        if c in seen:
            j = seen[c]
            full_prefix = list(prefix) + list(pattern) * j
            lasso = alg.close_lasso(c, list(pattern) * (k - j), start=start, prefix=full_prefix)
            if lasso is None:
                raise SpecificationError("pattern does not close into a lasso")
            return lasso
        seen[c] = k
        boundaries.append(c)
    raise SpecificationError(f"no recurrence within {limit} repetitions of the pattern")


CRASHED_READER_PREFIX = ("p1", "p1")
CRASHED_READER_PATTERN = ("p2", "p3", "p2", "p3")


def crashed_reader_scenario():
    """Reader p1 takes two steps and stops; p2 and p3 increment in alternation forever.

    Returns ``(algorithm, lasso, expected)`` where ``expected`` lists the
    classification every instance must receive.
    """
    alg = counter_loop()
    start = alg.initial_configuration({"p1": "read", "p2": "inc", "p3": "inc"})
    lasso = lasso_from_pattern(alg, start, CRASHED_READER_PREFIX, CRASHED_READER_PATTERN)
    expected = {
        "inc": {
            "completes": True,
            "contended": True,
            "eventually_conflict_scf": True,
        },
        "read": {
            "completes": False,
            "eventually_scf": False,
            "eventually_conflict_scf": False,
            "reader_correct": False,
        },
    }
    return alg, lasso, expected


# -- toys for the conflict-relation extremes -------------------------------------


def _retry_behavior(i: int, flags: Sequence[str], respond: dict[str, str]):
    own, nxt = flags[i], flags[(i + 1) % len(flags)]

    def behave(s) -> Behavior:
        kind, op = s[0], s[1]
        if kind == "go":
            return Behavior(op, s[2], WriteThen(own, "1", ("look", op)))
        if kind == "look":
            return Behavior(op, action=ReadThen(nxt, lambda x: ("clear", op, x == "0")))
        _, _, won = s
        if won:
            return Behavior(op, action=WriteThen(own, "0", ("go", op, respond[op])))
        return Behavior(op, action=WriteThen(own, "0", ("go", op, None)))

    return behave


def _toy_name(s) -> str:
    return "/".join("-" if x is None else str(x) for x in s)


def retry_toy(object_name: str, operations: Sequence[str], respond: dict[str, str], n: int = 3) -> Algorithm:
    """Processes raise a flag, complete if the next flag is down, else lower theirs and retry.

    Every process invokes its operation (its input) forever.  Contention can
    make everyone retry indefinitely, so the toy is not wait-free.
    """
    procs = [f"p{i}" for i in range(n)]
    regs = [Register(f"F{i}", ("0", "1"), "0") for i in range(n)]
    domains = {r.id: r.domain for r in regs}
    flags = [r.id for r in regs]
    automata = [
        compile_automaton(
            p, {op: ("go", op, None) for op in operations}, _retry_behavior(i, flags, respond), domains, _toy_name
        )
        for i, p in enumerate(procs)
    ]
    defaults = {p: operations[i % len(operations)] for i, p in enumerate(procs)}
    return Algorithm(f"retry-toy[{object_name}]", object_name, regs, automata, defaults)


def _flip_behavior(i: int, regs: Sequence[str], respond: dict[str, str]):
    own, nxt = regs[i], regs[(i + 1) % len(regs)]

    def behave(s) -> Behavior:
        kind, op = s[0], s[1]
        if kind == "go":
            return Behavior(op, s[2], ReadThen(nxt, lambda x: ("put", op, x)))
        return Behavior(op, action=WriteThen(own, s[2], ("go", op, respond[op])))

    return behave


def copy_toy(object_name: str, operations: Sequence[str], respond: dict[str, str], n: int = 3) -> Algorithm:
    """Each operation copies the next process's register into its own: two steps, wait-free."""
    procs = [f"p{i}" for i in range(n)]
    regs = [Register(f"V{i}", ("0", "1"), "1" if i == 0 else "0") for i in range(n)]
    domains = {r.id: r.domain for r in regs}
    ids = [r.id for r in regs]
    automata = [
        compile_automaton(
            p, {op: ("go", op, None) for op in operations}, _flip_behavior(i, ids, respond), domains, _toy_name
        )
        for i, p in enumerate(procs)
    ]
    defaults = {p: operations[i % len(operations)] for i, p in enumerate(procs)}
    return Algorithm(f"copy-toy[{object_name}]", object_name, regs, automata, defaults)


def total_conflict_toy(n: int = 3) -> Algorithm:
    return retry_toy("total-conflict-register", ("swap(0)", "swap(1)"), {"swap(0)": "0", "swap(1)": "1"}, n)


def commuting_retry_toy(n: int = 3) -> Algorithm:
    return retry_toy("commuting-only", ("ping", "pong"), {"ping": ACK, "pong": ACK}, n)


def commuting_copy_toy(n: int = 3) -> Algorithm:
    return copy_toy("commuting-only", ("ping", "pong"), {"ping": ACK, "pong": ACK}, n)


# -- manifests and the shipped catalog ------------------------------------------


@dataclass(frozen=True)
class AlgorithmManifest:
    name: str
    object: str
    processes: int
    claims: dict[str, bool] = field(hash=False)
    input_domains: dict[str, list[str]] = field(hash=False)
    description: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "object": self.object,
            "processes": self.processes,
            "claims": dict(self.claims),
            "input_domains": {k: list(v) for k, v in self.input_domains.items()},
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AlgorithmManifest:
        return cls(
            name=data["name"],
            object=data["object"],
            processes=int(data["processes"]),
            claims={k: bool(v) for k, v in data["claims"].items()},
            input_domains={k: list(v) for k, v in data["input_domains"].items()},
            description=data.get("description", ""),
        )


_CLAIMS = {
    "cons2": (
        {"linearizable": True, "wf": False, "of": True, "cof": True},
        "Two-process consensus by commit/adopt rounds numbered mod 3.",
    ),
    "counter-swsr": (
        {"linearizable": True, "wf": True, "of": True, "cof": True},
        "Counter from single-writer registers, at most 2 operations per process.",
    ),
    "cons3-naive": (
        {"linearizable": True, "wf": False, "of": True, "cof": False},
        "Three-process majority-sweep consensus over 5 multi-writer registers.",
    ),
    "counter-loop": (
        {"wf": True, "of": True, "cof": True},
        "Looping counter (parity registers) used for the crashed-reader scenario.",
    ),
}

_GENERATORS = {
    "cons2": cons2,
    "counter-swsr": counter_swsr,
    "cons3-naive": cons3_naive,
    "counter-loop": counter_loop,
}

CATALOG_NAMES = tuple(_GENERATORS)


def manifest_for(alg: Algorithm) -> AlgorithmManifest:
    claims, description = _CLAIMS[alg.name]
    return AlgorithmManifest(
        name=alg.name,
        object=alg.object_name,
        processes=len(alg.process_ids),
        claims=dict(claims),
        input_domains={p: list(v) for p, v in alg.input_domains.items()},
        description=description,
    )


def generate(name: str) -> Algorithm:
    try:
        return _GENERATORS[name]()
    except KeyError:
        raise SpecificationError(f"unknown reference algorithm {name!r}") from None


def data_dir() -> Path:
    return Path(str(resources.files("cofcheck") / "data"))


def load_reference(name: str) -> tuple[AlgorithmManifest, Algorithm]:
    """Load a shipped algorithm and its manifest from the package data."""
    base = data_dir()
    path = base / f"{name}.json"
    if not path.exists():
        raise SpecificationError(f"unknown reference algorithm {name!r}")
    manifest = AlgorithmManifest.from_dict(json.loads((base / f"{name}.manifest.json").read_text(encoding="utf-8")))
    return manifest, load_algorithm(path)


def reference_catalog() -> list[tuple[AlgorithmManifest, Algorithm]]:
    return [load_reference(n) for n in CATALOG_NAMES]


def crashed_reader_schedule_text() -> str:
    _, lasso, _ = crashed_reader_scenario()
    lines = ["# reader p1 stops after two steps; p2 and p3 increment in alternation"]
    lines.extend(lasso.prefix)
    lines.append("CYCLE:")
    lines.extend(lasso.cycle)
    return "\n".join(lines) + "\n"


def write_reference_data(target: str | Path | None = None, names: Iterable[str] = CATALOG_NAMES) -> list[Path]:
    """Regenerate the shipped JSON files; returns the paths written."""
    base = Path(target) if target is not None else data_dir()
    base.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        alg = generate(name)
        path = base / f"{name}.json"
        dump_algorithm(alg, path)
        mpath = base / f"{name}.manifest.json"
        mpath.write_text(json.dumps(manifest_for(alg).to_dict(), indent=2) + "\n", encoding="utf-8")
        written += [path, mpath]
    spath = base / "crashed-reader.schedule"
    spath.write_text(crashed_reader_schedule_text(), encoding="utf-8")
    written.append(spath)
    return written
