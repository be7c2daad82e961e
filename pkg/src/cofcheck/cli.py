"""Command-line front end: ``cofcheck {conflicts,check,refute,replay,catalog}``."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Any

from . import __version__
from .algorithms import CATALOG_NAMES, data_dir, load_reference
from .errors import BudgetExceeded, CofcheckError
from .execution import Algorithm, format_trace, load_algorithm, parse_schedule
from .graph import all_input_vectors, default_budget
from .linearizability import collect_history, is_linearizable
from .objects import SequentialObject, conflict_relation, load_object, resolve_object
from .progress import (
    Condition,
    correct_in,
    eventually_conflict_scf,
    eventually_scf,
    find_violation,
    instance_status,
    instances,
)

EXIT_OK, EXIT_VIOLATED, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2, 3


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Inputs:
    """Resolved input files and their digests, embedded in every report."""

    def __init__(self) -> None:
        self.files: dict[str, dict[str, str]] = {}

    def note(self, role: str, path: Path, label: str | None = None) -> None:
        self.files[role] = {"path": label or str(path), "sha256": _digest(path)}

    def load_algorithm(self, spec: str) -> Algorithm:
        path = Path(spec)
        if path.is_file():
            self.note("algorithm", path)
            return load_algorithm(path)
        if spec in CATALOG_NAMES:
            _, alg = load_reference(spec)
            self.note("algorithm", data_dir() / f"{spec}.json", f"builtin:{spec}")
            return alg
        raise CofcheckError(f"algorithm file not found and not a catalog name: {spec}")

    def load_object(self, spec: str | None, alg: Algorithm | None = None) -> SequentialObject:
        if spec is None:
            if alg is None or not alg.object_name:
                raise CofcheckError("no --object given and the algorithm names none")
            spec = alg.object_name
        path = Path(spec)
        if path.is_file():
            self.note("object", path)
            return load_object(path)
        obj = resolve_object(spec)
        self.files["object"] = {"path": f"builtin:{spec}", "sha256": hashlib.sha256(
            json.dumps(obj.to_dict(), sort_keys=True).encode()).hexdigest()}
        return obj


def _header(command: str, inputs: Inputs, **extra: Any) -> dict[str, Any]:
    out = {"tool": "cofcheck", "version": __version__, "command": command, "inputs": inputs.files}
    out.update(extra)
    return out


def _emit(args: argparse.Namespace, report: dict[str, Any], text: str) -> None:
    fmt = args.format
    body = json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n" if fmt in ("json", "json-like") else text
    if args.out:
        Path(args.out).write_text(body, encoding="utf-8")
    else:
        sys.stdout.write(body)


def _parse_inputs(alg: Algorithm, raw: str | None) -> list[dict[str, str]]:
    if raw is None:
        return [alg.normalize_inputs(None)]
    if raw.strip().lower() == "all":
        return all_input_vectors(alg)
    vectors = []
    for chunk in raw.split(";"):
        values = [v.strip() for v in chunk.split(",")]
        vectors.append(alg.normalize_inputs(values))
    return vectors


# -- subcommands ---------------------------------------------------------------


def cmd_conflicts(args: argparse.Namespace) -> int:
    inputs = Inputs()
    obj = inputs.load_object(args.object)
    cr = conflict_relation(obj)
    pairs = []
    lines = []
    # Pairs follow the object's declaration order of operations.
    for a, b in combinations_with_replacement(obj.operations, 2):
        if not cr.conflicts(a, b):
            continue
        q = cr.witnesses[frozenset((a, b))]
        pairs.append({"pair": [a, b], "witness_state": q})
        lines.append(f"{a} ≍ {b} @ state {q}")
    text = f"conflict relation of {obj.name}\n" + ("\n".join(lines) if lines else "no conflicts") + "\n"
    _emit(args, _header("conflicts", inputs, object=obj.name, conflicts=pairs), text)
    return EXIT_OK


def _describe_violation(verdict) -> str:
    w = verdict.witness
    inst = verdict.instance
    return (
        f"  instance {inst.operation} by {inst.process} never completes\n"
        f"  prefix: {' '.join(w.prefix) or '(empty)'}\n"
        f"  cycle:  {' '.join(w.cycle)}\n"
    )


def cmd_check(args: argparse.Namespace) -> int:
    inputs = Inputs()
    alg = inputs.load_algorithm(args.algorithm)
    obj = inputs.load_object(args.object, alg)
    cr = conflict_relation(obj)
    vectors = _parse_inputs(alg, args.inputs)
    condition = Condition.parse(args.condition)
    budget = args.budget if args.budget is not None else default_budget()
    try:
        verdict = find_violation(alg, vectors, condition, cr, budget=budget, parallel=args.parallel)
    except BudgetExceeded as exc:
        report = _header("check", inputs, algorithm=alg.name, condition=condition.value, budget_exceeded=exc.statistics)
        _emit(args, report, f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    report = _header(
        "check",
        inputs,
        algorithm=alg.name,
        input_vectors=vectors,
        budget=budget,
        verdict=verdict.to_dict(),
    )
    name = condition.value.upper()
    stats = verdict.statistics
    summary = f"{stats['states']} states, {stats['edges']} edges, {stats['sccs']} SCCs"
    if verdict.holds:
        text = f"{name} holds for {alg.name} on {len(vectors)} input vector(s) ({summary})\n"
    else:
        text = f"{name} violated by {alg.name} ({summary})\n" + _describe_violation(verdict)
    _emit(args, report, text)
    return EXIT_OK if verdict.holds else EXIT_VIOLATED


def cmd_refute(args: argparse.Namespace) -> int:
    from .valency import build_valency_graph, construct_refutation, export_valency_dot, refutation_nodes, refutation_path

    inputs = Inputs()
    alg = inputs.load_algorithm(args.algorithm)
    budget = args.budget if args.budget is not None else default_budget()
    try:
        vg = build_valency_graph(alg, budget=budget)
        ref = construct_refutation(alg, vg=vg, budget=budget, seed=args.seed)
    except BudgetExceeded as exc:
        _emit(args, _header("refute", inputs, budget_exceeded=exc.statistics), f"budget exceeded: {exc}\n")
        return EXIT_BUDGET
    dot = None
    if args.dot or args.format == "dot":
        dot = export_valency_dot(vg, refutation_nodes(vg, ref), highlight_path=refutation_path(vg, ref))
        if args.dot:
            Path(args.dot).write_text(dot, encoding="utf-8")
    report = _header("refute", inputs, refutation=ref.to_dict())
    lines = [f"refutation analysis of {alg.name} with inputs {','.join(ref.inputs.values())}"]
    s = ref.safety
    lines.append(f"  safety: validity={s.validity} agreement={s.agreement} linearizable={s.linearizable}")
    if ref.premise is not None:
        lines.append(f"  solo run: {ref.premise.message}")
    if ref.root_tag is not None:
        lines.append(f"  initial configuration is {ref.root_tag.value}")
    if ref.bivalent_path is not None:
        lines.append(f"  bivalent configuration reached by: {' '.join(ref.bivalent_path) or '(empty)'}")
    if ref.extensions is not None:
        lines.append(f"  every bivalent configuration ({ref.extensions.bivalent}) has a bivalent {{p1,p2}} extension: {ref.extensions.holds}")
    if ref.lasso is not None:
        lines.append(f"  cycle ({len(ref.lasso.cycle)} steps, all bivalent): {' '.join(ref.lasso.cycle)}")
        for inst in ref.pending:
            lines.append(f"  {inst.operation} by {inst.process}: conflict-step-contention free yet never completes")
    if ref.cross_check is not None:
        lines.append(f"  progress checker agrees (COF violated): {ref.cross_check['agrees']}")
    lines.append("verdict: " + ("COF refuted" if ref.verified else f"no refutation ({ref.failure})"))
    text = "\n".join(lines) + "\n"
    if args.format == "dot":
        if args.out:
            Path(args.out).write_text(dot, encoding="utf-8")
        else:
            sys.stdout.write(dot)
    else:
        _emit(args, report, text)
    if ref.verified:
        return EXIT_OK
    if not s.ok or (ref.premise is not None and ref.bivalent_path is None):
        return EXIT_ERROR
    return EXIT_VIOLATED


def cmd_replay(args: argparse.Namespace) -> int:
    inputs = Inputs()
    alg = inputs.load_algorithm(args.algorithm)
    obj = inputs.load_object(args.object, alg)
    sched_path = Path(args.schedule)
    if not sched_path.is_file():
        raise CofcheckError(f"schedule file not found: {sched_path}")
    inputs.note("schedule", sched_path)
    prefix, cycle = parse_schedule(sched_path.read_text(encoding="utf-8"))
    for p in prefix + (cycle or ()):
        if p not in alg.proc_index:
            raise CofcheckError(f"schedule names unknown process {p!r}")
    start = alg.initial_configuration(_parse_inputs(alg, args.inputs)[0])
    _, trace = alg.run(start, prefix + (cycle or ()))
    history = collect_history(trace)
    lin = is_linearizable(history, obj)
    report: dict[str, Any] = _header(
        "replay",
        inputs,
        algorithm=alg.name,
        trace=[e.line() for e in trace],
        history=history.to_text().splitlines(),
        linearizable=lin.linearizable,
        witness=[f"{r.operation} by {r.process}" for r in lin.witness] if lin.witness else None,
    )
    text = format_trace(trace) + "history:\n" + "".join("  " + ln + "\n" for ln in history.to_text().splitlines())
    text += f"linearizable: {lin.linearizable}\n"
    code = EXIT_OK
    if cycle:
        anchor, _ = alg.run(start, prefix)
        lasso = alg.close_lasso(anchor, cycle, start=start, prefix=prefix)
        if lasso is None:
            report["lasso"] = None
            text += "cycle does not return to its anchor: not a lasso\n"
            code = EXIT_ERROR
        else:
            cr = conflict_relation(obj)
            rows = []
            for inst in instances(lasso):
                st = instance_status(lasso, inst, cr)
                rows.append(
                    {
                        "instance": f"{inst.operation} by {inst.process} #{inst.ordinal}",
                        "completes": st.completed,
                        "contended": st.contended,
                        "eventually_step_contention_free": eventually_scf(lasso, inst),
                        "eventually_conflict_step_contention_free": eventually_conflict_scf(lasso, inst, cr),
                        "process_correct": correct_in(lasso, inst.process),
                    }
                )
            report["lasso"] = {"prefix": list(lasso.prefix), "cycle": list(lasso.cycle), "instances": rows}
            text += "lasso instances:\n"
            for r in rows:
                text += (
                    f"  {r['instance']}: completes={r['completes']} contended={r['contended']} "
                    f"eventually-step-contention-free={r['eventually_step_contention_free']} "
                    f"eventually-conflict-step-contention-free={r['eventually_conflict_step_contention_free']} "
                    f"correct={r['process_correct']}\n"
                )
    _emit(args, report, text)
    return code


def cmd_catalog(args: argparse.Namespace) -> int:
    inputs = Inputs()
    entries = []
    lines = []
    for name in CATALOG_NAMES:
        manifest, alg = load_reference(name)
        inputs.note(name, data_dir() / f"{name}.json", f"builtin:{name}")
        entries.append(manifest.to_dict())
        claims = ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in manifest.claims.items())
        lines.append(f"{name}: {manifest.processes} processes, object {manifest.object}; claims {claims}")
        lines.append(f"  {manifest.description}")
    _emit(args, _header("catalog", inputs, algorithms=entries), "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cofcheck", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cofcheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, formats=("text", "json", "json-like")) -> None:
        p.add_argument("--format", choices=formats, default="text")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized sampling")

    p = sub.add_parser("conflicts", help="derive the conflict relation of an object")
    p.add_argument("object_pos", nargs="?", metavar="OBJECT")
    p.add_argument("--object")
    common(p)
    p.set_defaults(func=cmd_conflicts)

    def algo(p: argparse.ArgumentParser) -> None:
        p.add_argument("algorithm_pos", nargs="?", metavar="ALGORITHM")
        p.add_argument("--algorithm", help="algorithm file or catalog name")
        p.add_argument("--object", help="object file or builtin name (default: the algorithm's object)")
        p.add_argument("--inputs", help="comma-separated input vector, ';' between vectors, or 'all'")
        p.add_argument("--budget", type=_positive, help="cap on explored configurations")
        p.add_argument("--parallel", type=_positive, default=1, help="worker threads for the cycle search")

    p = sub.add_parser("check", help="decide WF, OF or COF by exhaustive search")
    algo(p)
    p.add_argument("--condition", choices=("wf", "of", "cof"), default="cof")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("refute", help="run the valency analysis on a 3-process consensus candidate")
    algo(p)
    p.add_argument("--dot", help="also write the valency diagram (DOT) here")
    common(p, ("text", "json", "json-like", "dot"))
    p.set_defaults(func=cmd_refute)

    p = sub.add_parser("replay", help="replay a schedule, extract the history, check linearizability")
    algo(p)
    p.add_argument("--schedule", required=True)
    common(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("catalog", help="list the reference algorithms and their claims")
    common(p)
    p.set_defaults(func=cmd_catalog)
    return parser


def _positive(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    if hasattr(args, "object_pos") and args.object_pos and not args.object:
        args.object = args.object_pos
    if hasattr(args, "algorithm_pos"):
        args.algorithm = args.algorithm or args.algorithm_pos
        if not args.algorithm:
            print("cofcheck: error: an algorithm is required", file=sys.stderr)
            return EXIT_ERROR
    if args.command == "conflicts" and not args.object:
        print("cofcheck: error: an object is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"cofcheck: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (CofcheckError, OSError, json.JSONDecodeError) as exc:
        print(f"cofcheck: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
