"""Acceptance suite: one timed test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import random
from contextlib import contextmanager
from time import perf_counter

from cofcheck.algorithms import (
    commuting_copy_toy,
    commuting_retry_toy,
    cons2,
    counter_swsr,
    crashed_reader_scenario,
    reference_catalog,
    total_conflict_toy,
)
from cofcheck.graph import all_input_vectors, build_graph
from cofcheck.linearizability import collect_history, is_linearizable
from cofcheck.objects import (
    BOTTOM,
    ConflictRelation,
    binary_consensus,
    bounded_counter,
    builtin_objects,
    conflict_relation,
    resolve_object,
)
from cofcheck.progress import (
    Condition,
    check_lasso,
    correct_in,
    eventually_conflict_scf,
    eventually_scf,
    find_violation,
    instance_status,
    instances,
)
from cofcheck.valency import (
    IMPOSSIBILITY_INPUTS,
    ValencyTag,
    build_valency_graph,
    check_safety,
    construct_refutation,
    find_bivalent,
    refutation_path,
)
from toys import naive_linearizable, random_history, random_lassos


@contextmanager
def criterion(capsys, number: int, title: str, limit: float):
    """Time the body, fail it past ``limit`` seconds and print one result line."""
    start = perf_counter()
    outcome, detail = "FAIL", ""
    try:
        yield
        elapsed = perf_counter() - start
        assert elapsed < limit, f"took {elapsed:.2f} s, limit {limit} s"
        outcome = "PASS"
    except Exception as exc:
        detail = f": {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    finally:
        elapsed = perf_counter() - start
        with capsys.disabled():
            print(f"\n[{outcome}] criterion {number}: {title} ({elapsed:.2f} s, limit {limit:g} s){detail}")


def relation(alg) -> ConflictRelation:
    return conflict_relation(resolve_object(alg.object_name))


def test_criterion_1_consensus_conflicts(capsys):
    with criterion(capsys, 1, "consensus conflict relation", 1.0):
        cr = conflict_relation(binary_consensus())
        assert cr.sorted_pairs() == [("propose(0)", "propose(1)")]
        assert cr.witnesses[frozenset({"propose(0)", "propose(1)"})] == BOTTOM


def test_criterion_2_counter_conflicts(capsys):
    with criterion(capsys, 2, "bounded counter conflict relation, caps 1-3", 1.0):
        for cap in (1, 2, 3):
            cr = conflict_relation(bounded_counter(cap))
            assert cr.sorted_pairs() == [("inc", "read")], cap


def test_criterion_3_conflict_relation_extremes(capsys):
    with criterion(capsys, 3, "total and empty conflict relations over generated lassos", 30.0):
        # (a) total conflict: conflict-step-contention freedom is step-contention freedom.
        alg = total_conflict_toy()
        cr = relation(alg)
        assert cr == ConflictRelation.total(resolve_object(alg.object_name).operations)
        lassos = discrepancies = compared = 0
        for lasso in random_lassos(alg, all_input_vectors(alg), random.Random(2024), 1000):
            lassos += 1
            for inst in instances(lasso):
                compared += 1
                discrepancies += eventually_conflict_scf(lasso, inst, cr) != eventually_scf(lasso, inst)
        assert lassos >= 1000 and compared > lassos
        assert discrepancies == 0
        # (b) empty relation: always conflict free, so COF and WF coincide.
        for factory in (commuting_retry_toy, commuting_copy_toy):
            alg = factory()
            cr = relation(alg)
            assert len(cr) == 0
            for lasso in random_lassos(alg, all_input_vectors(alg), random.Random(7), 300):
                assert all(eventually_conflict_scf(lasso, inst, cr) for inst in instances(lasso))
            vectors = all_input_vectors(alg)
            cof = find_violation(alg, vectors, Condition.COF, cr)
            wf = find_violation(alg, vectors, Condition.WF, cr)
            assert cof.holds == wf.holds, factory.__name__
            if not wf.holds:
                assert check_lasso(wf.witness, Condition.COF, cr)


def test_criterion_4_two_process_consensus(capsys):
    with criterion(capsys, 4, "cons2 safety, linearizability and COF on all inputs", 30.0):
        alg = cons2()
        obj = binary_consensus()
        cr = relation(alg)
        for iv in all_input_vectors(alg):
            g = build_graph(alg, iv)
            assert g.n < 10**6
            report = check_safety(g, samples=200)
            assert report.ok, report.violations
            # Histories of the BFS path to every reachable configuration.
            root = g.configuration(g.roots[0])
            for i in range(g.n):
                _, schedule = g.path_to(i)
                assert is_linearizable(collect_history(alg.run(root, schedule)[1]), obj), schedule
            assert find_violation(alg, iv, Condition.COF, cr, graph=g).holds, iv


def test_criterion_5_impossibility_chain(capsys):
    with criterion(capsys, 5, "cons3-naive refutation on inputs (0,1,1)", 120.0):
        _, alg = next((m, a) for m, a in reference_catalog() if m.name == "cons3-naive")
        vg = build_valency_graph(alg)
        assert vg.inputs == dict(zip(alg.process_ids, IMPOSSIBILITY_INPUTS))
        ref = construct_refutation(alg, vg=vg)
        assert ref.safety.ok, ref.safety.violations
        assert ref.premise.solo_p0_decides == "0"
        assert ref.bridge.holds and not ref.bridge.zero_reachable
        assert ref.root_tag is ValencyTag.ONE
        assert find_bivalent(vg) is not None and ref.bivalent_path is not None
        assert ref.extensions.holds and ref.extensions.bivalent > 0
        assert ref.verified, ref.failure
        lasso = ref.lasso
        assert lasso.is_closed() and set(lasso.cycle) <= {"p1", "p2"}
        for i in refutation_path(vg, ref)[len(lasso.prefix) :]:
            assert not vg.is_deciding(i, "0") and not vg.is_deciding(i, "1")
        cr = relation(alg)
        assert {i.process for i in ref.pending} == {"p1", "p2"}
        for inst in ref.pending:
            assert eventually_conflict_scf(lasso, inst, cr)
            assert not instance_status(lasso, inst, cr).completed
        assert ref.cross_check["cof_holds"] is False and ref.cross_check["agrees"]
        assert set(check_lasso(lasso, Condition.COF, cr)) == set(ref.pending)


def test_criterion_6_crashed_reader_replay(capsys):
    with criterion(capsys, 6, "crashed-reader counter scenario", 1.0):
        alg, lasso, expected = crashed_reader_scenario()
        cr = relation(alg)
        assert lasso.is_closed()
        incs, reads = set(), 0
        for inst in instances(lasso):
            status = instance_status(lasso, inst, cr)
            assert status.completed == expected[inst.operation]["completes"]
            if inst.operation == "inc":
                incs.add(inst.process)
                assert status.completed and status.contended
                assert eventually_conflict_scf(lasso, inst, cr)
            else:
                reads += 1
                assert not status.completed
                assert not eventually_scf(lasso, inst)
                assert not eventually_conflict_scf(lasso, inst, cr)
                assert not correct_in(lasso, inst.process)
        assert incs == {"p2", "p3"} and reads == 1


def test_criterion_7_linearizability_oracle(capsys):
    with criterion(capsys, 7, "linearizability checker vs permutation oracle", 60.0):
        objects = list(builtin_objects().values())
        rng = random.Random(77)
        disagreements, verdicts = [], {True: 0, False: 0}
        for k in range(1200):
            obj = objects[k % len(objects)]
            h = random_history(rng, obj, max_ops=6)
            assert len(h.operations()) <= 6
            fast, slow = bool(is_linearizable(h, obj)), naive_linearizable(h, obj)
            verdicts[slow] += 1
            if fast != slow:
                disagreements.append((obj.name, h.to_text()))
        assert disagreements == []
        assert verdicts[True] > 0 and verdicts[False] > 0


def _linearizable_claim(alg, inputs_list) -> bool:
    """Histories from seeded random maximal runs on every input vector."""
    obj = resolve_object(alg.object_name)
    rng = random.Random(11)
    for iv in inputs_list:
        start = alg.initial_configuration(iv)
        for _ in range(100):
            c, schedule = start, []
            for _ in range(300):
                live = [p for p in alg.process_ids if not alg.is_halted(c, p)]
                if not live:
                    break
                schedule.append(rng.choice(live))
                c = alg.apply_step(c, schedule[-1])
            if not is_linearizable(collect_history(alg.run(start, schedule)[1]), obj):
                return False
    return True


def test_criterion_8_implication_chain(capsys):
    with criterion(capsys, 8, "WF => COF => OF on the catalog, manifest claims discharged", 120.0):
        verdicts = {}
        for manifest, alg in reference_catalog():
            cr = relation(alg)
            if manifest.name == "cons3-naive":
                # All eight vectors together exceed the default budget; the
                # mixed vector (0,1,1) is the one the refutation runs on.
                inputs = [IMPOSSIBILITY_INPUTS]
                g = build_graph(alg, IMPOSSIBILITY_INPUTS)
            else:
                inputs = all_input_vectors(alg)
                g = build_graph(alg, inputs)
            got = {c.value: find_violation(alg, inputs, c, cr, graph=g).holds for c in Condition}
            del g
            assert not got["wf"] or got["cof"], manifest.name
            assert not got["cof"] or got["of"], manifest.name
            if "linearizable" in manifest.claims:
                got["linearizable"] = _linearizable_claim(alg, inputs)
            for claim, value in manifest.claims.items():
                assert claim in got, f"{manifest.name}: no check for claim {claim}"
                assert got[claim] == value, f"{manifest.name}: {claim} claimed {value}, checked {got[claim]}"
            verdicts[manifest.name] = got
        assert verdicts["counter-swsr"]["wf"]
        assert verdicts["cons2"]["cof"] and verdicts["cons2"]["of"] and not verdicts["cons2"]["wf"]
        assert verdicts["cons3-naive"]["of"] and not verdicts["cons3-naive"]["cof"]
