from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cofcheck.algorithms import cons2, counter_swsr
from cofcheck.errors import InternalError, SpecificationError
from cofcheck.execution import TraceEntry
from cofcheck.linearizability import History, Invocation, Response, collect_history, is_linearizable
from cofcheck.objects import BOTTOM, binary_consensus, bounded_counter, builtin_objects, resolve_object
from toys import naive_linearizable, random_history

CONSENSUS = binary_consensus()
OBJECTS = list(builtin_objects((1, 2, 3)).values())


def check_witness(h: History, obj, witness) -> None:
    """Independent validation of a witness order."""
    records = {r.index: r for r in h.operations()}
    position = {r.index: k for k, r in enumerate(witness)}
    for r in records.values():
        if not r.pending:
            assert r.index in position
    for a in witness:
        for b in witness:
            ra, rb = records[a.index], records[b.index]
            if not ra.pending and ra.responded_at < rb.invoked_at:
                assert position[a.index] < position[b.index]
    q = obj.initial_state
    for r in witness:
        resp, q = obj.transition[r.operation, q]
        if not records[r.index].pending:
            assert resp == records[r.index].response


def test_sequential_consensus_history():
    h = History((Invocation("p0", "propose(0)"), Response("p0", "0"), Invocation("p1", "propose(1)"), Response("p1", "0")))
    ok, witness = is_linearizable(h, CONSENSUS)
    assert ok
    assert [r.operation for r in witness] == ["propose(0)", "propose(1)"]


@pytest.mark.parametrize(
    "events",
    [
        ("INV p0 propose(0)", "INV p1 propose(1)", "RES p0 0", "RES p1 1"),
        ("INV p0 propose(0)", "RES p0 0", "INV p1 propose(1)", "RES p1 1"),
        ("INV p1 propose(1)", "INV p0 propose(0)", "RES p1 1", "RES p0 0"),
    ],
)
def test_two_decisions_never_linearize(events):
    h = History.from_text("\n".join(events))
    result = is_linearizable(h, CONSENSUS)
    assert not result
    assert result.counterexample is not None
    assert not naive_linearizable(result.counterexample, CONSENSUS)


def test_counterexample_is_shortest_failing_prefix():
    h = History.from_text("INV p0 inc\nRES p0 ack\nINV p1 read\nRES p1 0\nINV p2 read\nRES p2 1\n")
    result = is_linearizable(h, bounded_counter(2))
    assert not result
    assert len(result.counterexample) == 4


def test_faithful_sequential_replay():
    obj = bounded_counter(3)
    events, q = [], obj.initial_state
    for op in ["inc", "read", "inc", "inc", "inc", "read"]:
        resp, q = obj.transition[op, q]
        events += [Invocation("p0", op), Response("p0", resp)]
    result = is_linearizable(History(tuple(events)), obj)
    assert result.witness_operations() == ["inc", "read", "inc", "inc", "inc", "read"]


def test_pending_operation_may_take_effect():
    h = History.from_text("INV p0 propose(1)\nINV p1 propose(0)\nRES p1 1\n")
    ok, witness = is_linearizable(h, CONSENSUS)
    assert ok
    assert witness[0].process == "p0" and witness[0].response == "1"


def test_empty_history():
    assert is_linearizable(History(()), CONSENSUS)


def test_unknown_operation_rejected():
    with pytest.raises(SpecificationError):
        is_linearizable(History.from_text("INV p0 pop\n"), CONSENSUS)


def test_malformed_histories_rejected():
    with pytest.raises(SpecificationError):
        History.from_text("RES p0 0\n")
    with pytest.raises(SpecificationError):
        History.from_text("INV p0 inc\nINV p0 inc\n")
    with pytest.raises(SpecificationError):
        History.from_text("CALL p0 inc\n")


def test_text_round_trip():
    text = "INV p0 propose(0)\nINV p1 propose(1)\nRES p1 0\n"
    assert History.from_text(text).to_text() == text


def test_without_pending():
    h = History.from_text("INV p0 propose(0)\nINV p1 propose(1)\nRES p1 1\n")
    assert h.without_pending("p0").to_text() == "INV p1 propose(1)\nRES p1 1\n"
    assert h.without_pending("p1") == h


def test_collect_history_solo_run():
    alg = cons2()
    _, trace = alg.run(alg.initial_configuration(("0", "1")), ["p0"] * 50)
    assert collect_history(trace).events == (Invocation("p0", "propose(0)"), Response("p0", "0"))


def test_collect_history_keeps_pending():
    alg = cons2()
    _, trace = alg.run(alg.initial_configuration(("0", "1")), ["p1", "p0"] + ["p0"] * 50)
    h = collect_history(trace)
    pending = [r for r in h.operations() if r.pending]
    assert [r.process for r in pending] == ["p1"]
    assert collect_history([]) == History(())


def test_collect_history_rejects_orphan_steps():
    bad = [TraceEntry(1, "p0", "R", "R", "0", "read", 0, False)]
    with pytest.raises(InternalError):
        collect_history(bad)


@pytest.mark.parametrize("factory", [cons2, counter_swsr], ids=lambda f: f.__name__)
def test_reference_runs_are_linearizable(factory):
    alg = factory()
    obj = resolve_object(alg.object_name)
    rng = random.Random(7)
    vectors = [tuple(v) for v in ("00", "01", "10", "11")] if len(alg.process_ids) == 2 else [None]
    for _ in range(150):
        inputs = rng.choice(vectors)
        s = [rng.choice(alg.process_ids) for _ in range(rng.randint(0, 60))]
        _, trace = alg.run(alg.initial_configuration(inputs), s)
        h = collect_history(trace)
        result = is_linearizable(h, obj)
        assert result, h.to_text()
        check_witness(h, obj, result.witness)


def test_agrees_with_naive_oracle_on_random_histories():
    rng = random.Random(2024)
    for _ in range(300):
        obj = rng.choice(OBJECTS)
        h = random_history(rng, obj)
        result = is_linearizable(h, obj)
        assert bool(result) == naive_linearizable(h, obj), h.to_text()
        if result:
            check_witness(h, obj, result.witness)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(OBJECTS))
def test_dropping_pending_invocation(seed, obj):
    h = random_history(random.Random(seed), obj)
    result = is_linearizable(h, obj)
    used = {r.index for r in result.witness or ()}
    for r in h.operations():
        if not r.pending:
            continue
        dropped = is_linearizable(h.without_pending(r.process), obj)
        # A linearization of the smaller history is one of h that omits r.
        if dropped:
            assert result
        # A pending operation the witness leaves out can be dropped.
        if result and r.index not in used:
            assert dropped


def test_pending_operation_can_be_needed():
    # The pending inc is the only explanation for the read of 1.
    h = History.from_text("INV p0 inc\nINV p1 read\nRES p1 1\n")
    assert is_linearizable(h, bounded_counter(1))
    assert not is_linearizable(h.without_pending("p0"), bounded_counter(1))


def test_consensus_state_bottom_is_initial():
    assert CONSENSUS.initial_state == BOTTOM
