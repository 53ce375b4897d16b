from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sattrace.cnf import Assignment, ClauseStatus, Formula, evaluate_clause, generate_instance
from sattrace.teacher import InjectionConfig, Mode, synthesize_trace
from sattrace.trace import (
    Backtrack,
    Conflict,
    Decide,
    Final,
    ReplayError,
    Trace,
    TraceParseError,
    Verify,
    parse_trace,
    proxy_token_count,
    replay,
    serialize_trace,
)

FIXTURES = Path(__file__).parent / "fixtures"
S, F, U = ClauseStatus.SATISFIED, ClauseStatus.FALSIFIED, ClauseStatus.UNDETERMINED


def engine_traces(count=40, mode=Mode.WITNESS, **inj):
    for seed in range(count):
        n = 5 + seed % 6
        f = generate_instance(n, 3 * n, 3, seed)
        cfg = InjectionConfig(seed=seed, mode=mode, **inj)
        yield synthesize_trace(f, cfg, instance_id=f"t{seed}").trace


def test_conflict_line_is_exact(small_formula):
    t = synthesize_trace(small_formula, InjectionConfig(forced_sites=(3,))).trace
    lines = serialize_trace(t).split("\n")
    assert "   [CONFLICT] Constraint violation detected." in lines
    assert lines.count("   Reverting assignment x3 = False.") == 1


def test_decide_rendering():
    f = Formula.from_ints(3, [[-3, 1], [3]])
    t = Trace("d", f, (Decide(3, False, 1), Verify(((1, S), (2, F)))))
    text = serialize_trace(t)
    block = text.split("\n\n")[1].split("\n")
    assert block == [
        "2. Propose Assignment:",
        "   Based on Constraint 1 (¬x3 ∨ x1),",
        "   assign x3 = False.",
        "   -> Current State: {x3: False}",
    ]


def test_conflict_block_layout(small_formula):
    t = Trace("x", small_formula, (
        Decide(3, False, 1), Verify(((1, S), (2, F))), Conflict(2), Backtrack(((3, False),)),
        Decide(3, True), Verify(((1, U), (2, S))), Decide(1, True, 1), Verify(((1, S), (2, S))),
        Decide(2, False), Verify(((1, S), (2, S))), Final(Assignment(3, {1: True, 2: False, 3: True})),
    ))
    text = serialize_trace(t)
    assert (
        "3. Check Assignment:\n"
        "   Verifying against constraints...\n"
        "   - Constraint 1 satisfied.\n"
        "   - Constraint 2 violated.\n"
        "\n"
        "   [CONFLICT] Constraint violation detected.\n"
        "   Backtracking...\n"
        "\n"
        "   Reverting assignment x3 = False.\n"
        "\n"
        "4. New Proposal:\n"
        "   Assign x3 = True.\n"
        "   -> Current State: {x3: True}\n"
    ) in text
    assert text.startswith("1. Initial State:\n   All variables unassigned.\n   Assignment set = {}.\n\n")
    assert text.endswith("10. Final Assignment:\n   {x1: True, x2: False, x3: True}\n")
    assert parse_trace(text, small_formula, instance_id="x") == t


@pytest.mark.parametrize("mode", [Mode.WITNESS, Mode.SEARCH])
def test_round_trip_engine_traces(mode):
    for t in engine_traces(mode=mode, max_injections=2):
        assert parse_trace(serialize_trace(t), t.formula, instance_id=t.instance_id) == t


def test_lenient_parse_agrees_with_strict_on_canonical_text():
    for t in engine_traces(20, max_injections=2):
        lenient = parse_trace(serialize_trace(t), t.formula, strict=False, instance_id=t.instance_id)
        assert lenient.events == t.events


def test_parse_excerpt_leniently(small_formula):
    text = (FIXTURES / "excerpt_trace.txt").read_text()
    t = parse_trace(text, small_formula, strict=False)
    assert t.events == (
        Decide(3, False, 1),
        Verify(((1, S), (2, F))),
        Conflict(2),
        Backtrack(((3, False),)),
        Decide(3, True, None),
    )
    assert (23, "...") in t.opaque


def test_excerpt_is_not_strict(small_formula):
    text = (FIXTURES / "excerpt_trace.txt").read_text()
    with pytest.raises(TraceParseError) as err:
        parse_trace(text, small_formula)
    assert err.value.line == 23


def test_no_conflict_token_means_no_conflict_events():
    for t in engine_traces(10, injection_probability=0.0, max_injections=0):
        text = serialize_trace(t)
        assert "[CONFLICT]" not in text
        assert parse_trace(text, t.formula).count(Conflict) == 0


def test_lenient_free_prose():
    # expected events fixed by hand before running the parser
    f = Formula.from_ints(2, [[1, 2], [-1, 2]])
    t = parse_trace((FIXTURES / "free_prose.txt").read_text(), f, strict=False)
    assert t.events == (Decide(1, True, None),)
    assert [line for line, _ in t.opaque] == [1, 2, 5]
    assert t.event_lines == (4,)


def test_lenient_final_on_one_line(small_formula):
    t = parse_trace("Final Assignment: {x1: True, x3: True}", small_formula, strict=False)
    assert t.final_assignment == Assignment(3, {1: True, 3: True})


@pytest.mark.parametrize("mutate, line", [
    (lambda s: s.replace("assign x", "assign  x", 1), 7),
    (lambda s: s.replace("2. Propose", "3. Propose", 1), 5),
    (lambda s: s.replace("   Verifying against constraints...\n", "", 1), 11),
    (lambda s: s + "\nextra words\n", None),
    (lambda s: s.replace("- Constraint 1 ", "- Constraint 99 ", 1), 12),
])
def test_strict_grammar_violations(small_formula, mutate, line):
    t = synthesize_trace(small_formula, InjectionConfig(forced_sites=(3,))).trace
    with pytest.raises(TraceParseError) as err:
        parse_trace(mutate(serialize_trace(t)), small_formula)
    if line is not None:
        assert err.value.line == line


def test_strict_rejects_stated_state_mismatch(small_formula):
    t = synthesize_trace(small_formula, InjectionConfig(injection_probability=0.0)).trace
    text = serialize_trace(t).replace("-> Current State: {x1: True}", "-> Current State: {x1: False}", 1)
    with pytest.raises(TraceParseError, match="stated state"):
        parse_trace(text, small_formula)


def test_strict_rejects_inconsistent_replay(small_formula):
    t = synthesize_trace(small_formula, InjectionConfig(forced_sites=(3,))).trace
    text = serialize_trace(t).replace("Reverting assignment x3 = False.", "Reverting assignment x2 = True.")
    with pytest.raises(TraceParseError, match="inconsistent replay") as err:
        parse_trace(text, small_formula)
    assert err.value.line is not None


def test_replay_examples(small_formula):
    assert replay(Trace("r", small_formula, (Decide(1, True),))) == [Assignment(3, {1: True})]
    t = Trace("r", small_formula, (Decide(3, False), Verify(((1, S), (2, F))), Conflict(2),
                                   Backtrack(((3, False),)), Decide(3, True)))
    assert replay(t)[-1] == Assignment(3, {3: True})
    with pytest.raises(ReplayError) as err:
        replay(Trace("r", small_formula, (Decide(1, True), Backtrack(((2, False),)))))
    assert err.value.event_index == 1


def test_replay_rejects_double_assignment(small_formula):
    with pytest.raises(ReplayError):
        replay(Trace("r", small_formula, (Decide(1, True), Decide(1, False))))


def test_trace_invariants_on_engine_output():
    for t in engine_traces(30, max_injections=2):
        snaps = t.validate()
        assert sum(isinstance(ev, Final) for ev in t.events) == 1
        assert isinstance(t.events[-1], Final)
        assert t.final_assignment == snaps[-1] and snaps[-1].is_total
        for i, ev in enumerate(t.events):
            if isinstance(ev, Conflict):
                assert evaluate_clause(t.formula.clause(ev.violated_clause), snaps[i]) is F


def test_validate_requires_single_final(small_formula):
    a = Assignment(3, {1: True, 2: True, 3: True})
    with pytest.raises(ReplayError):
        Trace("v", small_formula, (Decide(1, True),)).validate()
    with pytest.raises(ReplayError):
        Trace("v", small_formula, (Final(a), Final(a))).validate()


def test_proxy_token_count():
    assert proxy_token_count("") == 0
    assert proxy_token_count("assign x3 = False.") == 4
    assert proxy_token_count("  a\tb\n\nc  ") == 3


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 9), st.floats(0, 1), st.integers(1, 4))
def test_round_trip_property(seed, n, prob, window):
    f = generate_instance(n, 3 * n, 3, seed)
    cfg = InjectionConfig(injection_probability=prob, max_injections=2, rollback_window=window, seed=seed)
    t = synthesize_trace(f, cfg).trace
    assert parse_trace(serialize_trace(t), f) == t
