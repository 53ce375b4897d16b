import pytest
from hypothesis import given, settings

from sattrace.cnf import Assignment, ClauseStatus, Formula, brute_force_sat, generate_instance
from sattrace.teacher import InjectionConfig, synthesize_trace
from sattrace.trace import Backtrack, Conflict, Decide, Final, Trace, Verify, serialize_trace
from sattrace.verify import (
    IncompleteAssignmentError,
    Verdict,
    audit_trace,
    filter_golden,
    judge,
    verify_final,
)

from conftest import formulas, oracle_models, oracle_satisfies

S, F, U = ClauseStatus.SATISFIED, ClauseStatus.FALSIFIED, ClauseStatus.UNDETERMINED


def test_verify_final_examples(small_formula):
    a = Assignment(3, {1: True, 2: False, 3: True})
    assert oracle_satisfies(small_formula.to_ints(), a.as_dict())
    assert verify_final(small_formula, a) is True
    contra = Formula.from_ints(1, [[1], [-1]])
    assert not verify_final(contra, Assignment(1, {1: True}))
    assert not verify_final(contra, Assignment(1, {1: False}))
    assert not verify_final(Formula.from_ints(1, [[1]]), Assignment(1, {1: False}))


def test_verify_final_rejects_partial(small_formula):
    with pytest.raises(IncompleteAssignmentError):
        verify_final(small_formula, Assignment(3, {1: True, 3: True}))
    assert judge(small_formula, Assignment(3, {1: True})) is Verdict.INCOMPLETE
    assert judge(small_formula, None) is Verdict.INCOMPLETE


@settings(max_examples=200)
@given(formulas(max_vars=5, max_clauses=8))
def test_verify_final_matches_unit_conjunction(f):
    # F with a* conjoined as unit clauses is satisfiable iff a* satisfies F
    models = set(oracle_models(f.to_ints(), f.num_vars))
    for bits in oracle_models([], f.num_vars):
        a = Assignment.from_bits(bits)
        units = Formula(f.num_vars, f.clauses + tuple(
            Formula.from_ints(f.num_vars, [[l] for l in a.literals()]).clauses))
        assert verify_final(f, a) == (brute_force_sat(units) is not None) == (bits in models)


def _engine_trace(seed=0, **inj):
    f = generate_instance(8, 24, 3, seed)
    return synthesize_trace(f, InjectionConfig(seed=seed, **inj), instance_id=f"e{seed}").trace


def test_audit_engine_traces_clean():
    for seed in range(30):
        report = audit_trace(_engine_trace(seed, max_injections=2))
        assert report.final_ok and report.step_inconsistencies == ()
        assert report.clean


def test_audit_flags_misreported_status(small_formula):
    # claims C1 satisfied while (¬x3 ∨ x1) is falsified by x1=False, x3=True
    t = Trace("bad", small_formula, (
        Decide(1, False), Verify(((1, U), (2, U))),
        Decide(3, True), Verify(((1, S), (2, S))),
        Decide(2, False), Verify(((1, F), (2, S))),
        Final(Assignment(3, {1: False, 2: False, 3: True})),
    ))
    report = audit_trace(t)
    assert report.step_inconsistencies == ((3, "Constraint 1 reported satisfied, actually violated"),)
    assert not report.final_ok and report.verdict is Verdict.UNSATISFYING


def test_audit_correct_steps_bad_final():
    f = Formula.from_ints(2, [[1, 2]])
    t = Trace("b", f, (Decide(1, False), Verify(((1, U),)), Decide(2, False), Verify(((1, F),)),
                       Final(Assignment(2, {1: False, 2: False}))))
    report = audit_trace(t)
    assert not report.final_ok and report.step_inconsistencies == ()


def test_audit_flags_hallucinated_conflict(small_formula):
    t = Trace("h", small_formula, (
        Decide(1, True), Verify(((1, S), (2, F))), Conflict(2), Backtrack(((1, True),)),
        Decide(1, True), Verify(((1, S), (2, U))),
        Decide(2, False), Verify(((1, S), (2, U))),
        Decide(3, True), Verify(((1, S), (2, S))),
        Final(Assignment(3, {1: True, 2: False, 3: True})),
    ))
    report = audit_trace(t)
    indices = [i for i, _ in report.step_inconsistencies]
    assert 1 in indices and 2 in indices
    assert report.final_ok


def test_audit_survives_impossible_moves(small_formula):
    t = Trace("i", small_formula, (Backtrack(((2, True),)), Decide(1, True), Decide(1, False)))
    report = audit_trace(t)
    assert len(report.step_inconsistencies) == 2
    assert report.verdict is Verdict.INCOMPLETE


def test_filter_golden_examples(small_formula):
    assert filter_golden([]).pass_rate is None and filter_golden([]).empty
    good = [(t.formula, t) for t in (_engine_trace(s) for s in range(4))]
    f = Formula.from_ints(1, [[1]])
    bad = Trace("bad", f, (Decide(1, False), Verify(((1, F),)), Final(Assignment(1, {1: False}))))
    split = filter_golden(good + [(f, bad)])
    assert split.pass_rate == pytest.approx(0.8, abs=0)
    assert len(split.golden) == 4 and split.rejected == [(f, bad, Verdict.UNSATISFYING)]
    assert split.pass_rate * split.total == len(split.golden)


def test_filter_golden_text_items(small_formula):
    t = synthesize_trace(small_formula, InjectionConfig(forced_sites=(3,)))
    text = serialize_trace(t.trace)
    split = filter_golden([(small_formula, text), (small_formula, "not a trace")])
    assert len(split.golden) == 1
    assert split.rejected[0][2] is Verdict.UNPARSEABLE
    partial = text.replace("{x1: True, x2: False, x3: True}\n", "{x1: True, x3: True}\n")
    assert filter_golden([(small_formula, partial)]).rejected[0][2] is Verdict.UNPARSEABLE


def test_filter_partition_reports_incomplete(small_formula):
    t = Trace("p", small_formula, (Decide(1, True),))
    split = filter_golden([(small_formula, t)])
    assert split.rejected[0][2] is Verdict.INCOMPLETE and split.pass_rate == 0.0
