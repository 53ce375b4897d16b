import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sattrace
from sattrace.analyze import (
    DetectionResult,
    check_correctness,
    compute_ber,
    conflict_precision,
    detect_backtracking,
)
from sattrace.cnf import Assignment, ClauseStatus, generate_instance
from sattrace.linearize import linearize
from sattrace.pipeline import analyze_responses, load_instances, load_responses
from sattrace.teacher import InjectionConfig, synthesize_trace
from sattrace.trace import Backtrack, Conflict, Decide, Final, Trace, Verify, serialize_trace

FIXTURES = Path(__file__).parent / "fixtures"
BER40 = Path(sattrace.__file__).parent / "data" / "fixtures" / "ber40"
S, F, U = ClauseStatus.SATISFIED, ClauseStatus.FALSIFIED, ClauseStatus.UNDETERMINED


def hit():
    return DetectionResult(True, True, True)


def miss():
    return DetectionResult(False, False, False)


def hallucinated_text(f):
    # claims C2 = (x3) violated while x3 is still unassigned
    t = Trace("h", f, (
        Decide(1, True, 1), Verify(((1, S), (2, F))), Conflict(2), Backtrack(((1, True),)),
        Decide(1, False, None), Verify(((1, U), (2, U))),
        Decide(2, False), Verify(((1, U), (2, U))),
        Decide(3, True), Verify(((1, F), (2, S))),
        Final(Assignment(3, {1: False, 2: False, 3: True})),
    ))
    return serialize_trace(t)


def test_excerpt_is_a_backtracking_event(small_formula):
    r = detect_backtracking((FIXTURES / "excerpt_trace.txt").read_text(), small_formula)
    assert r.has_conflict_token and r.has_revision and r.backtracking_event
    assert (r.retractions, r.flips, r.conflicts_emitted, r.conflicts_genuine) == (1, 1, 1, 1)
    assert r.final_assignment is None and r.sat_correct is None


def test_monotonic_text_is_not_an_event(small_formula):
    t = synthesize_trace(small_formula, InjectionConfig(forced_sites=(3,))).trace
    r = detect_backtracking(serialize_trace(linearize(t)), small_formula)
    assert not r.has_conflict_token and not r.backtracking_event
    assert r.flips == 0 and r.conflicts_emitted == 0 and r.sat_correct is True


def test_conflict_without_change_is_not_an_event(small_formula):
    text = ("Assign x1 = True.\nAssign x3 = True.\n[CONFLICT] Constraint 2 looks wrong.\n"
            "Backtracking... no, keep it.\nAssign x3 = True.\n")
    r = detect_backtracking(text, small_formula)
    assert r.has_conflict_token and not r.has_revision and not r.backtracking_event
    assert r.conflicts_emitted == 1 and r.conflicts_genuine == 0


def test_token_and_flip_without_phrase(small_formula):
    text = "Assign x3 = False.\n[CONFLICT] Constraint 2.\nTry again: assign x3 = True.\n"
    r = detect_backtracking(text, small_formula)
    assert not r.backtracking_event and r.flips == 1


def test_prose_only_response(small_formula):
    r = detect_backtracking("I think it is satisfiable.", small_formula)
    assert not r.backtracking_event
    assert r.retractions is None and r.conflicts_emitted is None and r.sat_correct is None


def test_custom_phrases(small_formula):
    text = "Assign x3 = False.\n[CONFLICT]\nUndo that.\nAssign x3 = True.\n"
    assert not detect_backtracking(text, small_formula).backtracking_event
    assert detect_backtracking(text, small_formula, phrases=("Undo",)).backtracking_event


def test_compute_ber_examples():
    assert compute_ber([miss()] * 40).ber == 0.0
    m = compute_ber([hit()] * 2 + [miss()] * 38)
    assert m.ber == pytest.approx(2 / 40, abs=0) and m.backtracking_events == 2
    assert compute_ber([hit()]).ber == 1.0
    with pytest.raises(ValueError):
        compute_ber([])


@given(st.lists(st.booleans(), min_size=1, max_size=60), st.randoms())
def test_ber_is_permutation_invariant(flags, rnd):
    results = [hit() if b else miss() for b in flags]
    shuffled = list(results)
    rnd.shuffle(shuffled)
    m = compute_ber(results)
    assert m.ber == compute_ber(shuffled).ber == sum(flags) / len(flags)
    assert 0.0 <= m.ber <= 1.0


def test_conflict_precision_engine_corpus():
    results = []
    for seed in range(30):
        f = generate_instance(8, 24, 3, seed)
        t = synthesize_trace(f, InjectionConfig(seed=seed, max_injections=2)).trace
        results.append(detect_backtracking(serialize_trace(t), f))
    assert sum(r.conflicts_emitted for r in results) > 0
    assert conflict_precision(results) == 1.0


def test_conflict_precision_hallucinated(small_formula):
    r = detect_backtracking(hallucinated_text(small_formula), small_formula)
    assert r.conflicts_emitted == 1 and r.conflicts_genuine == 0
    assert conflict_precision([r]) == 0.0
    assert conflict_precision([miss()]) is None


def test_check_correctness_examples(small_formula):
    assert check_correctness("Final Assignment: {x1: True, x2: False, x3: True}", small_formula) is True
    assert check_correctness("Final Assignment: {x1: False, x2: False, x3: False}", small_formula) is False
    assert check_correctness("Final Assignment: {x1: True, x3: True}", small_formula) is None
    assert check_correctness("no answer", small_formula) is None


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 50_000), st.floats(0, 1))
def test_heuristic_event_implies_a_flip(seed, prob):
    f = generate_instance(7, 21, 3, seed)
    t = synthesize_trace(f, InjectionConfig(injection_probability=prob, seed=seed)).trace
    r = detect_backtracking(serialize_trace(t), f)
    if r.backtracking_event:
        assert r.flips >= 1 and r.retractions >= 1
    assert r.sat_correct is True


def _fixture_metrics(name):
    responses = load_responses(BER40 / f"responses_{name}.jsonl")
    return analyze_responses(responses, load_instances(BER40 / "instances"))


def test_bundled_fixtures():
    results, ctrl = _fixture_metrics("control")
    assert ctrl.n == 40 and ctrl.ber == 0.0 and ctrl.correctness_rate == 1.0
    results, treat = _fixture_metrics("treatment")
    assert treat.n == 40 and treat.backtracking_events == 2 and treat.ber == 0.05
    flagged = [iid for iid, r in results if r.backtracking_event]
    assert flagged == ["inst-00005", "inst-00022"]
    # 7 tokens: 2 repairs + 2 phrase-less flips are genuine, 3 decoys are not
    assert treat.conflict_precision == pytest.approx(4 / 7)
    assert treat.correctness_rate == pytest.approx(39 / 40)


def test_fixture_files_are_well_formed():
    for name in ("control", "treatment"):
        rows = [json.loads(l) for l in (BER40 / f"responses_{name}.jsonl").read_text().splitlines()]
        assert len(rows) == 40 and len({r["id"] for r in rows}) == 40
