"""Self-correction metrics over arbitrary model responses.

Two detectors run on every response. The string heuristic marks a
backtracking event when the text contains ``[CONFLICT]``, a backtracking
phrase after it, and a later proposal that flips a value assigned before
it. The state tracker replays the assignments it can extract from the text
and counts retractions, flips and conflicts that name a clause actually
falsified under the response's own stated assignment.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence

from .cnf import Assignment, ClauseStatus, Formula, evaluate_clause
from .trace import CONFLICT_TOKEN, Backtrack, Conflict, Decide, Trace, parse_trace
from .verify import verify_final

DEFAULT_PHRASES = ("Backtracking", "Reverting state", "Reverting assignment")


@dataclass(frozen=True)
class DetectionResult:
    has_conflict_token: bool
    has_revision: bool
    backtracking_event: bool
    retractions: Optional[int] = None
    flips: Optional[int] = None
    conflicts_emitted: Optional[int] = None
    conflicts_genuine: Optional[int] = None
    final_assignment: Optional[Assignment] = None
    sat_correct: Optional[bool] = None

    def to_record(self) -> dict:
        rec = asdict(self)
        fa = self.final_assignment
        rec["final_assignment"] = None if fa is None else {f"x{v}": b for v, b in fa.assigned()}
        return rec


@dataclass(frozen=True)
class CorpusMetrics:
    n: int
    ber: float
    backtracking_events: int
    conflict_precision: Optional[float] = None
    correctness_rate: Optional[float] = None

    def to_record(self) -> dict:
        return asdict(self)


def _has_revision(text_lines: Sequence[str], t: Trace, phrases: Sequence[str]) -> bool:
    decides = [(line, ev) for line, ev in zip(t.event_lines, t.events) if isinstance(ev, Decide)]
    conflict_lines = [i + 1 for i, line in enumerate(text_lines) if CONFLICT_TOKEN in line]
    for c in conflict_lines:
        after_token = text_lines[c - 1].split(CONFLICT_TOKEN, 1)[1]
        rest = "\n".join([after_token] + list(text_lines[c:]))
        if not any(p in rest for p in phrases):
            continue
        before: Dict[int, bool] = {}
        for line, ev in decides:
            if line < c:
                before[ev.variable] = ev.value
        if any(line > c and ev.variable in before and before[ev.variable] != ev.value
               for line, ev in decides):
            return True
    return False


def _track_state(t: Trace) -> dict:
    f = t.formula
    a = Assignment.empty(f.num_vars)
    last: Dict[int, bool] = {}
    counts = dict(retractions=0, flips=0, conflicts_emitted=0, conflicts_genuine=0)
    for ev in t.events:
        if isinstance(ev, Decide):
            if ev.variable in last and last[ev.variable] != ev.value:
                counts["flips"] += 1
            last[ev.variable] = ev.value
            a = a.assign(ev.variable, ev.value)
        elif isinstance(ev, Backtrack):
            for var, _ in ev.reverted:
                if a.get(var) is not None:
                    a = a.unassign(var)
                    counts["retractions"] += 1
        elif isinstance(ev, Conflict):
            counts["conflicts_emitted"] += 1
            idx = ev.violated_clause
            if idx is not None and evaluate_clause(f.clause(idx), a) is ClauseStatus.FALSIFIED:
                counts["conflicts_genuine"] += 1
    return counts


def _final_and_correctness(t: Trace):
    final = t.final_assignment
    if final is None or not final.is_total:
        return final, None
    return final, verify_final(t.formula, final)


def detect_backtracking(response: str, f: Formula,
                        phrases: Sequence[str] = DEFAULT_PHRASES) -> DetectionResult:
    t = parse_trace(response, f, strict=False)
    has_token = CONFLICT_TOKEN in response
    has_revision = has_token and _has_revision(response.splitlines(), t, phrases)
    final, sat = _final_and_correctness(t)
    state = _track_state(t) if t.events else {}
    return DetectionResult(
        has_conflict_token=has_token,
        has_revision=has_revision,
        backtracking_event=has_token and has_revision,
        final_assignment=final,
        sat_correct=sat,
        **state,
    )


def check_correctness(response: str, f: Formula) -> Optional[bool]:
    """Whether the response's final assignment satisfies ``f``; None when the
    response has no complete final assignment."""
    return _final_and_correctness(parse_trace(response, f, strict=False))[1]


def compute_ber(results: Sequence[DetectionResult]) -> CorpusMetrics:
    results = list(results)
    if not results:
        raise ValueError("BER is undefined for an empty set of responses")
    n = len(results)
    events = sum(r.backtracking_event for r in results)
    finals = [r.sat_correct for r in results if r.sat_correct is not None]
    correctness = float(Fraction(sum(finals), n)) if finals else None
    return CorpusMetrics(
        n=n,
        ber=float(Fraction(events, n)),
        backtracking_events=events,
        conflict_precision=conflict_precision(results),
        correctness_rate=correctness,
    )


def conflict_precision(results: Iterable[DetectionResult]) -> Optional[float]:
    emitted = genuine = 0
    for r in results:
        emitted += r.conflicts_emitted or 0
        genuine += r.conflicts_genuine or 0
    if emitted == 0:
        return None
    return float(Fraction(genuine, emitted))
