"""Symbolic judge for final assignments, trace auditing and golden filtering."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

from .cnf import Assignment, ClauseStatus, Formula, evaluate_clause, evaluate_formula
from .trace import (
    Backtrack,
    Conflict,
    Decide,
    Final,
    Trace,
    TraceParseError,
    Verify,
    parse_trace,
)


class IncompleteAssignmentError(ValueError):
    pass


class Verdict(str, enum.Enum):
    VERIFIED = "verified"
    UNSATISFYING = "unsatisfying"
    INCOMPLETE = "incomplete"
    UNPARSEABLE = "unparseable"


def verify_final(f: Formula, a_star: Assignment) -> bool:
    """True iff ``a_star`` satisfies every clause of ``f``.

    With a total assignment, solving ``f`` conjoined with the unit clauses of
    ``a_star`` reduces to evaluating each clause, which is what happens here.
    """
    if a_star.num_vars != f.num_vars or not a_star.is_total:
        raise IncompleteAssignmentError(
            f"final assignment covers {len(a_star)} of {f.num_vars} variables"
        )
    return evaluate_formula(f, a_star)


def judge(f: Formula, a_star: Optional[Assignment]) -> Verdict:
    if a_star is None or a_star.num_vars != f.num_vars or not a_star.is_total:
        return Verdict.INCOMPLETE
    return Verdict.VERIFIED if evaluate_formula(f, a_star) else Verdict.UNSATISFYING


@dataclass(frozen=True)
class AuditReport:
    final_ok: bool
    verdict: Verdict
    step_inconsistencies: Tuple[Tuple[int, str], ...] = ()

    @property
    def clean(self) -> bool:
        return self.final_ok and not self.step_inconsistencies

    def to_record(self) -> dict:
        return {
            "final_ok": self.final_ok,
            "verdict": self.verdict.value,
            "step_inconsistencies": [[i, msg] for i, msg in self.step_inconsistencies],
        }


def audit_trace(t: Trace) -> AuditReport:
    """Compare every stated clause check and conflict with exact evaluation.

    The replay here never raises: impossible moves (double assignment,
    reverting an unassigned variable) are recorded and skipped.
    """
    f = t.formula
    a = Assignment.empty(f.num_vars)
    problems: List[Tuple[int, str]] = []
    for i, ev in enumerate(t.events):
        if isinstance(ev, Decide):
            if not 1 <= ev.variable <= f.num_vars:
                problems.append((i, f"x{ev.variable} is out of range"))
                continue
            if a.get(ev.variable) is not None and a.get(ev.variable) != ev.value:
                problems.append((i, f"x{ev.variable} reassigned without a revert"))
            a = a.assign(ev.variable, ev.value)
        elif isinstance(ev, Verify):
            for idx, stated in ev.statuses:
                if not 1 <= idx <= f.num_clauses:
                    problems.append((i, f"Constraint {idx} does not exist"))
                    continue
                actual = evaluate_clause(f.clause(idx), a)
                if actual is not stated:
                    problems.append((i, f"Constraint {idx} reported {stated.value}, actually {actual.value}"))
        elif isinstance(ev, Conflict):
            idx = ev.violated_clause
            if idx is None or not 1 <= idx <= f.num_clauses:
                problems.append((i, "conflict does not name an existing clause"))
            elif evaluate_clause(f.clause(idx), a) is not ClauseStatus.FALSIFIED:
                problems.append((i, f"conflict on Constraint {idx}, which is not falsified"))
        elif isinstance(ev, Backtrack):
            for var, old in ev.reverted:
                if not 1 <= var <= f.num_vars or a.get(var) is None:
                    problems.append((i, f"revert of unassigned x{var}"))
                    continue
                if a.get(var) != old:
                    problems.append((i, f"revert of x{var} = {old} but it holds {a.get(var)}"))
                a = a.unassign(var)
        elif isinstance(ev, Final):
            if ev.assignment != a and ev.assignment.is_total:
                problems.append((i, "final assignment differs from the narrated state"))
    verdict = judge(f, t.final_assignment)
    return AuditReport(verdict is Verdict.VERIFIED, verdict, tuple(problems))


@dataclass
class GoldenSplit:
    golden: List[Tuple[Formula, Trace]] = field(default_factory=list)
    # (formula, trace or raw text, verdict)
    rejected: List[Tuple[Formula, Union[Trace, str], Verdict]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.golden) + len(self.rejected)

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def pass_rate(self) -> Optional[float]:
        """None marks an empty corpus, where the rate is undefined."""
        if self.empty:
            return None
        return len(self.golden) / self.total


def filter_golden(corpus: Iterable[Tuple[Formula, Union[Trace, str]]]) -> GoldenSplit:
    """Partition by final-assignment verification.

    Items may carry raw trace text, which is parsed strictly; text that fails
    to parse is rejected as unparseable.
    """
    split = GoldenSplit()
    for f, item in corpus:
        if isinstance(item, str):
            try:
                t = parse_trace(item, f, strict=True)
            except TraceParseError:
                split.rejected.append((f, item, Verdict.UNPARSEABLE))
                continue
        else:
            t = item
        verdict = judge(f, t.final_assignment)
        if verdict is Verdict.VERIFIED:
            split.golden.append((f, t))
        else:
            split.rejected.append((f, t, verdict))
    return split
