"""Checking final answers and auditing every narrated step.

Run: python demos/03_verification_and_golden_filter.py
"""
from sattrace import Assignment, Formula, InjectionConfig, audit_trace, filter_golden, synthesize_trace, verify_final
from sattrace.cnf import ClauseStatus
from sattrace.trace import Decide, Final, Trace, Verify

f = Formula.from_ints(3, [[-3, 1], [3]])
print("x1=T x2=F x3=T satisfies:", verify_final(f, Assignment(3, {1: True, 2: False, 3: True})))

good = synthesize_trace(f, InjectionConfig(forced_sites=(3,)), instance_id="good").trace

# A trace whose narration lies about Constraint 1 and ends on a wrong answer.
S, F, U = ClauseStatus.SATISFIED, ClauseStatus.FALSIFIED, ClauseStatus.UNDETERMINED
bad = Trace("bad", f, (
    Decide(1, False), Verify(((1, U), (2, U))),
    Decide(2, False), Verify(((1, U), (2, U))),
    Decide(3, True), Verify(((1, S), (2, S))),
    Final(Assignment(3, {1: False, 2: False, 3: True})),
))
for t in (good, bad):
    report = audit_trace(t)
    print(t.instance_id, report.verdict.value, list(report.step_inconsistencies))

split = filter_golden([(f, good), (f, bad), (f, "free text, not a trace")])
print(f"golden {len(split.golden)}/{split.total}, pass rate {split.pass_rate:.3f}")
