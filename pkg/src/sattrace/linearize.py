"""Control-corpus construction: strip conflict/backtrack spans from a trace."""
from __future__ import annotations

import re
from typing import Dict, List, Sequence, Set, Tuple

from .cnf import Assignment, clause_statuses, serialize_dimacs
from .dataset import CONTROL, TREATMENT, DatasetRecord, render_prompt
from .teacher import pick_rationale
from .trace import (
    CONFLICT_TOKEN,
    Backtrack,
    Conflict,
    Decide,
    Final,
    Trace,
    TraceEvent,
    Verify,
    proxy_token_count,
    serialize_trace,
)
from .verify import Verdict, judge


class LinearizationError(ValueError):
    pass


def _dropped_spans(events: Sequence[TraceEvent]) -> Set[int]:
    """Indices from the oldest reverted decision through each Backtrack."""
    latest: Dict[int, int] = {}
    drop: Set[int] = set()
    for i, ev in enumerate(events):
        if isinstance(ev, Decide):
            latest[ev.variable] = i
        elif isinstance(ev, Backtrack):
            start = min(latest.pop(v) for v in ev.variables)
            drop.update(range(start, i + 1))
    return drop


def linearize(t: Trace) -> Trace:
    """Monotonic version of a verified trace.

    Reverted decisions, their checks, the conflict and the backtrack are
    removed. Surviving checks are recomputed against the shortened replay;
    a re-proposal that loses its Backtrack gets an ordinary rationale.
    """
    verdict = judge(t.formula, t.final_assignment)
    if verdict is not Verdict.VERIFIED:
        raise LinearizationError(f"trace {t.instance_id!r} is not verified ({verdict.value})")
    f = t.formula
    drop = _dropped_spans(t.events)
    a = Assignment.empty(f.num_vars)
    out: List[TraceEvent] = []
    after_cut = False
    for i, ev in enumerate(t.events):
        if i in drop:
            after_cut = after_cut or isinstance(ev, Backtrack)
            continue
        if isinstance(ev, Decide):
            if after_cut and ev.rationale_clause is None:
                ev = Decide(ev.variable, ev.value, pick_rationale(f, ev.variable, ev.value))
            a = a.assign(ev.variable, ev.value)
            out.append(ev)
        elif isinstance(ev, Verify):
            out.append(Verify(tuple(clause_statuses(f, a))))
        elif isinstance(ev, Final):
            out.append(ev)
        # stray Conflict/Backtrack outside a repaired span are dropped
        after_cut = False
    lin = Trace(t.instance_id, f, tuple(out))
    lin.validate()
    return lin


def linearize_text(lines: Sequence[str]) -> List[str]:
    """Line filter: skip from a ``[CONFLICT]`` line up to (and keeping) the
    next line mentioning "New Proposal" or "Revised"."""
    out = []
    skip = False
    for line in lines:
        if CONFLICT_TOKEN in line:
            skip = True
            continue
        if skip:
            if "New Proposal" in line or "Revised" in line:
                skip = False
                out.append(line)
            continue
        out.append(line)
    return out


_STEP = re.compile(r"^\d+\. ", re.MULTILINE)


def renumber_neutral(text: str) -> str:
    return _STEP.sub("#. ", text)


def linearizations_agree(t: Trace) -> bool:
    """Compare event-level and line-level linearization, ignoring step numbers."""
    event_level = serialize_trace(linearize(t))
    text_level = "\n".join(linearize_text(serialize_trace(t).split("\n")))
    return renumber_neutral(event_level) == renumber_neutral(text_level)


def build_matched_pair(t: Trace) -> Tuple[DatasetRecord, DatasetRecord]:
    control_trace = linearize(t)
    dimacs = serialize_dimacs(t.formula)
    prompt = render_prompt(t.formula)
    treatment_text = serialize_trace(t)
    control_text = serialize_trace(control_trace)
    treatment = DatasetRecord(
        id=t.instance_id, dimacs=dimacs, prompt=prompt, completion=treatment_text,
        condition=TREATMENT, verified=True, token_count=proxy_token_count(treatment_text),
        conflict_count=t.count(Conflict),
    )
    control = DatasetRecord(
        id=t.instance_id, dimacs=dimacs, prompt=prompt, completion=control_text,
        condition=CONTROL, verified=True, token_count=proxy_token_count(control_text),
        conflict_count=0,
    )
    return treatment, control
