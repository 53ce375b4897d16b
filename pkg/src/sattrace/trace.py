"""Reasoning-trace events and their line-oriented text form.

A serialized trace looks like::

    1. Initial State:
       All variables unassigned.
       Assignment set = {}.

    2. Propose Assignment:
       Based on Constraint 1 (¬x3 ∨ x1),
       assign x3 = False.
       -> Current State: {x3: False}

    3. Check Assignment:
       Verifying against constraints...
       - Constraint 1 satisfied.
       - Constraint 2 violated.

       [CONFLICT] Constraint violation detected.
       Backtracking...

       Reverting assignment x3 = False.

    4. New Proposal:
       Assign x3 = True.
       -> Current State: {x3: True}

    ...

    9. Final Assignment:
       {x1: True, x2: False, x3: True}

A ``Decide`` directly after a ``Backtrack`` is written as a "New Proposal"
block (without a rationale line); every other ``Decide`` is a "Propose
Assignment" block.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

from .cnf import Assignment, ClauseStatus, Formula

INDENT = "   "
CONFLICT_TOKEN = "[CONFLICT]"
CONFLICT_LINE = "[CONFLICT] Constraint violation detected."
NO_RATIONALE_LINE = "With no constraint forcing a value,"


class TraceParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ReplayError(ValueError):
    def __init__(self, message: str, event_index: int):
        self.event_index = event_index
        super().__init__(f"event {event_index}: {message}")


@dataclass(frozen=True)
class Decide:
    variable: int
    value: bool
    rationale_clause: Optional[int] = None


@dataclass(frozen=True)
class Verify:
    statuses: Tuple[Tuple[int, ClauseStatus], ...]

    def __post_init__(self):
        object.__setattr__(self, "statuses", tuple((int(i), s) for i, s in self.statuses))

    def falsified(self) -> List[int]:
        return [i for i, s in self.statuses if s is ClauseStatus.FALSIFIED]


@dataclass(frozen=True)
class Conflict:
    # None only in lenient parses where the text never names the clause
    violated_clause: Optional[int]


@dataclass(frozen=True)
class Backtrack:
    reverted: Tuple[Tuple[int, bool], ...]

    def __post_init__(self):
        object.__setattr__(self, "reverted", tuple((int(v), bool(b)) for v, b in self.reverted))

    @property
    def variables(self) -> List[int]:
        return [v for v, _ in self.reverted]


@dataclass(frozen=True)
class Final:
    assignment: Assignment


TraceEvent = Union[Decide, Verify, Conflict, Backtrack, Final]


@dataclass(frozen=True)
class Trace:
    instance_id: str
    formula: Formula
    events: Tuple[TraceEvent, ...]
    # (line number, text) pairs a lenient parse could not interpret
    opaque: Tuple[Tuple[int, str], ...] = field(default=(), compare=False)
    # source line of each event, when parsed from text
    event_lines: Tuple[int, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "opaque", tuple(self.opaque))
        object.__setattr__(self, "event_lines", tuple(self.event_lines))

    @property
    def final(self) -> Optional[Final]:
        for ev in reversed(self.events):
            if isinstance(ev, Final):
                return ev
        return None

    @property
    def final_assignment(self) -> Optional[Assignment]:
        fin = self.final
        return fin.assignment if fin is not None else None

    def count(self, kind: type) -> int:
        return sum(isinstance(ev, kind) for ev in self.events)

    def validate(self) -> List[Assignment]:
        """Check structural invariants and replay; returns the snapshots."""
        finals = [i for i, ev in enumerate(self.events) if isinstance(ev, Final)]
        if len(finals) != 1 or finals[0] != len(self.events) - 1:
            raise ReplayError("a trace needs exactly one Final event, in last position",
                              finals[0] if finals else len(self.events))
        for i, ev in enumerate(self.events):
            if isinstance(ev, Conflict):
                prev = self.events[i - 1] if i else None
                if not isinstance(prev, Verify) or not prev.falsified():
                    raise ReplayError("Conflict not preceded by a Verify reporting a violation", i)
        return replay(self)


def replay(t: Trace) -> List[Assignment]:
    """Assignment state after each event."""
    a = Assignment.empty(t.formula.num_vars)
    snapshots = []
    for i, ev in enumerate(t.events):
        if isinstance(ev, Decide):
            if not 1 <= ev.variable <= a.num_vars:
                raise ReplayError(f"x{ev.variable} is out of range", i)
            if a.is_assigned(ev.variable):
                raise ReplayError(f"x{ev.variable} assigned twice without a Backtrack", i)
            a = a.assign(ev.variable, ev.value)
        elif isinstance(ev, Backtrack):
            if not ev.reverted:
                raise ReplayError("empty Backtrack", i)
            for var, old in ev.reverted:
                if not 1 <= var <= a.num_vars or a.get(var) is None:
                    raise ReplayError(f"cannot revert unassigned x{var}", i)
                if a.get(var) != old:
                    raise ReplayError(f"revert of x{var} = {old} but it holds {a.get(var)}", i)
                a = a.unassign(var)
        elif isinstance(ev, Final):
            if i != len(t.events) - 1:
                raise ReplayError("Final must be the last event", i)
            if not ev.assignment.is_total:
                raise ReplayError("Final assignment is not total", i)
            if ev.assignment != a:
                raise ReplayError("Final assignment differs from the replayed state", i)
        snapshots.append(a)
    return snapshots


def proxy_token_count(text: str) -> int:
    return len(text.split())


# Rendering


def _bool(v: bool) -> str:
    return "True" if v else "False"


def render_assignment(a: Assignment) -> str:
    return "{" + ", ".join(f"x{v}: {_bool(b)}" for v, b in a.assigned()) + "}"


def serialize_trace(t: Trace) -> str:
    f = t.formula
    blocks: List[List[str]] = [[
        "1. Initial State:",
        INDENT + "All variables unassigned.",
        INDENT + "Assignment set = {}.",
    ]]
    a = Assignment.empty(f.num_vars)
    prev = None
    for ev in t.events:
        step = len(blocks) + 1
        if isinstance(ev, Decide):
            a = a.assign(ev.variable, ev.value)
            if isinstance(prev, Backtrack):
                blocks.append([
                    f"{step}. New Proposal:",
                    INDENT + f"Assign x{ev.variable} = {_bool(ev.value)}.",
                    INDENT + f"-> Current State: {render_assignment(a)}",
                ])
            else:
                if ev.rationale_clause is None:
                    why = NO_RATIONALE_LINE
                else:
                    why = f"Based on Constraint {ev.rationale_clause} {f.clause(ev.rationale_clause)},"
                blocks.append([
                    f"{step}. Propose Assignment:",
                    INDENT + why,
                    INDENT + f"assign x{ev.variable} = {_bool(ev.value)}.",
                    INDENT + f"-> Current State: {render_assignment(a)}",
                ])
        elif isinstance(ev, Verify):
            block = [f"{step}. Check Assignment:", INDENT + "Verifying against constraints..."]
            block.extend(INDENT + f"- Constraint {i} {s.value}." for i, s in ev.statuses)
            blocks.append(block)
        elif isinstance(ev, Conflict):
            blocks[-1].extend(["", INDENT + CONFLICT_LINE])
        elif isinstance(ev, Backtrack):
            blocks[-1].extend([INDENT + "Backtracking...", ""])
            blocks[-1].extend(INDENT + f"Reverting assignment x{v} = {_bool(old)}." for v, old in ev.reverted)
            for v, _ in ev.reverted:
                a = a.unassign(v)
        elif isinstance(ev, Final):
            blocks.append([f"{step}. Final Assignment:", INDENT + render_assignment(ev.assignment)])
        prev = ev
    return "\n\n".join("\n".join(b) for b in blocks) + "\n"


# Parsing

_HEADER_STRICT = re.compile(
    r"^(\d+)\. (Initial State|Propose Assignment|Check Assignment|New Proposal|Final Assignment):$"
)
_HEADER_LENIENT = re.compile(
    r"^(?:\**\s*(?:step\s*)?(\d+)[.):]\s*)?\**\s*"
    r"(Initial State|Propose Assignment|Check Assignment|New Proposal|Final Assignment|Final Answer)"
    r"\s*\**\s*:?\s*\**\s*(.*)$",
    re.IGNORECASE,
)
_RATIONALE = re.compile(r"^Based on Constraint (\d+) (.*),$")
_ASSIGN_STRICT = re.compile(r"^assign x(\d+) = (True|False)\.$")
_NEWPROP_STRICT = re.compile(r"^Assign x(\d+) = (True|False)\.$")
_STATE_STRICT = re.compile(r"^-> Current State: (\{.*\})$")
_STATUS_STRICT = re.compile(r"^- Constraint (\d+) (satisfied|violated|undetermined)\.$")
_REVERT_STRICT = re.compile(r"^Reverting assignment x(\d+) = (True|False)\.$")
_FINAL_STRICT = re.compile(r"^\{(.*)\}$")

_VALUE = r"(True|False|true|false|TRUE|FALSE|T|F|1|0)"
_ASSIGN_LENIENT = re.compile(r"\b(?:re-?)?assign(?:ing)?\s+x(\d+)\s*(?:=|:=|:|to|->|as)\s*" + _VALUE + r"\b",
                             re.IGNORECASE)
_STATUS_LENIENT = re.compile(r"\bConstraint\s+(\d+)\s+(?:is\s+)?(satisfied|violated|undetermined)\b",
                             re.IGNORECASE)
_REVERT_LENIENT = re.compile(r"\brevert(?:ing|ed)?\s+(?:the\s+)?(?:assignment\s+)?x(\d+)\s*(?:=|:)\s*"
                             + _VALUE + r"\b", re.IGNORECASE)
_CONSTRAINT_REF = re.compile(r"\bConstraint\s+(\d+)\b", re.IGNORECASE)
_PAIR = re.compile(r"x(\d+)\s*(?:=|:)\s*" + _VALUE + r"\b")

_TRUE = {"true", "t", "1"}


def _to_bool(tok: str) -> bool:
    return tok.lower() in _TRUE


def _parse_assignment_body(body: str, num_vars: int, strict: bool, lineno: int) -> Optional[Assignment]:
    """Parse ``x1: True, x3: False`` (without braces)."""
    body = body.strip()
    if not body:
        return Assignment.empty(num_vars)
    values = {}
    if strict:
        for part in body.split(", "):
            m = re.fullmatch(r"x(\d+): (True|False)", part)
            if not m:
                raise TraceParseError(f"malformed assignment entry {part!r}", lineno)
            var = int(m.group(1))
            if not 1 <= var <= num_vars:
                raise TraceParseError(f"x{var} is out of range 1..{num_vars}", lineno)
            if var in values:
                raise TraceParseError(f"x{var} listed twice", lineno)
            values[var] = m.group(2) == "True"
        if list(values) != sorted(values):
            raise TraceParseError("assignment entries must be in ascending variable order", lineno)
        return Assignment(num_vars, values)
    for m in _PAIR.finditer(body):
        var = int(m.group(1))
        if 1 <= var <= num_vars:
            values[var] = _to_bool(m.group(2))
    if not values:
        return None
    return Assignment(num_vars, values)


class _Parser:
    def __init__(self, f: Formula, strict: bool):
        self.f = f
        self.strict = strict
        self.events: List[TraceEvent] = []
        self.event_lines: List[int] = []
        self.opaque: List[Tuple[int, str]] = []
        self.block: Optional[str] = None
        self.block_line = 0
        self.next_step = 1
        self.seen: set = set()
        self.statuses: List[Tuple[int, ClauseStatus]] = []
        self.status_line = 0
        self.reverted: List[Tuple[int, bool]] = []
        self.revert_line = 0
        self.in_backtrack = False
        self.rationale: Optional[int] = None
        self.stated_states: List[Tuple[int, int, str]] = []  # (event idx, line, text)
        self.expect_final_body = False

    def fail(self, msg: str, lineno: int) -> None:
        raise TraceParseError(msg, lineno)

    def emit(self, ev: TraceEvent, lineno: int) -> None:
        self.events.append(ev)
        self.event_lines.append(lineno)

    def flush(self) -> None:
        if self.statuses:
            self.emit(Verify(tuple(self.statuses)), self.status_line)
            self.statuses = []
        if self.reverted:
            self.emit(Backtrack(tuple(self.reverted)), self.revert_line)
            self.reverted = []
        elif self.in_backtrack and self.strict:
            self.fail("Backtracking... without any reverted assignment", self.revert_line)
        self.in_backtrack = False

    def end_block(self, lineno: int) -> None:
        if self.strict and self.block is not None:
            need = {
                "Initial State": {"initial-a", "initial-b"},
                "Propose Assignment": {"rationale", "assign", "state"},
                "New Proposal": {"assign", "state"},
                "Check Assignment": {"verifying"},
                "Final Assignment": {"final"},
            }[self.block]
            missing = need - self.seen
            if missing:
                self.fail(f"incomplete '{self.block}' block (missing {', '.join(sorted(missing))})",
                          self.block_line)
        self.flush()

    def var_ok(self, var: int, lineno: int) -> bool:
        if 1 <= var <= self.f.num_vars:
            return True
        if self.strict:
            self.fail(f"x{var} is out of range 1..{self.f.num_vars}", lineno)
        return False

    def clause_ok(self, idx: int, lineno: int) -> bool:
        if 1 <= idx <= self.f.num_clauses:
            return True
        if self.strict:
            self.fail(f"Constraint {idx} does not exist (formula has {self.f.num_clauses})", lineno)
        return False

    def parse(self, text: str) -> None:
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if self.strict:
                self.strict_line(line, lineno)
            else:
                self.lenient_line(line, lineno)
        self.end_block(lineno + 1 if text else 1)
        if self.strict and self.block is None:
            self.fail("empty trace", 1)

    # strict grammar

    def strict_line(self, line: str, lineno: int) -> None:
        m = _HEADER_STRICT.match(line)
        if m:
            self.end_block(lineno)
            step, kind = int(m.group(1)), m.group(2)
            if step != self.next_step:
                self.fail(f"expected step {self.next_step}, found {step}", lineno)
            if (kind == "Initial State") != (step == 1):
                self.fail("the trace must open with (only one) Initial State block", lineno)
            if self.block == "Final Assignment":
                self.fail("content after the Final Assignment block", lineno)
            if kind == "New Proposal" and not isinstance(self.events[-1] if self.events else None, Backtrack):
                self.fail("New Proposal must follow a Backtrack", lineno)
            if kind == "Propose Assignment" and self.events and isinstance(self.events[-1], Backtrack):
                self.fail("the proposal after a Backtrack must be a New Proposal", lineno)
            self.next_step += 1
            self.block, self.block_line, self.seen = kind, lineno, set()
            self.rationale = None
            return
        blk = self.block
        if blk is None:
            self.fail(f"text before the first block: {line!r}", lineno)
        if blk == "Initial State":
            if line == "All variables unassigned." and not self.seen:
                self.seen.add("initial-a")
                return
            if line == "Assignment set = {}." and self.seen == {"initial-a"}:
                self.seen.add("initial-b")
                return
        elif blk == "Propose Assignment":
            if not self.seen:
                m = _RATIONALE.match(line)
                if m:
                    idx = int(m.group(1))
                    self.clause_ok(idx, lineno)
                    self.rationale = idx
                    self.seen.add("rationale")
                    return
                if line == NO_RATIONALE_LINE:
                    self.seen.add("rationale")
                    return
            m = _ASSIGN_STRICT.match(line)
            if m and self.seen == {"rationale"}:
                var = int(m.group(1))
                self.var_ok(var, lineno)
                self.emit(Decide(var, m.group(2) == "True", self.rationale), lineno)
                self.seen.add("assign")
                return
            m = _STATE_STRICT.match(line)
            if m and self.seen == {"rationale", "assign"}:
                self.stated_states.append((len(self.events) - 1, lineno, m.group(1)))
                self.seen.add("state")
                return
        elif blk == "New Proposal":
            m = _NEWPROP_STRICT.match(line)
            if m and not self.seen:
                var = int(m.group(1))
                self.var_ok(var, lineno)
                self.emit(Decide(var, m.group(2) == "True", None), lineno)
                self.seen.add("assign")
                return
            m = _STATE_STRICT.match(line)
            if m and self.seen == {"assign"}:
                self.stated_states.append((len(self.events) - 1, lineno, m.group(1)))
                self.seen.add("state")
                return
        elif blk == "Check Assignment":
            if line == "Verifying against constraints..." and not self.seen:
                self.seen.add("verifying")
                return
            m = _STATUS_STRICT.match(line)
            if m and self.seen == {"verifying"}:
                idx = int(m.group(1))
                self.clause_ok(idx, lineno)
                if not self.statuses:
                    self.status_line = lineno
                self.statuses.append((idx, ClauseStatus(m.group(2))))
                return
            if line == CONFLICT_LINE and self.seen == {"verifying"}:
                self.flush()
                prev = self.events[-1] if self.events else None
                if not isinstance(prev, Verify) or not prev.falsified():
                    self.fail("[CONFLICT] without a reported violation", lineno)
                self.emit(Conflict(min(prev.falsified())), lineno)
                self.seen.add("conflict")
                return
            if line == "Backtracking..." and self.seen == {"verifying", "conflict"}:
                self.in_backtrack = True
                self.revert_line = lineno
                self.seen.add("backtracking")
                return
            m = _REVERT_STRICT.match(line)
            if m and "backtracking" in self.seen:
                var = int(m.group(1))
                self.var_ok(var, lineno)
                self.reverted.append((var, m.group(2) == "True"))
                return
        elif blk == "Final Assignment":
            m = _FINAL_STRICT.match(line)
            if m and not self.seen:
                a = _parse_assignment_body(m.group(1), self.f.num_vars, True, lineno)
                self.emit(Final(a), lineno)
                self.seen.add("final")
                return
        self.fail(f"unexpected line in '{blk}' block: {line!r}", lineno)

    # lenient scanning

    def lenient_line(self, line: str, lineno: int) -> None:
        m = _HEADER_LENIENT.match(line)
        if m:
            self.flush()
            kind = m.group(2).title()
            self.block = "Final Assignment" if kind.startswith("Final") else kind
            self.rationale = None
            rest = m.group(3)
            self.expect_final_body = False
            if self.block == "Final Assignment":
                if rest and self._lenient_final(rest, lineno):
                    return
                self.expect_final_body = True
                return
            if rest:
                self.lenient_line(rest, lineno)
            return
        if self.expect_final_body:
            self.expect_final_body = False
            if self._lenient_final(line, lineno):
                return
        recognized = False
        if line.lower().startswith("based on"):
            ref = _CONSTRAINT_REF.search(line)
            if ref and 1 <= int(ref.group(1)) <= self.f.num_clauses:
                self.rationale = int(ref.group(1))
                recognized = True
        for sm in _STATUS_LENIENT.finditer(line):
            idx = int(sm.group(1))
            if not self.clause_ok(idx, lineno):
                continue
            if self.reverted:
                self.flush()
            if not self.statuses:
                self.status_line = lineno
            self.statuses.append((idx, ClauseStatus(sm.group(2).lower())))
            recognized = True
        if CONFLICT_TOKEN in line:
            pending = list(self.statuses)
            self.flush()
            named = None
            ref = _CONSTRAINT_REF.search(line.split(CONFLICT_TOKEN, 1)[1])
            if ref and 1 <= int(ref.group(1)) <= self.f.num_clauses:
                named = int(ref.group(1))
            else:
                prev = self.events[-1] if self.events else None
                if pending or isinstance(prev, Verify):
                    falsified = prev.falsified() if isinstance(prev, Verify) else []
                    named = min(falsified) if falsified else None
            self.emit(Conflict(named), lineno)
            recognized = True
        for rm in _REVERT_LENIENT.finditer(line):
            var = int(rm.group(1))
            if not self.var_ok(var, lineno):
                continue
            if self.statuses:
                self.flush()
            if not self.reverted:
                self.revert_line = lineno
            self.reverted.append((var, _to_bool(rm.group(2))))
            recognized = True
        for am in _ASSIGN_LENIENT.finditer(line):
            if _REVERT_LENIENT.search(line):
                break
            var = int(am.group(1))
            if not self.var_ok(var, lineno):
                continue
            self.flush()
            self.emit(Decide(var, _to_bool(am.group(2)), self.rationale), lineno)
            self.rationale = None
            recognized = True
        if not recognized and re.search(r"\bbacktrack", line, re.IGNORECASE):
            recognized = True
        if not recognized:
            self.opaque.append((lineno, line))

    def _lenient_final(self, text: str, lineno: int) -> bool:
        body = text
        m = re.search(r"\{(.*)\}", text)
        if m:
            body = m.group(1)
        a = _parse_assignment_body(body, self.f.num_vars, False, lineno)
        if a is None:
            return False
        self.flush()
        self.emit(Final(a), lineno)
        return True


def parse_trace(text: str, f: Formula, strict: bool = True, instance_id: str = "") -> Trace:
    """Parse trace text against formula ``f``.

    Strict mode accepts exactly the grammar produced by
    :func:`serialize_trace` and validates the replay. Lenient mode picks out
    whatever assignment, check, conflict and revert statements it can find
    in free text; everything else lands in ``Trace.opaque`` and no replay
    validation is done.
    """
    p = _Parser(f, strict)
    p.parse(text)
    t = Trace(instance_id, f, tuple(p.events), tuple(p.opaque), tuple(p.event_lines))
    if not strict:
        return t
    try:
        snapshots = t.validate()
    except ReplayError as exc:
        line = p.event_lines[exc.event_index] if exc.event_index < len(p.event_lines) else None
        raise TraceParseError(f"inconsistent replay: {exc}", line) from exc
    for idx, lineno, stated in p.stated_states:
        if stated != render_assignment(snapshots[idx]):
            raise TraceParseError(f"stated state {stated} disagrees with replay "
                                  f"{render_assignment(snapshots[idx])}", lineno)
    return t
