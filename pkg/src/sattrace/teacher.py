"""Symbolic teacher: a backtracking solver that narrates its own mistakes.

In witness-guided mode the engine first finds a satisfying assignment by
brute force and then decides variables in index order along it. At a few
randomly chosen decisions it deliberately proposes the opposite value; the
resulting conflict (which may only show up a few decisions later) is
detected by an exact clause check, reported, and repaired by reverting the
window of decisions back through the wrong one.

Genuine-search mode is plain chronological backtracking (True first) and
produces whatever conflicts arise naturally.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .cnf import (
    Assignment,
    Formula,
    Literal,
    PreconditionError,
    brute_force_sat,
    clause_statuses,
    detect_conflict,
    evaluate_formula,
)
from .trace import Backtrack, Conflict, Decide, Final, Trace, TraceEvent, Verify


class SynthesisError(RuntimeError):
    pass


class Mode(str, enum.Enum):
    WITNESS = "witness"
    SEARCH = "search"


@dataclass(frozen=True)
class InjectionConfig:
    injection_probability: float = 0.9
    max_injections: int = 1
    rollback_window: int = 3
    mode: Mode = Mode.WITNESS
    seed: int = 0
    # explicit injection sites (variable indices); bypasses the random draw
    forced_sites: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "forced_sites", tuple(self.forced_sites))
        if not 0.0 <= self.injection_probability <= 1.0:
            raise ValueError("injection_probability must lie in [0, 1]")
        if self.max_injections < 0:
            raise ValueError("max_injections must be >= 0")
        if self.injection_probability > 0 and self.max_injections < 1:
            raise ValueError("max_injections must be >= 1 when injection_probability > 0")
        if self.rollback_window < 1:
            raise ValueError("rollback_window must be >= 1")


@dataclass(frozen=True)
class SynthesisResult:
    trace: Trace
    injected_conflicts: int
    natural_conflicts: int
    witness: Assignment
    # injections that never produced a conflict inside the rollback window
    abandoned_injections: int = 0


def pick_rationale(f: Formula, variable: int, value: bool) -> Optional[int]:
    """Clause cited for a proposal: the first clause the new literal satisfies,
    else the first clause mentioning the variable."""
    lit = Literal(variable, value)
    mentions = None
    for i, c in enumerate(f.clauses, start=1):
        if lit in c.literals:
            return i
        if mentions is None and -lit in c.literals:
            mentions = i
    return mentions


def decide_next(f: Formula, a: Assignment, witness: Assignment,
                inject_sites: Iterable[int] = ()) -> Decide:
    """Propose the lowest unassigned variable with its witness value, negated
    when the variable is an injection site."""
    var = a.lowest_unassigned()
    if var is None:
        raise PreconditionError("no unassigned variable left to decide")
    value = witness.get(var)
    if value is None:
        raise PreconditionError(f"witness leaves x{var} unassigned")
    if var in set(inject_sites):
        value = not value
    return Decide(var, value, pick_rationale(f, var, value))


def run_verify(f: Formula, a: Assignment) -> Tuple[Verify, Optional[Conflict]]:
    verify = Verify(tuple(clause_statuses(f, a)))
    idx = detect_conflict(f, a)
    return verify, (Conflict(idx) if idx is not None else None)


def backtrack(a: Assignment, delta: Sequence[int],
              rollback_window: Optional[int] = None) -> Tuple[Backtrack, Assignment]:
    """Unassign ``delta`` (given in decision order). The event lists the
    reverted variables most recent first, with the values they held."""
    if not delta:
        raise PreconditionError("nothing to revert")
    if rollback_window is not None and len(delta) > rollback_window:
        raise PreconditionError(f"rollback of {len(delta)} exceeds window {rollback_window}")
    reverted = []
    for var in reversed(delta):
        old = a.get(var)
        if old is None:
            raise PreconditionError(f"cannot revert unassigned x{var}")
        reverted.append((var, old))
        a = a.unassign(var)
    return Backtrack(tuple(reverted)), a


def _injection_sites(f: Formula, cfg: InjectionConfig) -> FrozenSet[int]:
    if cfg.forced_sites:
        return frozenset(cfg.forced_sites)
    rng = random.Random(cfg.seed)
    sites = set()
    for _ in range(cfg.max_injections):
        if rng.random() < cfg.injection_probability:
            sites.add(rng.randint(1, f.num_vars))
    return frozenset(sites)


def _conflict_distance(f: Formula, a: Assignment, witness: Assignment, var: int) -> Optional[int]:
    """Decisions from a flipped ``var`` until the first conflict, following the
    witness afterwards; None when the flipped completion is conflict-free."""
    a = a.assign(var, not witness.get(var))
    steps = 1
    while True:
        if detect_conflict(f, a) is not None:
            return steps
        nxt = a.lowest_unassigned()
        if nxt is None:
            return None
        a = a.assign(nxt, witness.get(nxt))
        steps += 1


def _witness_guided(f: Formula, cfg: InjectionConfig, instance_id: str) -> SynthesisResult:
    witness = brute_force_sat(f)
    if witness is None:
        raise SynthesisError(f"{instance_id or 'formula'} is unsatisfiable")
    sites = set(_injection_sites(f, cfg))
    a = Assignment.empty(f.num_vars)
    events: List[TraceEvent] = []
    stack: List[int] = []
    active: Optional[int] = None
    injected = abandoned = 0

    while True:
        var = a.lowest_unassigned()
        if var is None:
            break
        reproposal = bool(events) and isinstance(events[-1], Backtrack)
        flip = False
        if var in sites and not reproposal and active is None:
            sites.discard(var)
            dist = _conflict_distance(f, a, witness, var)
            if dist is None:
                flip = True
                abandoned += 1
            elif dist <= cfg.rollback_window:
                flip = True
                active = var
            else:
                abandoned += 1
        dec = decide_next(f, a, witness, (var,) if flip else ())
        if reproposal:
            dec = Decide(dec.variable, dec.value, None)
        events.append(dec)
        stack.append(var)
        a = a.assign(var, dec.value)
        verify, conflict = run_verify(f, a)
        events.append(verify)
        if conflict is None:
            continue
        if active is None:
            raise SynthesisError("conflict while following the witness")
        events.append(conflict)
        cut = stack.index(active)
        bt, a = backtrack(a, stack[cut:], cfg.rollback_window)
        events.append(bt)
        del stack[cut:]
        injected += 1
        active = None

    if not evaluate_formula(f, a):
        raise SynthesisError("engine finished with a non-satisfying assignment")
    events.append(Final(a))
    return SynthesisResult(Trace(instance_id, f, tuple(events)), injected, 0, witness, abandoned)


def search_solve(f: Formula, instance_id: str = "") -> Tuple[Optional[Assignment], List[TraceEvent]]:
    """Chronological backtracking with full event narration.

    Returns the model found (None if unsatisfiable) and the events; the
    event list ends with ``Final`` only when a model was found.
    """
    a = Assignment.empty(f.num_vars)
    events: List[TraceEvent] = []
    stack: List[List] = []  # [variable, value, both_tried]
    forced: Optional[bool] = None
    while True:
        var = a.lowest_unassigned()
        if var is None:
            break
        reproposal = forced is not None
        value = forced if reproposal else True
        events.append(Decide(var, value, None if reproposal else pick_rationale(f, var, value)))
        stack.append([var, value, reproposal])
        forced = None
        a = a.assign(var, value)
        verify, conflict = run_verify(f, a)
        events.append(verify)
        if conflict is None:
            continue
        events.append(conflict)
        j = len(stack) - 1
        while j >= 0 and stack[j][2]:
            j -= 1
        if j < 0:
            return None, events
        bt, a = backtrack(a, [entry[0] for entry in stack[j:]])
        events.append(bt)
        forced = not stack[j][1]
        del stack[j:]
    events.append(Final(a))
    return a, events


def synthesize_trace(f: Formula, cfg: InjectionConfig = InjectionConfig(),
                     instance_id: str = "") -> SynthesisResult:
    if cfg.mode is Mode.SEARCH:
        model, events = search_solve(f, instance_id)
        if model is None:
            raise SynthesisError(f"{instance_id or 'formula'} is unsatisfiable")
        natural = sum(isinstance(ev, Conflict) for ev in events)
        return SynthesisResult(Trace(instance_id, f, tuple(events)), 0, natural, model)
    return _witness_guided(f, cfg, instance_id)
