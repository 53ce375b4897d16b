"""CNF formulas, partial assignments, clause evaluation and DIMACS I/O.

Clause indices are 1-based everywhere in this package so that they line up
with the "Constraint i" references used in traces and prompts.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

BRUTE_FORCE_MAX_VARS = 24
GENERATION_MAX_VARS = 20
GENERATION_RETRIES = 100


class DomainError(ValueError):
    """A variable index lies outside the assignment's domain."""


class PreconditionError(ValueError):
    pass


class DimacsError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True, order=True)
class Literal:
    variable: int
    positive: bool = True

    def __post_init__(self):
        if self.variable < 1:
            raise ValueError(f"variable index must be >= 1, got {self.variable}")

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ValueError("0 is not a literal")
        return cls(abs(lit), lit > 0)

    def to_int(self) -> int:
        return self.variable if self.positive else -self.variable

    def __neg__(self) -> "Literal":
        return Literal(self.variable, not self.positive)

    def __str__(self) -> str:
        return f"x{self.variable}" if self.positive else f"¬x{self.variable}"


@dataclass(frozen=True)
class Clause:
    literals: Tuple[Literal, ...]

    def __post_init__(self):
        lits = tuple(self.literals)
        object.__setattr__(self, "literals", lits)
        if not lits:
            raise ValueError("a clause must contain at least one literal")
        if len(set(lits)) != len(lits):
            raise ValueError(f"duplicate literal in clause {self.to_ints()}")

    @classmethod
    def from_ints(cls, lits: Iterable[int]) -> "Clause":
        return cls(tuple(Literal.from_int(l) for l in lits))

    def to_ints(self) -> list:
        return [l.to_int() for l in self.literals]

    @property
    def is_tautology(self) -> bool:
        return any(-l in self.literals for l in self.literals)

    def __len__(self) -> int:
        return len(self.literals)

    def __iter__(self) -> Iterator[Literal]:
        return iter(self.literals)

    def __str__(self) -> str:
        return "(" + " ∨ ".join(str(l) for l in self.literals) + ")"


@dataclass(frozen=True)
class Formula:
    num_vars: int
    clauses: Tuple[Clause, ...]

    def __post_init__(self):
        clauses = tuple(self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.num_vars < 1:
            raise ValueError("num_vars must be positive")
        if not clauses:
            raise ValueError("a formula needs at least one clause")
        for i, c in enumerate(clauses, start=1):
            for lit in c:
                if lit.variable > self.num_vars:
                    raise ValueError(
                        f"clause {i} mentions x{lit.variable} but num_vars={self.num_vars}"
                    )

    @classmethod
    def from_ints(cls, num_vars: int, clauses: Iterable[Iterable[int]]) -> "Formula":
        return cls(num_vars, tuple(Clause.from_ints(c) for c in clauses))

    def to_ints(self) -> list:
        return [c.to_ints() for c in self.clauses]

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def clause(self, index: int) -> Clause:
        """Return clause ``index`` (1-based)."""
        if not 1 <= index <= len(self.clauses):
            raise IndexError(f"no clause {index} in a formula of {len(self.clauses)} clauses")
        return self.clauses[index - 1]


class Assignment:
    """Partial map from variables ``1..num_vars`` to True/False.

    Unassigned variables map to ``None``. Instances are immutable; the
    ``assign``/``unassign`` methods return updated copies.
    """

    __slots__ = ("num_vars", "_values")

    def __init__(self, num_vars: int, values: Optional[Mapping[int, Optional[bool]]] = None):
        if num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        self.num_vars = num_vars
        vals: Dict[int, bool] = {}
        for var, val in (values or {}).items():
            self._check(var)
            if val is not None:
                vals[int(var)] = bool(val)
        self._values = vals

    @classmethod
    def empty(cls, num_vars: int) -> "Assignment":
        return cls(num_vars)

    @classmethod
    def from_bits(cls, bits: Sequence[bool]) -> "Assignment":
        return cls(len(bits), {i + 1: bool(b) for i, b in enumerate(bits)})

    def _check(self, var: int) -> None:
        if not 1 <= var <= self.num_vars:
            raise DomainError(f"x{var} is outside the domain x1..x{self.num_vars}")

    def get(self, var: int) -> Optional[bool]:
        self._check(var)
        return self._values.get(var)

    __getitem__ = get

    def is_assigned(self, var: int) -> bool:
        return self.get(var) is not None

    def assign(self, var: int, value: bool) -> "Assignment":
        self._check(var)
        out = Assignment(self.num_vars)
        out._values = dict(self._values)
        out._values[var] = bool(value)
        return out

    def unassign(self, var: int) -> "Assignment":
        self._check(var)
        out = Assignment(self.num_vars)
        out._values = {k: v for k, v in self._values.items() if k != var}
        return out

    def assigned(self) -> list:
        """``(variable, value)`` pairs in ascending variable order."""
        return sorted(self._values.items())

    def unassigned(self) -> list:
        return [v for v in range(1, self.num_vars + 1) if v not in self._values]

    @property
    def is_total(self) -> bool:
        return len(self._values) == self.num_vars

    def lowest_unassigned(self) -> Optional[int]:
        for v in range(1, self.num_vars + 1):
            if v not in self._values:
                return v
        return None

    def literals(self) -> list:
        """Assigned variables as signed DIMACS literals (x=True -> +x, x=False -> -x)."""
        return [v if val else -v for v, val in self.assigned()]

    def as_dict(self) -> Dict[int, bool]:
        return dict(self.assigned())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.num_vars == other.num_vars and self._values == other._values

    def __hash__(self) -> int:
        return hash((self.num_vars, tuple(self.assigned())))

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"Assignment({self.num_vars}, {self.as_dict()})"


class ClauseStatus(enum.Enum):
    SATISFIED = "satisfied"
    FALSIFIED = "violated"
    UNDETERMINED = "undetermined"


def evaluate_clause(clause: Clause, a: Assignment) -> ClauseStatus:
    unassigned = False
    for lit in clause:
        val = a.get(lit.variable)
        if val is None:
            unassigned = True
        elif val == lit.positive:
            return ClauseStatus.SATISFIED
    return ClauseStatus.UNDETERMINED if unassigned else ClauseStatus.FALSIFIED


def clause_statuses(f: Formula, a: Assignment) -> list:
    return [(i, evaluate_clause(c, a)) for i, c in enumerate(f.clauses, start=1)]


def detect_conflict(f: Formula, a: Assignment) -> Optional[int]:
    """Lowest 1-based index of a falsified clause, or None."""
    for i, c in enumerate(f.clauses, start=1):
        if evaluate_clause(c, a) is ClauseStatus.FALSIFIED:
            return i
    return None


def evaluate_formula(f: Formula, a: Assignment) -> bool:
    if a.num_vars != f.num_vars or not a.is_total:
        raise PreconditionError("evaluate_formula needs a total assignment over the formula's variables")
    return all(evaluate_clause(c, a) is ClauseStatus.SATISFIED for c in f.clauses)


# DIMACS


def parse_dimacs(text: str) -> Formula:
    """Parse DIMACS CNF text. Clauses may span lines; each ends with ``0``."""
    num_vars = num_clauses = None
    clauses: list = []
    pending: list = []
    pending_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if num_vars is not None:
                raise DimacsError("duplicate problem line", lineno)
            fields = line.split()
            if len(fields) != 4 or fields[0] != "p" or fields[1] != "cnf":
                raise DimacsError(f"malformed header {line!r}", lineno)
            try:
                num_vars, num_clauses = int(fields[2]), int(fields[3])
            except ValueError:
                raise DimacsError(f"malformed header {line!r}", lineno) from None
            if num_vars < 1 or num_clauses < 1:
                raise DimacsError("header must declare at least one variable and one clause", lineno)
            continue
        if line.startswith("%"):
            break
        if num_vars is None:
            raise DimacsError("clause before problem line", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                if not pending:
                    raise DimacsError("empty clause", lineno)
                try:
                    clauses.append(Clause.from_ints(pending))
                except ValueError as exc:
                    raise DimacsError(str(exc), lineno) from None
                pending = []
                continue
            if abs(lit) > num_vars:
                raise DimacsError(f"literal {lit} exceeds declared variable count {num_vars}", lineno)
            if not pending:
                pending_line = lineno
            pending.append(lit)
    if num_vars is None:
        raise DimacsError("missing 'p cnf' header")
    if pending:
        raise DimacsError("clause is missing its terminating 0", pending_line)
    if len(clauses) != num_clauses:
        raise DimacsError(f"header declares {num_clauses} clauses but {len(clauses)} were read")
    return Formula(num_vars, tuple(clauses))


def serialize_dimacs(f: Formula) -> str:
    lines = [f"p cnf {f.num_vars} {f.num_clauses}"]
    lines.extend(" ".join(str(l) for l in c.to_ints()) + " 0" for c in f.clauses)
    return "\n".join(lines) + "\n"


# Brute force oracle

_CHUNK_BITS = 16


def brute_force_sat(f: Formula) -> Optional[Assignment]:
    """Exhaustive search for a satisfying assignment.

    Value vectors ``(x1, ..., xn)`` are enumerated in lexicographic order with
    False < True, so the first hit is the lexicographically smallest model.
    """
    n = f.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise PreconditionError(f"brute force refuses n={n} > {BRUTE_FORCE_MAX_VARS}")
    total = 1 << n
    chunk = min(total, 1 << _CHUNK_BITS)
    # column j holds x_{j+1}; x1 is the most significant bit of the row index
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    clause_vars = [np.array([l.variable - 1 for l in c], dtype=np.int64) for c in f.clauses]
    clause_pos = [np.array([l.positive for l in c], dtype=bool) for c in f.clauses]
    for start in range(0, total, chunk):
        rows = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((rows[:, None] >> shifts[None, :]) & 1).astype(bool)
        ok = np.ones(chunk, dtype=bool)
        for cv, cp in zip(clause_vars, clause_pos):
            ok &= (bits[:, cv] == cp[None, :]).any(axis=1)
            if not ok.any():
                break
        hits = np.flatnonzero(ok)
        if hits.size:
            return Assignment.from_bits(bits[hits[0]].tolist())
    return None


# Generation


@dataclass(frozen=True)
class GenerationParams:
    """Defaults: 3-SAT, n drawn from [6, 12], m = round(3.0 * n)."""

    n_min: int = 6
    n_max: int = 12
    clause_ratio: float = 3.0
    k: int = 3

    def __post_init__(self):
        if not 1 <= self.n_min <= self.n_max:
            raise ValueError("need 1 <= n_min <= n_max")
        if self.n_max > GENERATION_MAX_VARS:
            raise ValueError(f"n_max must be <= {GENERATION_MAX_VARS}")
        if not 1 <= self.k <= self.n_min:
            raise ValueError(f"clause width k={self.k} must satisfy 1 <= k <= n_min={self.n_min}")
        if self.clause_ratio <= 0:
            raise ValueError("clause_ratio must be positive")

    def num_clauses(self, n: int) -> int:
        return max(1, round(self.clause_ratio * n))


def _draw_formula(n: int, m: int, k: int, rng: random.Random) -> Formula:
    clauses = []
    for _ in range(m):
        variables = rng.sample(range(1, n + 1), k)
        clauses.append(Clause(tuple(Literal(v, rng.random() < 0.5) for v in variables)))
    return Formula(n, tuple(clauses))


def generate_instance(n: int, m: int, k: int, seed: int) -> Formula:
    """Random satisfiable k-CNF with ``m`` clauses over ``n`` variables.

    Each clause has ``k`` distinct variables with random polarities, so no
    clause is tautological. Unsatisfiable draws are redrawn from the sub-seed
    ``"{seed}/{attempt}"``.
    """
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if m < 1:
        raise ValueError("need m >= 1")
    if n > GENERATION_MAX_VARS:
        raise ValueError(f"generation is limited to n <= {GENERATION_MAX_VARS}")
    for attempt in range(GENERATION_RETRIES):
        rng = random.Random(f"{seed}/{attempt}")
        f = _draw_formula(n, m, k, rng)
        if brute_force_sat(f) is not None:
            return f
    raise GenerationError(
        f"no satisfiable draw for n={n}, m={m}, k={k}, seed={seed} after {GENERATION_RETRIES} attempts"
    )


def generate_random_formula(n: int, m: int, k: int, seed: int) -> Formula:
    """Single unfiltered draw; may be unsatisfiable."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    return _draw_formula(n, m, k, random.Random(f"{seed}/0"))
