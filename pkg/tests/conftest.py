import itertools
import sys

import pytest
from hypothesis import strategies as st

from sattrace.cnf import Assignment, Formula


def oracle_models(f_ints, n):
    """Every satisfying total assignment, by plain enumeration over lists of ints."""
    out = []
    for bits in itertools.product([False, True], repeat=n):
        if all(any(bits[abs(l) - 1] == (l > 0) for l in clause) for clause in f_ints):
            out.append(bits)
    return out


def oracle_satisfies(f_ints, values):
    return all(any(values[abs(l)] == (l > 0) for l in clause) for clause in f_ints)


@st.composite
def formulas(draw, max_vars=6, max_clauses=8, max_width=4):
    n = draw(st.integers(1, max_vars))
    m = draw(st.integers(1, max_clauses))
    clauses = []
    for _ in range(m):
        width = draw(st.integers(1, min(max_width, n)))
        variables = draw(st.lists(st.integers(1, n), min_size=width, max_size=width, unique=True))
        signs = draw(st.lists(st.booleans(), min_size=width, max_size=width))
        clauses.append([v if s else -v for v, s in zip(variables, signs)])
    return Formula.from_ints(n, clauses)


@st.composite
def partial_assignments(draw, n):
    values = draw(st.lists(st.sampled_from([None, False, True]), min_size=n, max_size=n))
    return Assignment(n, {i + 1: v for i, v in enumerate(values)})


@pytest.fixture
def small_formula():
    # (¬x3 ∨ x1) ∧ (x3)
    return Formula.from_ints(3, [[-3, 1], [3]])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(k, ok, detail))
