"""The symbolic teacher: a witness-guided trace with one injected mistake.

Run: python demos/02_teacher_traces.py
"""
from sattrace import Formula, InjectionConfig, Mode, synthesize_trace
from sattrace.trace import serialize_trace

# (¬x3 ∨ x1) ∧ (x3)
f = Formula.from_ints(3, [[-3, 1], [3]])

# Force a wrong value at x3. The engine narrates the conflict, rolls back
# and re-proposes the value the witness holds.
res = synthesize_trace(f, InjectionConfig(forced_sites=(3,)), instance_id="demo")
print(serialize_trace(res.trace))
print("injected conflicts:", res.injected_conflicts)

# Chronological search instead of a witness: conflicts here are natural.
g = Formula.from_ints(3, [[-1, -2], [-1, 2], [1, 3], [-3, 2]])
search = synthesize_trace(g, InjectionConfig(mode=Mode.SEARCH))
print("search-mode conflicts:", search.natural_conflicts)
print("final:", {f"x{v}": b for v, b in search.trace.final_assignment.assigned()})
