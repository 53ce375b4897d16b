"""Random satisfiable 3-SAT instances and their DIMACS form.

Run: python demos/01_instances_and_dimacs.py
"""
from sattrace import brute_force_sat, generate_instance, parse_dimacs, serialize_dimacs
from sattrace.cnf import generate_random_formula

# A 6-variable instance at clause ratio 3. Unsatisfiable draws are redrawn,
# so whatever comes back has a model.
f = generate_instance(n=6, m=18, k=3, seed=42)
text = serialize_dimacs(f)
print(text)

# DIMACS round-trips exactly.
assert parse_dimacs(text) == f

# Brute force returns the lexicographically smallest model (False before True).
model = brute_force_sat(f)
print("first model:", {f"x{v}": b for v, b in model.assigned()})

# Without the filter, draws near the threshold are often unsatisfiable.
draws = [generate_random_formula(8, 36, 3, seed=s) for s in range(50)]
unsat = sum(brute_force_sat(g) is None for g in draws)
print(f"{unsat}/50 unfiltered draws at ratio 4.5 are unsatisfiable")
