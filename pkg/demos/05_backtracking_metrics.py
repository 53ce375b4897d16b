"""Measuring backtracking behaviour in model responses.

Run: python demos/05_backtracking_metrics.py
"""
from pathlib import Path

import sattrace
from sattrace.analyze import compute_ber, detect_backtracking
from sattrace.cnf import Formula
from sattrace.pipeline import analyze_responses, load_instances, load_responses

f = Formula.from_ints(3, [[-3, 1], [3]])
response = """Assign x3 = False.
Constraint 2 violated.
[CONFLICT] Constraint violation detected.
Backtracking... Reverting assignment x3 = False.
Assign x3 = True. Assign x1 = True. Assign x2 = False.
Final Assignment: {x1: True, x2: False, x3: True}"""
r = detect_backtracking(response, f)
print("backtracking event:", r.backtracking_event, "| flips:", r.flips, "| correct:", r.sat_correct)

# A conflict that is announced but changes nothing is not an event.
fake = "Assign x1 = True.\n[CONFLICT]\nBacktracking... no, all good.\nAssign x3 = True."
print("no-change conflict is an event:", detect_backtracking(fake, f).backtracking_event)
print("BER over both:", compute_ber([r, detect_backtracking(fake, f)]).ber)

# The bundled 40-response fixtures.
fixtures = Path(sattrace.__file__).parent / "data" / "fixtures" / "ber40"
instances = load_instances(fixtures / "instances")
for name in ("control", "treatment"):
    _, m = analyze_responses(load_responses(fixtures / f"responses_{name}.jsonl"), instances)
    print(f"{name}: {m.backtracking_events}/{m.n} -> BER {m.ber:.3f}, conflict precision {m.conflict_precision}")
