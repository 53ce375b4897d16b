"""Turning a trace with a repaired mistake into its monotonic control twin.

Run: python demos/04_linearization.py
"""
from sattrace import InjectionConfig, build_matched_pair, generate_instance, linearize, linearize_text, synthesize_trace
from sattrace.linearize import linearizations_agree
from sattrace.trace import serialize_trace

f = generate_instance(6, 18, 3, seed=7)
for site in range(1, 7):
    res = synthesize_trace(f, InjectionConfig(forced_sites=(site,)), instance_id="pair")
    if res.injected_conflicts:
        break
t = res.trace

control = linearize(t)
print("\n".join(serialize_trace(control).split("\n")[:8]), "\n   ...")

treatment, ctrl = build_matched_pair(t)
print(f"tokens: treatment {treatment.token_count}, control {ctrl.token_count}")

# The line filter only drops text from the conflict marker onward, so the
# wrong proposal that caused it survives. The event-level version removes it.
text_level = linearize_text(serialize_trace(t).split("\n"))
print("line filter keeps", len(text_level), "lines; event and line level agree:", linearizations_agree(t))
