"""Regenerate the bundled 40-response BER fixtures.

    python tools/build_ber_fixtures.py

Writes src/sattrace/data/fixtures/ber40/: an instance directory plus two
response files in the analyzer's input format. responses_control.jsonl has
40 monotonic responses; responses_treatment.jsonl has 2 responses with a
conflict followed by an explicit revision and 38 without one (several of
them decoys that trip only part of the heuristic).
"""
import json
from pathlib import Path

from sattrace.cnf import brute_force_sat, serialize_dimacs
from sattrace.linearize import linearize
from sattrace.pipeline import RunConfig, generate_corpus, write_atomic
from sattrace.teacher import InjectionConfig, _conflict_distance, synthesize_trace
from sattrace.cnf import Assignment
from sattrace.trace import serialize_trace

OUT = Path(__file__).resolve().parents[1] / "src" / "sattrace" / "data" / "fixtures" / "ber40"
PREAMBLE = "Let me work through the constraints one variable at a time.\n\n"
CLOSING = "\nAll constraints are satisfied by this assignment.\n"


def injectable_site(f, window=3):
    w = brute_force_sat(f)
    for v in range(1, f.num_vars + 1):
        a = Assignment(f.num_vars, {u: w[u] for u in range(1, v)})
        d = _conflict_distance(f, a, w, v)
        if d is not None and d <= window:
            return v
    return None


def monotonic(f, iid):
    res = synthesize_trace(f, InjectionConfig(injection_probability=0.0, max_injections=0), iid)
    return serialize_trace(linearize(res.trace))


def conflict_without_change(text):
    # a conflict is announced and "resolved" without changing any value
    lines = text.split("\n")
    at = next(i for i, l in enumerate(lines) if l.strip() == "Verifying against constraints...")
    lines[at + 1:at + 1] = ["   [CONFLICT] Constraint violation detected.",
                           "   Backtracking...", "   On reflection the current values are fine; keeping them."]
    return "\n".join(lines)


def flip_without_phrase(f, iid):
    # the value changes after the token but no backtracking phrase is used
    site = injectable_site(f)
    res = synthesize_trace(f, InjectionConfig(forced_sites=(site,)), iid)
    text = serialize_trace(res.trace)
    return text.replace("Backtracking...", "Let me try the other value.").replace(
        "Reverting assignment", "Dropping")


def main():
    corpus = generate_corpus(RunConfig(seed=4040, count=40))
    inst_dir = OUT / "instances"
    manifest = []
    control, treatment = [], []
    for i, (iid, f, meta) in enumerate(corpus):
        write_atomic(inst_dir / meta["file"], serialize_dimacs(f))
        manifest.append(json.dumps(meta))
        mono = monotonic(f, iid)
        control.append({"id": iid, "response": (PREAMBLE + mono + CLOSING) if i % 3 == 0 else mono})

        if i in (5, 22):
            site = injectable_site(f)
            res = synthesize_trace(f, InjectionConfig(forced_sites=(site,)), iid)
            assert res.injected_conflicts == 1
            resp = PREAMBLE + serialize_trace(res.trace) + CLOSING
        elif i in (8, 17, 30):
            resp = conflict_without_change(mono)
        elif i in (11, 26):
            resp = mono.replace("1. Initial State:", "Backtracking is allowed if needed.\n\n1. Initial State:")
        elif i in (14, 35):
            resp = flip_without_phrase(f, iid)
        elif i == 39:
            resp = "I believe this formula is satisfiable, but I could not finish the search."
        else:
            resp = mono if i % 2 else PREAMBLE + mono
        treatment.append({"id": iid, "response": resp})
    write_atomic(inst_dir / "manifest.jsonl", "\n".join(manifest) + "\n")
    for name, rows in (("control", control), ("treatment", treatment)):
        write_atomic(OUT / f"responses_{name}.jsonl",
                     "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows))


if __name__ == "__main__":
    main()
