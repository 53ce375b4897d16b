"""End-to-end corpus pipeline: generate, synthesize + verify, export, analyze.

Every random choice derives from the single root seed in :class:`RunConfig`
via :func:`derive_seed`, so one config reproduces the whole output tree
byte for byte.

Output layout under ``out``::

    instances/manifest.jsonl, instances/<id>.cnf
    traces/<id>.trace, traces/synthesis.jsonl, synthesis_report.txt
    dataset/{treatment,control}_{train,heldout}.jsonl
"""
from __future__ import annotations

import hashlib
import json
import os
import random
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .analyze import CorpusMetrics, DetectionResult, compute_ber, detect_backtracking
from .cnf import Formula, GenerationParams, generate_instance, parse_dimacs, serialize_dimacs
from .dataset import CONTROL, TREATMENT, iter_jsonl, read_records, write_records
from .linearize import build_matched_pair
from .teacher import InjectionConfig, SynthesisResult, synthesize_trace
from .trace import Trace, parse_trace, serialize_trace
from .verify import audit_trace, filter_golden

REFERENCE_PASS_RATE = 0.992  # LLM-teacher pass rate the engine is compared against


class ConfigError(ValueError):
    pass


class PassRateError(RuntimeError):
    pass


def derive_seed(root: int, stage: str, index: int = 0) -> int:
    """64-bit seed for (stage, index): first 8 bytes of sha256("root:stage:index")."""
    digest = hashlib.sha256(f"{root}:{stage}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class RunConfig:
    seed: int = 0
    count: int = 500
    out: str = "run"
    generation: GenerationParams = field(default_factory=GenerationParams)
    injection: InjectionConfig = field(default_factory=InjectionConfig)
    train_fraction: float = 0.92
    heldout_fraction: float = 0.08
    min_pass_rate: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if min(self.train_fraction, self.heldout_fraction) < 0 or \
                abs(self.train_fraction + self.heldout_fraction - 1.0) > 1e-9:
            raise ConfigError("train_fraction and heldout_fraction must be non-negative and sum to 1")
        if not 0.0 <= self.min_pass_rate <= 1.0:
            raise ConfigError("min_pass_rate must lie in [0, 1]")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        try:
            gen = GenerationParams(**raw.pop("generation", {}))
            inj = raw.pop("injection", {})
            inj.pop("seed", None)
            inj = InjectionConfig(**inj)
            split = raw.pop("split", None)
            if split is not None:
                raw["train_fraction"] = split.get("train", 0.0)
                raw["heldout_fraction"] = split.get("heldout", 0.0)
            return cls(generation=gen, injection=inj, **raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: os.PathLike) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        inj = asdict(self.injection)
        inj.pop("seed")
        inj["mode"] = self.injection.mode.value
        inj["forced_sites"] = list(self.injection.forced_sites)
        return {
            "seed": self.seed,
            "count": self.count,
            "out": self.out,
            "generation": asdict(self.generation),
            "injection": inj,
            "split": {"train": self.train_fraction, "heldout": self.heldout_fraction},
            "min_pass_rate": self.min_pass_rate,
            "strict": self.strict,
        }


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_report(pairs: Sequence[Tuple[str, object]]) -> str:
    """Flat ``key = value`` text, one pair per line."""
    lines = []
    for key, value in pairs:
        if value is None:
            value = "none"
        elif isinstance(value, bool):
            value = str(value).lower()
        elif isinstance(value, float):
            value = f"{value:.6f}"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def instance_id(i: int) -> str:
    return f"inst-{i:05d}"


# generate


def generate_corpus(cfg: RunConfig) -> List[Tuple[str, Formula, dict]]:
    gen = cfg.generation
    out = []
    for i in range(cfg.count):
        n = random.Random(derive_seed(cfg.seed, "size", i)).randint(gen.n_min, gen.n_max)
        m = gen.num_clauses(n)
        seed = derive_seed(cfg.seed, "instance", i)
        f = generate_instance(n, m, gen.k, seed)
        iid = instance_id(i)
        out.append((iid, f, {"id": iid, "file": f"{iid}.cnf", "seed": seed, "n": n, "m": m, "k": gen.k}))
    return out


def cmd_generate(cfg: RunConfig) -> Path:
    corpus = generate_corpus(cfg)
    inst_dir = Path(cfg.out) / "instances"
    for iid, f, meta in corpus:
        write_atomic(inst_dir / meta["file"], serialize_dimacs(f))
    manifest = "".join(json.dumps(meta) + "\n" for _, _, meta in corpus)
    write_atomic(inst_dir / "manifest.jsonl", manifest)
    write_atomic(Path(cfg.out) / "config.json", json.dumps(cfg.to_dict(), indent=2) + "\n")
    return inst_dir


def load_instances(inst_dir: os.PathLike) -> Dict[str, Formula]:
    inst_dir = Path(inst_dir)
    manifest = inst_dir / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no instance manifest at {manifest}")
    out: Dict[str, Formula] = {}
    for meta in iter_jsonl(manifest.read_text(encoding="utf-8")):
        out[meta["id"]] = parse_dimacs((inst_dir / meta["file"]).read_text(encoding="utf-8"))
    if not out:
        raise ConfigError(f"{inst_dir} contains no instances")
    return out


# synthesize + verify


@dataclass
class SynthesisSummary:
    attempts: int
    golden_ids: List[str]
    rejected: Dict[str, str]
    pass_rate: Optional[float]
    traces_with_injected_conflict: int
    injected_conflicts: int
    natural_conflicts: int
    abandoned_injections: int

    @property
    def injected_fraction(self) -> float:
        return self.traces_with_injected_conflict / self.attempts if self.attempts else 0.0

    def report(self) -> str:
        return format_report([
            ("attempts", self.attempts),
            ("golden", len(self.golden_ids)),
            ("rejected", len(self.rejected)),
            ("pass_rate", self.pass_rate),
            ("reference_pass_rate", REFERENCE_PASS_RATE),
            ("traces_with_injected_conflict", self.traces_with_injected_conflict),
            ("injected_conflict_fraction", self.injected_fraction),
            ("injected_conflicts", self.injected_conflicts),
            ("natural_conflicts", self.natural_conflicts),
            ("abandoned_injections", self.abandoned_injections),
        ])


def synthesize_corpus(instances: Dict[str, Formula], cfg: RunConfig) -> Tuple[List[SynthesisResult], SynthesisSummary]:
    ids = sorted(instances)
    results = []
    for i, iid in enumerate(ids):
        inj = replace(cfg.injection, seed=derive_seed(cfg.seed, "inject", i))
        results.append(synthesize_trace(instances[iid], inj, instance_id=iid))
    split = filter_golden((r.trace.formula, r.trace) for r in results)
    rejected = {t.instance_id if isinstance(t, Trace) else "?": v.value for _, t, v in split.rejected}
    summary = SynthesisSummary(
        attempts=len(results),
        golden_ids=[t.instance_id for _, t in split.golden],
        rejected=rejected,
        pass_rate=split.pass_rate,
        traces_with_injected_conflict=sum(r.injected_conflicts > 0 for r in results),
        injected_conflicts=sum(r.injected_conflicts for r in results),
        natural_conflicts=sum(r.natural_conflicts for r in results),
        abandoned_injections=sum(r.abandoned_injections for r in results),
    )
    return results, summary


def cmd_synthesize(cfg: RunConfig, instances_dir: Optional[os.PathLike] = None) -> SynthesisSummary:
    out = Path(cfg.out)
    instances = load_instances(instances_dir or out / "instances")
    results, summary = synthesize_corpus(instances, cfg)
    trace_dir = out / "traces"
    golden = set(summary.golden_ids)
    records = []
    for r in results:
        text = serialize_trace(r.trace)
        if cfg.strict:
            parse_trace(text, r.trace.formula, strict=True)
        audit = audit_trace(r.trace)
        if r.trace.instance_id in golden:
            write_atomic(trace_dir / f"{r.trace.instance_id}.trace", text)
        records.append({
            "id": r.trace.instance_id,
            "golden": r.trace.instance_id in golden,
            "injected_conflicts": r.injected_conflicts,
            "natural_conflicts": r.natural_conflicts,
            "abandoned_injections": r.abandoned_injections,
            "audit": audit.to_record(),
        })
    write_atomic(trace_dir / "synthesis.jsonl", "".join(json.dumps(rec) + "\n" for rec in records))
    write_atomic(out / "synthesis_report.txt", summary.report())
    if summary.pass_rate is None or summary.pass_rate < cfg.min_pass_rate:
        raise PassRateError(f"pass rate {summary.pass_rate} is below the floor {cfg.min_pass_rate}")
    return summary


# export


def split_ids(ids: Sequence[str], cfg: RunConfig) -> Tuple[List[str], List[str]]:
    shuffled = sorted(ids)
    random.Random(derive_seed(cfg.seed, "split")).shuffle(shuffled)
    n_held = round(cfg.heldout_fraction * len(shuffled))
    return sorted(shuffled[n_held:]), sorted(shuffled[:n_held])


def load_golden(cfg: RunConfig) -> List[Trace]:
    out = Path(cfg.out)
    instances = load_instances(out / "instances")
    trace_dir = out / "traces"
    summary = trace_dir / "synthesis.jsonl"
    if not summary.exists():
        raise FileNotFoundError(f"no synthesized corpus at {trace_dir}; run 'synthesize' first")
    traces = []
    for rec in iter_jsonl(summary.read_text(encoding="utf-8")):
        if rec["golden"]:
            iid = rec["id"]
            text = (trace_dir / f"{iid}.trace").read_text(encoding="utf-8")
            traces.append(parse_trace(text, instances[iid], strict=True, instance_id=iid))
    return traces


def cmd_export(cfg: RunConfig) -> Dict[str, int]:
    traces = load_golden(cfg)
    pairs = {t.instance_id: build_matched_pair(t) for t in traces}
    train, held = split_ids(list(pairs), cfg)
    data_dir = Path(cfg.out) / "dataset"
    counts = {}
    for split_name, ids in (("train", train), ("heldout", held)):
        for pos, condition in enumerate((TREATMENT, CONTROL)):
            name = f"{condition}_{split_name}"
            write_atomic(data_dir / f"{name}.jsonl", write_records(pairs[i][pos] for i in ids))
            counts[name] = len(ids)
    return counts


def run_pipeline(cfg: RunConfig) -> SynthesisSummary:
    cmd_generate(cfg)
    summary = cmd_synthesize(cfg)
    cmd_export(cfg)
    return summary


# analyze


def load_responses(path: os.PathLike) -> List[dict]:
    """Response records: ``id`` plus ``response`` (or a dataset record's
    ``completion``), optionally with the instance inlined as ``dimacs``."""
    out = []
    for rec in iter_jsonl(Path(path).read_text(encoding="utf-8")):
        if "id" not in rec:
            raise ConfigError("response record without an 'id'")
        text = rec.get("response", rec.get("completion"))
        if text is None:
            raise ConfigError(f"response record {rec['id']!r} has neither 'response' nor 'completion'")
        out.append({"id": rec["id"], "response": text, "dimacs": rec.get("dimacs")})
    return out


def analyze_responses(responses: Sequence[dict], instances: Optional[Dict[str, Formula]] = None,
                      strict: bool = False) -> Tuple[List[Tuple[str, DetectionResult]], CorpusMetrics]:
    ids = [r["id"] for r in responses]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigError(f"duplicate response ids: {', '.join(dupes)}")
    if instances is not None:
        no_instance = sorted(i for i in ids if i not in instances)
        no_response = sorted(i for i in instances if i not in set(ids))
        if no_instance or no_response:
            parts = []
            if no_instance:
                parts.append(f"responses without an instance: {', '.join(no_instance)}")
            if no_response:
                parts.append(f"instances without a response: {', '.join(no_response)}")
            raise ConfigError("; ".join(parts))
    results = []
    for rec in responses:
        if rec.get("dimacs"):
            f = parse_dimacs(rec["dimacs"])
        elif instances is not None:
            f = instances[rec["id"]]
        else:
            raise ConfigError(f"no instance available for response {rec['id']!r}")
        if strict:
            parse_trace(rec["response"], f, strict=True, instance_id=rec["id"])
        results.append((rec["id"], detect_backtracking(rec["response"], f)))
    return results, compute_ber([r for _, r in results])


def metrics_report(metrics: CorpusMetrics) -> str:
    return format_report([
        ("n", metrics.n),
        ("backtracking_events", metrics.backtracking_events),
        ("ber", metrics.ber),
        ("conflict_precision", metrics.conflict_precision),
        ("correctness_rate", metrics.correctness_rate),
    ])


def cmd_analyze(responses_path: os.PathLike, instances_dir: Optional[os.PathLike] = None,
                out: Optional[os.PathLike] = None, strict: bool = False) -> CorpusMetrics:
    responses = load_responses(responses_path)
    instances = load_instances(instances_dir) if instances_dir is not None else None
    results, metrics = analyze_responses(responses, instances, strict=strict)
    if out is not None:
        out = Path(out)
        write_atomic(out / "detections.jsonl",
                     "".join(json.dumps({"id": iid, **r.to_record()}) + "\n" for iid, r in results))
        write_atomic(out / "metrics.txt", metrics_report(metrics))
    return metrics


# stats


def corpus_stats(data_dir: os.PathLike) -> List[Tuple[str, object]]:
    data_dir = Path(data_dir)
    rows: List[Tuple[str, object]] = []
    for split_name in ("train", "heldout"):
        files = {c: data_dir / f"{c}_{split_name}.jsonl" for c in (TREATMENT, CONTROL)}
        if not all(p.exists() for p in files.values()):
            continue
        recs = {c: read_records(p.read_text(encoding="utf-8")) for c, p in files.items()}
        tr, co = recs[TREATMENT], recs[CONTROL]
        tr_tokens = sum(r.token_count for r in tr)
        co_tokens = sum(r.token_count for r in co)
        rows += [
            (f"{split_name}.records", len(tr)),
            (f"{split_name}.ids_match", [r.id for r in tr] == [r.id for r in co]),
            (f"{split_name}.treatment_tokens", tr_tokens),
            (f"{split_name}.control_tokens", co_tokens),
            (f"{split_name}.control_to_treatment_token_ratio", co_tokens / tr_tokens if tr_tokens else None),
            (f"{split_name}.treatment_conflicts", sum(r.conflict_count for r in tr)),
            (f"{split_name}.treatment_with_conflict", sum(r.conflict_count > 0 for r in tr)),
            (f"{split_name}.control_conflicts", sum(r.conflict_count for r in co)),
        ]
    if not rows:
        raise FileNotFoundError(f"no dataset files under {data_dir}")
    return rows
