"""Dataset records and prompt rendering."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Iterator, List

from .cnf import Formula

TREATMENT = "treatment"
CONTROL = "control"


@dataclass(frozen=True)
class DatasetRecord:
    """One training example. Field order is the on-disk key order."""

    id: str
    dimacs: str
    prompt: str
    completion: str
    condition: str
    verified: bool
    token_count: int
    conflict_count: int

    def __post_init__(self):
        if self.condition not in (TREATMENT, CONTROL):
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.condition == CONTROL and self.conflict_count:
            raise ValueError("control records cannot contain conflicts")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        raw = json.loads(line)
        names = [f.name for f in fields(cls)]
        missing = [n for n in names if n not in raw]
        if missing:
            raise ValueError(f"record is missing {missing}")
        return cls(**{n: raw[n] for n in names})


def render_prompt(f: Formula) -> str:
    lines = [
        f"Find a True/False assignment to the variables x1..x{f.num_vars} "
        f"that satisfies every constraint below.",
    ]
    lines.extend(f"Constraint {i}: {c}" for i, c in enumerate(f.clauses, start=1))
    return "\n".join(lines) + "\n"


def write_records(records: Iterable[DatasetRecord]) -> str:
    return "".join(r.to_json() + "\n" for r in records)


def read_records(text: str) -> List[DatasetRecord]:
    return [DatasetRecord.from_json(line) for line in text.splitlines() if line.strip()]


def iter_jsonl(text: str) -> Iterator[dict]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
