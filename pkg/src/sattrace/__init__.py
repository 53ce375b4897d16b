"""Synthesis and analysis of backtracking-rich SAT reasoning traces."""

from .analyze import (
    CorpusMetrics,
    DetectionResult,
    check_correctness,
    compute_ber,
    conflict_precision,
    detect_backtracking,
)
from .cnf import (
    Assignment,
    Clause,
    ClauseStatus,
    Formula,
    GenerationParams,
    Literal,
    brute_force_sat,
    detect_conflict,
    evaluate_clause,
    evaluate_formula,
    generate_instance,
    parse_dimacs,
    serialize_dimacs,
)
from .dataset import DatasetRecord, render_prompt
from .linearize import build_matched_pair, linearize, linearize_text
from .teacher import InjectionConfig, Mode, SynthesisResult, synthesize_trace
from .trace import (
    Backtrack,
    Conflict,
    Decide,
    Final,
    Trace,
    Verify,
    parse_trace,
    proxy_token_count,
    replay,
    serialize_trace,
)
from .verify import audit_trace, filter_golden, verify_final

__version__ = "0.1.0"
