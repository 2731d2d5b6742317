"""Evaluation harness: tiered benchmark, multi-judge jury scoring with
confidence intervals, grounding (relevance/faithfulness) scores, and
latency measurement with table/CSV/figure reports."""

from .benchmark import (
    CROPS,
    ITEMS_PER_CELL,
    TIERS,
    TOTAL_ITEMS,
    Answerer,
    BenchmarkItem,
    EvalAnswer,
    ShapeError,
    default_benchmark_path,
    generate_benchmark,
    load_benchmark,
    write_benchmark,
)
from .judging import (
    DIMENSIONS,
    CellStats,
    ConstantJudge,
    EmptyAnswer,
    GroundingReport,
    GroundingScores,
    JudgeUnavailable,
    JuryReport,
    LexicalJudge,
    RemoteJudge,
    ci_half_width,
    default_jury,
    grounding_suite,
    run_suite,
    score_faithfulness,
    score_relevance,
)
from .report import (
    LatencyReport,
    measure_latency,
    render_grounding_csv,
    render_grounding_table,
    render_jury_csv,
    render_jury_table,
    render_latency_csv,
    render_report,
    save_grounding_figure,
    save_jury_figure,
    save_latency_figure,
)

__all__ = [
    "Answerer",
    "BenchmarkItem",
    "CROPS",
    "CellStats",
    "ConstantJudge",
    "DIMENSIONS",
    "EmptyAnswer",
    "EvalAnswer",
    "GroundingReport",
    "GroundingScores",
    "ITEMS_PER_CELL",
    "JudgeUnavailable",
    "JuryReport",
    "LatencyReport",
    "LexicalJudge",
    "RemoteJudge",
    "ShapeError",
    "TIERS",
    "TOTAL_ITEMS",
    "ci_half_width",
    "default_benchmark_path",
    "default_jury",
    "generate_benchmark",
    "grounding_suite",
    "load_benchmark",
    "measure_latency",
    "render_grounding_csv",
    "render_grounding_table",
    "render_jury_csv",
    "render_jury_table",
    "render_latency_csv",
    "render_report",
    "run_suite",
    "save_grounding_figure",
    "save_jury_figure",
    "save_latency_figure",
    "score_faithfulness",
    "score_relevance",
    "write_benchmark",
]
