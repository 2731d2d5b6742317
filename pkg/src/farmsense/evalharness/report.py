"""Report rendering (deterministic tables/CSV in the tier x dimension
layout) plus matplotlib figures saved next to the delimited output, and
end-to-end latency measurement."""

from __future__ import annotations

import io
import time
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .benchmark import TIERS, BenchmarkItem
from .judging import DIMENSIONS, GroundingReport, JuryReport


# -- latency ---------------------------------------------------------------


@dataclass
class LatencyReport:
    count: int
    mean_ms: float
    max_ms: float
    percentiles: dict[int, float]  # e.g. {50: ..., 95: ..., 99: ...}
    samples_ms: list[float]


def measure_latency(
    answer_fn, items: list[BenchmarkItem], percentiles: tuple[int, ...] = (50, 95, 99)
) -> LatencyReport:
    """Wall-clock time per answer call, run serially to avoid
    interference."""
    if not items:
        raise ValueError("cannot measure latency over an empty item list")
    samples = []
    for item in items:
        started = time.perf_counter()
        answer_fn(item)
        samples.append((time.perf_counter() - started) * 1000.0)
    values = np.asarray(samples)
    return LatencyReport(
        count=len(samples),
        mean_ms=float(values.mean()),
        max_ms=float(values.max()),
        percentiles={p: float(np.percentile(values, p)) for p in percentiles},
        samples_ms=samples,
    )


def render_latency_csv(report: LatencyReport) -> str:
    lines = ["metric,ms"]
    lines.append(f"mean,{report.mean_ms:.3f}")
    for p, value in sorted(report.percentiles.items()):
        lines.append(f"p{p},{value:.3f}")
    lines.append(f"max,{report.max_ms:.3f}")
    return "\n".join(lines) + "\n"


# -- jury / grounding tables ------------------------------------------------


def render_jury_csv(report: JuryReport) -> str:
    lines = ["tier,dimension,mean,ci_half_width,runs,records"]
    for tier in report.tiers:
        for dim in report.dimensions:
            stats = report.cells[(tier, dim)]
            lines.append(
                f"{tier},{dim},{stats.mean:.4f},{stats.ci_half_width:.4f},"
                f"{report.runs},{stats.n_records}"
            )
    return "\n".join(lines) + "\n"


def render_jury_table(report: JuryReport) -> str:
    width = 14
    header = "tier".ljust(8) + "".join(dim.ljust(width) for dim in report.dimensions)
    lines = [header, "-" * len(header)]
    for tier in report.tiers:
        row = tier.ljust(8)
        for dim in report.dimensions:
            stats = report.cells[(tier, dim)]
            row += f"{stats.mean:6.1f} ±{stats.ci_half_width:5.2f} ".ljust(width)
        lines.append(row)
    if report.skipped:
        lines.append(f"skipped: {len(report.skipped)} judge calls")
    return "\n".join(lines) + "\n"


def render_grounding_csv(report: GroundingReport) -> str:
    lines = ["tier,answer_relevance,faithfulness"]
    for tier in TIERS:
        scores = report.per_tier[tier]
        lines.append(f"{tier},{scores.answer_relevance:.4f},{scores.faithfulness:.4f}")
    return "\n".join(lines) + "\n"


def render_grounding_table(report: GroundingReport) -> str:
    lines = ["tier      relevance  faithfulness", "-" * 34]
    for tier in TIERS:
        scores = report.per_tier[tier]
        lines.append(f"{tier:<9} {scores.answer_relevance:9.3f} {scores.faithfulness:12.3f}")
    return "\n".join(lines) + "\n"


def render_report(report: JuryReport | GroundingReport, format: str = "table") -> str:
    """Render either report type in the tier x dimension layout."""
    renderers = {
        (JuryReport, "table"): render_jury_table,
        (JuryReport, "csv"): render_jury_csv,
        (GroundingReport, "table"): render_grounding_table,
        (GroundingReport, "csv"): render_grounding_csv,
    }
    try:
        return renderers[(type(report), format)](report)
    except KeyError:
        raise ValueError(f"cannot render {type(report).__name__} as {format!r}") from None


# -- figures -----------------------------------------------------------------


def save_jury_figure(report: JuryReport, path: str | Path) -> None:
    """Grouped bars per tier and dimension with 95% CI error bars."""
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(report.tiers))
    width = 0.8 / len(report.dimensions)
    for i, dim in enumerate(report.dimensions):
        means = [report.cells[(tier, dim)].mean for tier in report.tiers]
        errs = [report.cells[(tier, dim)].ci_half_width for tier in report.tiers]
        ax.bar(x + i * width, means, width, yerr=errs, capsize=3, label=dim)
    ax.set_xticks(x + width * (len(report.dimensions) - 1) / 2)
    ax.set_xticklabels(report.tiers)
    ax.set_ylabel("score (0-100)")
    ax.set_ylim(0, 105)
    ax.set_title(f"Jury scores by tier ({report.runs} runs, 95% CI)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_grounding_figure(report: GroundingReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(TIERS))
    rel = [report.per_tier[t].answer_relevance for t in TIERS]
    faith = [report.per_tier[t].faithfulness for t in TIERS]
    ax.bar(x - 0.18, rel, 0.36, label="answer relevance")
    ax.bar(x + 0.18, faith, 0.36, label="faithfulness")
    ax.set_xticks(x)
    ax.set_xticklabels(TIERS)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title(f"Grounding scores by tier ({report.items} items)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_latency_figure(report: LatencyReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(report.samples_ms, bins=30, color="tab:blue", alpha=0.8)
    for p, value in sorted(report.percentiles.items()):
        ax.axvline(value, linestyle="--", linewidth=1, color="tab:red")
        ax.text(value, ax.get_ylim()[1] * 0.9, f"p{p}", rotation=90, fontsize=7)
    ax.set_xlabel("end-to-end latency (ms)")
    ax.set_ylabel("answers")
    ax.set_title(f"Latency over {report.count} answers")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
