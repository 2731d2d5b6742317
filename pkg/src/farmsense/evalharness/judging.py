"""Jury scoring and grounding metrics.

The jury protocol scores each answer with every judge on four dimensions
(0-100), aggregates per-tier means across judges, and reports 95%
confidence intervals over run means using Student t with runs-1 degrees
of freedom. Mock judges are lexical so the whole suite is hermetic; the
judge interface admits remote model backends unchanged.

Grounding follows the relevance/faithfulness pair: faithfulness treats
each sentence as a claim and asks the judge whether some context supports
it (the mock judge approximates support as >= 60% content-word overlap);
relevance is topical overlap between query and answer.
"""

from __future__ import annotations

import json
import math
import re
import statistics
from dataclasses import dataclass, field

from scipy import stats as scipy_stats

from ..llm import Backend, ModelRequest, render_prompt
from .benchmark import TIERS, BenchmarkItem, EvalAnswer

DIMENSIONS = ("correctness", "coherence", "relevance", "conciseness")

_WORD_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_RE = re.compile(r"[.!?]+\s+|[.!?]+$|\n+")

STOPWORDS = frozenset(
    """a an and are as at be but by do does for from has have how i if in is it its
    me my of on or should so that the this to was we what when will with you your
    right now today""".split()
)


class JudgeUnavailable(RuntimeError):
    pass


class EmptyAnswer(ValueError):
    pass


def content_words(text: str) -> set[str]:
    return {w for w in _WORD_RE.findall(text.lower()) if w not in STOPWORDS}


def split_claims(text: str) -> list[str]:
    """Sentence-level claim units (deterministic approximation of claim
    extraction)."""
    parts = [p.strip() for p in _SENTENCE_RE.split(text) if p and p.strip()]
    return parts


# -- judges ----------------------------------------------------------------


class ConstantJudge:
    def __init__(self, value: float, name: str = "constant"):
        self.value = float(value)
        self.name = name

    def score(self, item: BenchmarkItem, answer: str) -> dict[str, float]:
        return {dim: self.value for dim in DIMENSIONS}


class LexicalJudge:
    """Deterministic model-free judge: correctness from expected-facet
    coverage, relevance from query overlap, coherence and conciseness
    from shallow shape heuristics. Weight knobs make the four shipped
    panel members disagree slightly, like distinct models would."""

    def __init__(self, name: str = "lexical", strictness: float = 1.0):
        self.name = name
        self.strictness = strictness

    def score(self, item: BenchmarkItem, answer: str) -> dict[str, float]:
        words = content_words(answer)
        facets = [f.lower() for f in item.expected_facets]
        covered = sum(1 for f in facets if f in answer.lower()) if facets else 0
        correctness = 100.0 * covered / len(facets) if facets else 50.0
        qwords = content_words(item.query)
        relevance = 100.0 * len(qwords & words) / len(qwords) if qwords else 50.0
        sentences = split_claims(answer)
        coherence = 100.0 if sentences and all(len(s.split()) >= 3 for s in sentences) else 60.0
        n_words = len(answer.split())
        conciseness = 100.0 if n_words <= 120 else max(40.0, 100.0 - (n_words - 120) * 0.5)
        return {
            "correctness": round(min(100.0, correctness * self.strictness), 4),
            "coherence": coherence,
            "relevance": round(min(100.0, relevance * (2.0 - self.strictness)), 4),
            "conciseness": conciseness,
        }


class RemoteJudge:
    def __init__(self, backend: Backend, name: str = "remote"):
        self.backend = backend
        self.name = name

    def score(self, item: BenchmarkItem, answer: str) -> dict[str, float]:
        request = render_prompt("judge", {"query": item.query, "answer": answer})
        try:
            raw = self.backend.complete(request)
            doc = json.loads(raw)
            return {dim: float(doc[dim]) for dim in DIMENSIONS}
        except Exception as exc:
            raise JudgeUnavailable(f"judge {self.name}: {exc}") from exc


def default_jury() -> list:
    """Four-member mock panel."""
    return [
        LexicalJudge("judge-a", strictness=1.0),
        LexicalJudge("judge-b", strictness=0.95),
        LexicalJudge("judge-c", strictness=1.05),
        LexicalJudge("judge-d", strictness=0.9),
    ]


# -- jury aggregation -----------------------------------------------------------


def ci_half_width(run_means: list[float], confidence: float = 0.95) -> float:
    """95% CI half-width over run means, Student t with df = runs - 1."""
    runs = len(run_means)
    if runs < 2:
        return 0.0
    spread = statistics.stdev(run_means)
    if spread == 0.0:
        return 0.0
    t_crit = float(scipy_stats.t.ppf(0.5 + confidence / 2.0, runs - 1))
    return t_crit * spread / math.sqrt(runs)


@dataclass
class CellStats:
    mean: float
    ci_half_width: float
    run_means: list[float]
    n_records: int


@dataclass
class JuryReport:
    runs: int
    cells: dict[tuple[str, str], CellStats]
    per_judge: dict[str, dict[tuple[str, str], float]]
    skipped: list[tuple[str, str, int, str]] = field(default_factory=list)
    tiers: tuple[str, ...] = TIERS
    dimensions: tuple[str, ...] = DIMENSIONS

    def records_per_dimension(self) -> int:
        return sum(stats.n_records for (_, dim), stats in self.cells.items() if dim == self.dimensions[0])


def run_suite(answer_fn, items: list[BenchmarkItem], judges: list, runs: int = 3) -> JuryReport:
    """Answer every item in every run and have every judge score it.

    Per-tier, per-dimension run means are averaged across runs and the
    95% CI computed over them. A judge failure marks (item, judge, run)
    skipped and drops just those records.
    """
    if not items or not judges or runs < 1:
        raise ValueError("need items, judges, and at least one run")
    # scores[run][(tier, dim)] -> list of records
    per_run: list[dict[tuple[str, str], list[float]]] = []
    per_judge_records: dict[str, dict[tuple[str, str], list[float]]] = {
        judge.name: {} for judge in judges
    }
    skipped = []
    for run in range(runs):
        bucket: dict[tuple[str, str], list[float]] = {}
        for item in items:
            answer = answer_fn(item)
            text = answer.text if isinstance(answer, EvalAnswer) else str(answer)
            for judge in judges:
                try:
                    scores = judge.score(item, text)
                except JudgeUnavailable as exc:
                    skipped.append((item.id, judge.name, run, str(exc)))
                    continue
                for dim in DIMENSIONS:
                    key = (item.tier, dim)
                    bucket.setdefault(key, []).append(scores[dim])
                    per_judge_records[judge.name].setdefault(key, []).append(scores[dim])
        per_run.append(bucket)

    cells: dict[tuple[str, str], CellStats] = {}
    for tier in TIERS:
        for dim in DIMENSIONS:
            key = (tier, dim)
            run_means = [
                statistics.fmean(bucket[key]) for bucket in per_run if bucket.get(key)
            ]
            records = sum(len(bucket.get(key, ())) for bucket in per_run)
            mean = statistics.fmean(run_means) if run_means else float("nan")
            cells[key] = CellStats(
                mean=mean,
                ci_half_width=ci_half_width(run_means),
                run_means=run_means,
                n_records=records,
            )
    per_judge = {
        name: {key: statistics.fmean(vals) for key, vals in records.items()}
        for name, records in per_judge_records.items()
    }
    return JuryReport(runs=runs, cells=cells, per_judge=per_judge, skipped=skipped)


# -- grounding (relevance / faithfulness) ----------------------------------------


@dataclass(frozen=True)
class GroundingScores:
    answer_relevance: float
    faithfulness: float


def score_faithfulness(answer: str, contexts: list[str], judge_backend: Backend | None = None) -> float:
    """Fraction of the answer's sentence-claims supported by some context.

    The mock judge counts a claim supported when at least 60% of its
    content words appear in one context; a model backend can replace that
    judgment via judge_backend.
    """
    if not answer.strip():
        raise EmptyAnswer("cannot score an empty answer")
    if not contexts:
        raise ValueError("faithfulness needs non-empty contexts")
    claims = split_claims(answer)
    if not claims:
        raise EmptyAnswer("no claims found in answer")
    context_word_sets = [content_words(c) for c in contexts]
    supported = 0
    for claim in claims:
        words = content_words(claim)
        if not words:
            supported += 1  # no factual content to dispute
            continue
        if judge_backend is not None:
            verdict = judge_backend.complete(
                ModelRequest(
                    stage="judge",
                    system_prompt="Answer yes or no: is the claim supported by the context?",
                    user_payload=f"claim: {claim}\ncontexts: {contexts}",
                )
            )
            if "yes" in verdict.lower():
                supported += 1
            continue
        best = max((len(words & cws) / len(words) for cws in context_word_sets), default=0.0)
        if best >= 0.60:
            supported += 1
    return supported / len(claims)


def score_relevance(answer: str, query: str, judge_backend: Backend | None = None) -> float:
    """Topical overlap between the query and the answer, in [0, 1]."""
    if not query.strip():
        raise ValueError("relevance needs a non-empty query")
    if not answer.strip():
        raise EmptyAnswer("cannot score an empty answer")
    qwords = content_words(query)
    if not qwords:
        return 1.0
    return len(qwords & content_words(answer)) / len(qwords)


@dataclass
class GroundingReport:
    per_tier: dict[str, GroundingScores]
    items: int


def grounding_suite(answer_fn, items: list[BenchmarkItem]) -> GroundingReport:
    per_tier_rel: dict[str, list[float]] = {tier: [] for tier in TIERS}
    per_tier_faith: dict[str, list[float]] = {tier: [] for tier in TIERS}
    for item in items:
        answer = answer_fn(item)
        contexts = answer.context_texts()
        relevance = score_relevance(answer.text, item.query)
        faith = score_faithfulness(answer.text, contexts) if contexts else 0.0
        per_tier_rel[item.tier].append(relevance)
        per_tier_faith[item.tier].append(faith)
    per_tier = {
        tier: GroundingScores(
            answer_relevance=statistics.fmean(per_tier_rel[tier]) if per_tier_rel[tier] else 0.0,
            faithfulness=statistics.fmean(per_tier_faith[tier]) if per_tier_faith[tier] else 0.0,
        )
        for tier in TIERS
    }
    return GroundingReport(per_tier=per_tier, items=len(items))
