"""Context enrichment and reply synthesis with the grounding contract:
a reply may only use numbers that trace back to gathered inputs, and it
carries citations for everything it consumed."""

from __future__ import annotations

import logging
import re

from ..crops import CropBandBook, UnknownCrop
from ..datastore import Store
from ..feeds import FeedsProvider, ProviderUnavailable
from ..knowledge import KnowledgeBase, UnknownPassage
from ..llm import Backend, render_prompt
from ..telemetry import MetricKind
from .types import (
    AdvisoryReply,
    Citation,
    DataRequirement,
    DatastoreUnavailable,
    EnrichedContext,
    GatheredSeries,
    GroundingViolation,
    describe_forecast,
    describe_prices,
    describe_series,
    fmt_value,
)

logger = logging.getLogger(__name__)

RETRIEVAL_K = 4
#: Duration words a reply may use freely (day counts, common windows).
_FREE_NUMBERS = {float(n) for n in (*range(0, 15), 24, 48, 72)}
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


def enrich(
    requirement: DataRequirement,
    profile,
    question: str,
    store: Store,
    feeds: FeedsProvider,
    kb: KnowledgeBase,
    now: float,
    history=None,
    skip_feed_failures: bool = False,
) -> EnrichedContext:
    """Gather every input the requirement declares. Missing optional data
    is recorded as a note, not an error; feed failures raise
    ProviderUnavailable unless the caller asks to degrade."""
    crop = profile.crops[0]
    ctx = EnrichedContext(
        requirement=requirement,
        profile=profile,
        question=question,
        crop=crop,
        growth_stage=profile.growth_stage or "vegetative",
        gathered_at=now,
    )
    try:
        ctx.history = history if history is not None else store.recent_chat(
            profile.farm_id, days=7, now=now
        )
        for metric_request in requirement.metrics:
            span = metric_request.window_seconds()
            if span is None:
                point = store.latest_point(profile.farm_id, metric_request.kind)
                points = [point] if point else []
            else:
                points = store.window(profile.farm_id, metric_request.kind, now - span, now + 1e-6)
            if not points:
                ctx.notes.append(f"no {metric_request.kind.value} readings in {metric_request.window}")
            ctx.series.append(GatheredSeries(metric_request, points))
    except OSError as exc:
        raise DatastoreUnavailable(str(exc)) from exc

    if requirement.forecast_days > 0:
        try:
            ctx.forecast = feeds.get_forecast(profile.location, requirement.forecast_days)
        except ProviderUnavailable:
            if not skip_feed_failures:
                raise
            ctx.forecast_unavailable = True
            ctx.notes.append("forecast unavailable")
    if requirement.needs_market:
        try:
            ctx.prices = feeds.get_prices(crop, 7)
            if not ctx.prices.points:
                ctx.notes.append(f"no price data for {crop}")
        except ProviderUnavailable:
            if not skip_feed_failures:
                raise
            ctx.notes.append("market prices unavailable")
    if requirement.kb_query:
        ctx.passages = [
            (passage, kb.cite(passage)) for passage, _ in kb.search(requirement.kb_query, k=RETRIEVAL_K)
        ]
    return ctx


def build_inputs_summary(ctx: EnrichedContext) -> str:
    lines: list[str] = []
    for series in ctx.series:
        if series.points:
            lines.append(describe_series(series))
    if ctx.forecast is not None:
        lines.append(describe_forecast(ctx.forecast))
    elif ctx.forecast_unavailable:
        lines.append("The weather forecast is unavailable right now.")
    if ctx.prices is not None and ctx.prices.points:
        lines.append(describe_prices(ctx.prices))
    for note in ctx.notes:
        if note.startswith("no "):
            lines.append(f"Note: {note}.")
    if not lines:
        lines.append("No live farm data was needed for this question.")
    return " ".join(lines)


def synthesis_variables(ctx: EnrichedContext, bands: CropBandBook | None = None) -> dict:
    """Flatten the context into the string variables the prompt template
    and the mock's response templates draw from."""
    variables: dict[str, object] = {
        "crop": ctx.crop,
        "stage": ctx.growth_stage,
        "location": f"{ctx.profile.location[0]:.1f},{ctx.profile.location[1]:.1f}",
        "question": ctx.question,
        "kb_query": ctx.requirement.kb_query or "",
        "inputs_summary": build_inputs_summary(ctx),
        "history_block": "\n".join(
            f"{c.direction}: {c.body}" for c in ctx.history[-6:]
        ) or "(no recent conversation)",
        "passages": [(citation, passage.text) for passage, citation in ctx.passages],
        "passage_note": (
            "See: " + "; ".join(citation for _, citation in ctx.passages) + "."
            if ctx.passages
            else ""
        ),
    }
    for series in ctx.series:
        if not series.points:
            continue
        name = series.kind.value
        values = [p.value for p in series.points]
        variables[f"{name}_latest"] = fmt_value(values[-1])
        variables[f"{name}_mean"] = fmt_value(sum(values) / len(values))
        variables[f"{name}_min"] = fmt_value(min(values))
        variables[f"{name}_max"] = fmt_value(max(values))
        if len(values) >= 2:
            variables[f"{name}_trend"] = (
                "rising" if values[-1] > values[0] else ("falling" if values[-1] < values[0] else "flat")
            )
        else:
            variables[f"{name}_trend"] = "steady"
    npk = [
        f"{kind.value} {variables[f'{kind.value}_latest']} mg/kg"
        for kind in (MetricKind.nitrogen, MetricKind.phosphorus, MetricKind.potassium)
        if f"{kind.value}_latest" in variables
    ]
    if npk:
        variables["npk_line"] = ", ".join(npk)
    if ctx.forecast is not None:
        variables["forecast_days"] = str(len(ctx.forecast.entries))
        variables["rain_sum"] = fmt_value(ctx.forecast.rain_sum())
        variables["forecast_note"] = describe_forecast(ctx.forecast)
    elif ctx.forecast_unavailable:
        variables["forecast_note"] = "The weather forecast is unavailable right now."
    else:
        variables["forecast_note"] = ""
    if ctx.prices is not None and len(ctx.prices.points) >= 2:
        points = ctx.prices.points
        change = (points[-1].price - points[0].price) / (len(points) - 1)
        variables["price_change"] = fmt_value(change)
        variables["price_trend"] = "rising" if change > 0 else ("falling" if change < 0 else "flat")
    if bands is not None:
        try:
            band = bands.band_for(ctx.crop, ctx.growth_stage)
        except UnknownCrop:
            band = None
        if band:
            for kind, (lo, hi) in band.bands.items():
                variables[f"{kind.value}_band_lo"] = fmt_value(lo)
                variables[f"{kind.value}_band_hi"] = fmt_value(hi)
    return variables


def licensed_numbers(ctx: EnrichedContext, variables: dict) -> set[float]:
    """Every numeric value a grounded reply is allowed to state."""
    allowed = set(_FREE_NUMBERS)
    for text in ctx.context_texts():
        for token in _NUMBER_RE.findall(text):
            allowed.add(float(token))
    for value in variables.values():
        if isinstance(value, str):
            for token in _NUMBER_RE.findall(value):
                allowed.add(float(token))
    for series in ctx.series:
        for point in series.points:
            allowed.add(round(point.value, 1))
            allowed.add(float(point.seq))
    for passage, _ in ctx.passages:
        allowed.add(float(passage.chunk_id))
    return allowed


def check_grounding(reply_text: str, allowed: set[float]) -> list[str]:
    """Return the number tokens in the reply that no gathered input
    licenses (empty list = grounded)."""
    violations = []
    for token in _NUMBER_RE.findall(reply_text):
        value = float(token)
        if any(abs(value - lic) <= max(0.05, 0.005 * abs(lic)) for lic in allowed):
            continue
        violations.append(token)
    return violations


def template_reply(ctx: EnrichedContext, variables: dict) -> str:
    """Degraded deterministic reply built only from gathered values."""
    note = variables.get("passage_note", "")
    return f"Advisory for your {ctx.crop}: {variables['inputs_summary']}{' ' + note if note else ''}"


def citation_resolves(citation: Citation, store: Store, kb: KnowledgeBase) -> bool:
    """True when the cited id still resolves in the datastore/index."""
    if citation.kind == "reading":
        node_id, _, seq = citation.id.rpartition(":")
        return bool(node_id) and seq.isdigit() and store.get_reading(node_id, int(seq)) is not None
    if citation.kind == "passage":
        try:
            kb.get_by_ref(citation.id)
            return True
        except UnknownPassage:
            return False
    return store.get_forecast_record(citation.id) is not None


def synthesize(
    ctx: EnrichedContext,
    backend: Backend,
    now: float | None = None,
    bands: CropBandBook | None = None,
) -> AdvisoryReply:
    """Draft the cited English reply for a gathered context.

    A draft whose numbers are not licensed by the context is regenerated
    once with an explicit constraint, then replaced by a deterministic
    template reply built only from gathered values.
    """
    variables = synthesis_variables(ctx, bands)
    request = render_prompt("synthesis", variables)
    text = backend.complete(request)
    allowed = licensed_numbers(ctx, variables)
    bad = check_grounding(text, allowed)
    if bad:
        logger.warning("ungrounded numbers %s in draft; regenerating", bad)
        retry_vars = dict(variables)
        retry_vars["question"] = (
            variables["question"]
            + " (Use only the numbers shown in the live farm data section.)"
        )
        text = backend.complete(render_prompt("synthesis", retry_vars))
        bad = check_grounding(text, allowed)
        if bad:
            logger.warning("draft still ungrounded (%s); degrading to template reply", bad)
            text = template_reply(ctx, variables)
            if check_grounding(text, allowed):
                raise GroundingViolation(
                    f"template reply ungrounded: {check_grounding(text, allowed)}"
                )
    return AdvisoryReply(
        text=text,
        language="en",
        citations=ctx.citations(),
        generated_at=ctx.gathered_at if now is None else now,
    )
