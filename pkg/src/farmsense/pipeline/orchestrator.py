"""Chain coordinator: translate in, parse, enrich, synthesize, translate
out, with bounded retries, a wall-clock budget, per-stage latency
records, and the scheduled daily summaries."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from ..crops import CropBandBook
from ..datastore import ChatRecord, InsufficientData, Store
from ..feeds import FeedsProvider, ProviderUnavailable
from ..knowledge import KnowledgeBase
from ..llm import (
    ARABIC_SCRIPT_LANGUAGES,
    Backend,
    BackendError,
    BackendTimeout,
    render_prompt,
    validate_script,
)
from ..telemetry import MetricKind
from .core import enrich, synthesize
from .intent import parse_intent
from .types import (
    AdvisoryReply,
    Citation,
    DatastoreUnavailable,
    EnrichedContext,
    PipelineExhausted,
    UnparseableIntent,
    describe_forecast,
    fmt_value,
    reading_ref,
)

logger = logging.getLogger(__name__)
#: One JSON record per stage execution: {"stage": name, "ms": x, "outcome": ...}
stage_logger = logging.getLogger("farmsense.pipeline.stages")

RETRYABLE = (BackendTimeout, BackendError, ProviderUnavailable, DatastoreUnavailable)

CLARIFICATION_TEXT = (
    "I could not work out what you need. Could you rephrase, naming the "
    "crop and what you want to know (watering, fertilizer, soil, prices)?"
)
STATUS_TEXT = (
    "Sorry, I could not finish processing your message just now. "
    "Your question is saved and I will follow up."
)


@dataclass
class StageRecord:
    name: str
    ms: float
    outcome: str  # ok | error:<Type> | degraded

    def as_dict(self) -> dict:
        return {"stage": self.name, "ms": round(self.ms, 3), "outcome": self.outcome}


@dataclass
class OrchestrationResult:
    reply: AdvisoryReply
    context: EnrichedContext | None
    stages: list[StageRecord] = field(default_factory=list)


class Orchestrator:
    def __init__(
        self,
        store: Store,
        feeds: FeedsProvider,
        kb: KnowledgeBase,
        backend: Backend,
        bands: CropBandBook | None = None,
        retries: int = 2,
        backoff_base_s: float = 1.0,
        backoff_factor: float = 2.0,
        budget_s: float = 60.0,
        clock=time.monotonic,
        sleep=time.sleep,
    ):
        self.store = store
        self.feeds = feeds
        self.kb = kb
        self.backend = backend
        self.bands = bands or CropBandBook.load()
        self.retries = retries
        self.backoff_base_s = backoff_base_s
        self.backoff_factor = backoff_factor
        self.budget_s = budget_s
        self._clock = clock
        self._sleep = sleep

    # -- retry plumbing -------------------------------------------------

    def _run_stage(self, stages: list[StageRecord], deadline: float, name: str, fn):
        delay = self.backoff_base_s
        attempt = 0
        while True:
            started = self._clock()
            try:
                result = fn()
                record = StageRecord(name, (self._clock() - started) * 1000.0, "ok")
                stages.append(record)
                stage_logger.info(json.dumps(record.as_dict(), separators=(",", ":")))
                return result
            except RETRYABLE as exc:
                record = StageRecord(
                    name, (self._clock() - started) * 1000.0, f"error:{type(exc).__name__}"
                )
                stages.append(record)
                stage_logger.info(json.dumps(record.as_dict(), separators=(",", ":")))
                attempt += 1
                if attempt > self.retries or self._clock() + delay > deadline:
                    raise PipelineExhausted(f"stage {name} failed: {exc}") from exc
                logger.warning("stage %s failed (%s); retry %d in %.1fs", name, exc, attempt, delay)
                self._sleep(delay)
                delay *= self.backoff_factor

    # -- main chain --------------------------------------------------------

    def orchestrate(self, inbound: ChatRecord) -> AdvisoryReply:
        return self.handle(inbound).reply

    def handle(self, inbound: ChatRecord) -> OrchestrationResult:
        """Full chain for one inbound message. Always returns a reply:
        clarification when intent parsing fails, a status message when
        retries or the budget run out."""
        stages: list[StageRecord] = []
        deadline = self._clock() + self.budget_s
        profile = self.store.get_farm(inbound.farm_id)
        now = inbound.timestamp
        try:
            message_en = self._run_stage(
                stages, deadline, "translate_in",
                lambda: self.backend.translate(inbound.body, profile.language, "en"),
            )
            try:
                requirement = self._run_stage(
                    stages, deadline, "intent",
                    lambda: parse_intent(
                        message_en, profile.crops[0], profile.language, self.backend
                    ),
                )
            except UnparseableIntent:
                reply = self._finalize(
                    stages, deadline, profile,
                    AdvisoryReply(CLARIFICATION_TEXT, "en", [], now, kind="clarification"),
                )
                return OrchestrationResult(reply, None, stages)

            try:
                ctx = self._run_stage(
                    stages, deadline, "enrich",
                    lambda: enrich(
                        requirement, profile, message_en, self.store, self.feeds, self.kb, now
                    ),
                )
            except PipelineExhausted as exc:
                if not isinstance(exc.__cause__, ProviderUnavailable):
                    raise
                # feeds are down for good: degrade rather than give up
                ctx = enrich(
                    requirement, profile, message_en, self.store, self.feeds, self.kb, now,
                    skip_feed_failures=True,
                )
                stages.append(StageRecord("enrich", 0.0, "degraded"))

            reply = self._run_stage(
                stages, deadline, "synthesize",
                lambda: synthesize(ctx, self.backend, now=now, bands=self.bands),
            )
            reply = self._finalize(stages, deadline, profile, reply)
            self._archive(ctx)
            return OrchestrationResult(reply, ctx, stages)
        except PipelineExhausted as exc:
            logger.error("pipeline exhausted for %s: %s", inbound.farm_id, exc)
            reply = AdvisoryReply(STATUS_TEXT, "en", [], now, kind="status")
            try:
                reply = self._finalize(stages, deadline, profile, reply)
            except PipelineExhausted:
                reply.language = "en"  # deliver untranslated rather than nothing
            return OrchestrationResult(reply, None, stages)

    def _finalize(self, stages, deadline, profile, reply: AdvisoryReply) -> AdvisoryReply:
        """Translate-out is always the last transformation; outbound text
        is script-checked for Arabic-script languages."""
        if profile.language == "en":
            return reply

        def translate_out() -> str:
            text = self.backend.translate(reply.text, "en", profile.language)
            if profile.language in ARABIC_SCRIPT_LANGUAGES:
                issue = validate_script(text, profile.language)
                if issue is not None:
                    raise BackendError(
                        f"translation came back in {issue.detected_block} script"
                    )
            return text

        reply.text = self._run_stage(stages, deadline, "translate_out", translate_out)
        reply.language = profile.language
        return reply

    def _archive(self, ctx: EnrichedContext | None) -> None:
        if ctx is not None and ctx.forecast is not None:
            self.store.archive_forecast(ctx.forecast.to_record())

    # -- scheduled daily summary ---------------------------------------------

    def run_daily_summary(self, profile, now: float) -> AdvisoryReply:
        """Summary built from 24 h aggregates, trend flags, and tomorrow's
        forecast; cites the windows it used."""
        stages: list[StageRecord] = []
        deadline = self._clock() + self.budget_s
        citations: list[Citation] = []
        lines: list[str] = []
        for metric in MetricKind:
            points = self.store.window(profile.farm_id, metric, now - 86400.0, now + 1e-6)
            if not points:
                continue
            values = [p.value for p in points]
            mean = sum(values) / len(values)
            lines.append(
                f"{metric.value}: mean {fmt_value(mean)} over the last 24 h "
                f"({len(points)} readings, {reading_ref(points[0].node_id, points[0].seq)}"
                f" to {reading_ref(points[-1].node_id, points[-1].seq)})."
            )
            for point in (points[0], points[-1]):
                ref = Citation("reading", reading_ref(point.node_id, point.seq))
                if ref not in citations:
                    citations.append(ref)
        inputs_summary = " ".join(lines) if lines else "No readings in the last 24 hours."

        trend_lines = []
        for metric in MetricKind:
            try:
                report = self.store.detect_trend(profile.farm_id, metric, 7, now=now)
            except InsufficientData:
                continue
            if report.flag != "stable":
                trend_lines.append(
                    f"{metric.value} {report.flag} at {fmt_value(report.slope)} per day over 7 days."
                )
        trend_block = " ".join(trend_lines) or "(no notable trends)"

        try:
            forecast = self.feeds.get_forecast(profile.location, 1)
            tomorrow_block = describe_forecast(forecast)
            citations.append(Citation("forecast", forecast.forecast_id))
            self.store.archive_forecast(forecast.to_record())
        except ProviderUnavailable:
            tomorrow_block = "Forecast unavailable."

        request = render_prompt(
            "summary",
            {
                "crop": profile.crops[0],
                "inputs_summary": inputs_summary,
                "trend_block": trend_block,
                "tomorrow_block": tomorrow_block,
            },
        )
        text = self._run_stage(stages, deadline, "summary", lambda: self.backend.complete(request))
        reply = AdvisoryReply(text, "en", citations, now, kind="summary")
        return self._finalize(stages, deadline, profile, reply)


def _hhmm_today(now: float, hhmm: str) -> float:
    """Timestamp of today's HH:MM in UTC (profile times are treated as
    UTC at desk scale)."""
    moment = datetime.fromtimestamp(now, tz=timezone.utc)
    hour, minute = (int(part) for part in hhmm.split(":"))
    scheduled = moment.replace(hour=hour, minute=minute, second=0, microsecond=0)
    return scheduled.timestamp()


class SummaryScheduler:
    """Single periodic ticker that fires each profile's daily summaries
    at the onboarded times, at most once per (farm, time) per day."""

    def __init__(self, store: Store, orchestrator: Orchestrator, deliver=None, tick_s: float = 60.0):
        self.store = store
        self.orchestrator = orchestrator
        self.deliver = deliver
        self.tick_s = tick_s
        self._sent: dict[tuple[str, str], str] = {}  # (farm, hh:mm) -> date

    def tick(self, now: float) -> list[tuple[str, AdvisoryReply]]:
        fired = []
        today = datetime.fromtimestamp(now, tz=timezone.utc).date().isoformat()
        for profile in self.store.list_farms():
            if self.store.farm_stage(profile.farm_id) != "active":
                continue
            for hhmm in profile.summary_times:
                if abs(now - _hhmm_today(now, hhmm)) > self.tick_s:
                    continue
                key = (profile.farm_id, hhmm)
                if self._sent.get(key) == today:
                    continue
                self._sent[key] = today
                reply = self.orchestrator.run_daily_summary(profile, now)
                if self.deliver is not None:
                    self.deliver(profile, reply)
                fired.append((profile.farm_id, reply))
        return fired
