"""Domain types shared across the pipeline stages, including the
versioned data-requirement JSON schema emitted by the intent parser."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..datastore import SUPPORTED_LANGUAGES, ChatRecord, FarmProfile, SeriesPoint
from ..feeds import ForecastWindow, PriceSeries
from ..knowledge import Passage
from ..telemetry import MetricKind

SCHEMA_VERSION = 1
WINDOW_RE = re.compile(r"^(latest|last_(\d+)([hd]))$")


class UnparseableIntent(ValueError):
    """The message could not be mapped to a data requirement; the
    pipeline answers with a clarification prompt."""


class GroundingViolation(ValueError):
    """A drafted reply referenced data that was not gathered."""


class PipelineExhausted(RuntimeError):
    """Retries or the wall-clock budget ran out mid-chain."""


class DatastoreUnavailable(RuntimeError):
    """Retryable datastore failure (e.g. backing disk error)."""


@dataclass(frozen=True)
class MetricRequest:
    kind: MetricKind
    window: str  # latest | last_<N>h | last_<N>d

    def __post_init__(self):
        if not WINDOW_RE.match(self.window):
            raise ValueError(f"bad metric window {self.window!r}")

    def window_seconds(self) -> float | None:
        match = WINDOW_RE.match(self.window)
        if match.group(1) == "latest":
            return None
        count, unit = int(match.group(2)), match.group(3)
        return count * (3600.0 if unit == "h" else 86400.0)


@dataclass
class DataRequirement:
    """Structured request listing the inputs a reply needs.

    Serializes to the versioned wire schema, e.g.
    {"v":1,"metrics":[{"kind":"moisture","window":"last_7d"}],
     "forecast_days":2,"needs_market":false,
     "kb_query":"irrigation scheduling cotton","reply_language":"ur"}
    """

    metrics: list[MetricRequest] = field(default_factory=list)
    forecast_days: int = 0
    needs_market: bool = False
    kb_query: str | None = None
    reply_language: str = "en"

    def validate(self) -> "DataRequirement":
        if not (0 <= self.forecast_days <= 14):
            raise ValueError("forecast_days must be within 0..14")
        if self.reply_language not in SUPPORTED_LANGUAGES:
            raise ValueError(f"unsupported reply_language {self.reply_language!r}")
        if not (self.metrics or self.forecast_days > 0 or self.needs_market or self.kb_query):
            raise ValueError("requirement must request at least one input")
        return self

    def to_json(self) -> str:
        doc = {
            "v": SCHEMA_VERSION,
            "metrics": [{"kind": m.kind.value, "window": m.window} for m in self.metrics],
            "forecast_days": self.forecast_days,
            "needs_market": self.needs_market,
            "kb_query": self.kb_query,
            "reply_language": self.reply_language,
        }
        return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "DataRequirement":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("v") != SCHEMA_VERSION:
            raise ValueError(f"unsupported requirement version {doc.get('v')!r}")
        allowed = {"v", "metrics", "forecast_days", "needs_market", "kb_query", "reply_language"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown requirement fields {sorted(unknown)}")
        metrics = [
            MetricRequest(kind=MetricKind(m["kind"]), window=m["window"])
            for m in doc.get("metrics", [])
        ]
        kb_query = doc.get("kb_query") or None
        return cls(
            metrics=metrics,
            forecast_days=int(doc.get("forecast_days", 0)),
            needs_market=bool(doc.get("needs_market", False)),
            kb_query=kb_query,
            reply_language=doc.get("reply_language", "en"),
        ).validate()


@dataclass(frozen=True)
class Citation:
    kind: str  # reading | passage | forecast
    id: str

    def __post_init__(self):
        if self.kind not in ("reading", "passage", "forecast"):
            raise ValueError(f"bad citation kind {self.kind!r}")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "id": self.id}

    @classmethod
    def from_dict(cls, doc: dict) -> "Citation":
        return cls(kind=doc["kind"], id=doc["id"])


def reading_ref(node_id: str, seq: int) -> str:
    return f"{node_id}:{seq}"


@dataclass
class GatheredSeries:
    request: MetricRequest
    points: list[SeriesPoint]

    @property
    def kind(self) -> MetricKind:
        return self.request.kind


@dataclass
class EnrichedContext:
    requirement: DataRequirement
    profile: FarmProfile
    question: str  # English-normalized message
    crop: str
    growth_stage: str
    history: list[ChatRecord] = field(default_factory=list)
    series: list[GatheredSeries] = field(default_factory=list)
    forecast: ForecastWindow | None = None
    forecast_unavailable: bool = False
    prices: PriceSeries | None = None
    passages: list[tuple[Passage, str]] = field(default_factory=list)  # (passage, citation)
    notes: list[str] = field(default_factory=list)
    gathered_at: float = 0.0

    def has_sensor_inputs(self) -> bool:
        return any(s.points for s in self.series)

    def citations(self) -> list[Citation]:
        """Identifiers for everything gathered: window endpoints per
        series, each injected passage, and the forecast."""
        cites: list[Citation] = []
        seen: set[tuple[str, str]] = set()

        def add(kind: str, ref: str) -> None:
            if (kind, ref) not in seen:
                seen.add((kind, ref))
                cites.append(Citation(kind, ref))

        for series in self.series:
            if not series.points:
                continue
            for point in (series.points[0], series.points[-1]):
                add("reading", reading_ref(point.node_id, point.seq))
        for passage, _ in self.passages:
            add("passage", passage.ref)
        if self.forecast is not None:
            add("forecast", self.forecast.forecast_id)
        return cites

    def context_texts(self) -> list[str]:
        """Raw grounding material, used for prompt building and
        faithfulness scoring."""
        texts: list[str] = []
        for series in self.series:
            if series.points:
                texts.append(describe_series(series))
        if self.forecast is not None:
            texts.append(describe_forecast(self.forecast))
        if self.prices is not None and self.prices.points:
            texts.append(describe_prices(self.prices))
        texts.extend(p.text for p, _ in self.passages)
        return texts


@dataclass
class AdvisoryReply:
    text: str
    language: str
    citations: list[Citation]
    generated_at: float
    kind: str = "advisory"  # advisory | clarification | status | summary | alert

    def citation_dicts(self) -> list[dict]:
        return [c.as_dict() for c in self.citations]


@dataclass
class Alert:
    farm_id: str
    metric: MetricKind
    observed: float
    band: tuple[float, float]
    severity: str  # warning | critical
    recommendation: str
    citations: list[Citation]
    cooldown_key: str
    created_at: float

    def to_record(self) -> dict:
        return {
            "farm_id": self.farm_id,
            "metric": self.metric.value,
            "observed": self.observed,
            "band": list(self.band),
            "severity": self.severity,
            "recommendation": self.recommendation,
            "citations": [c.as_dict() for c in self.citations],
            "cooldown_key": self.cooldown_key,
            "created_at": self.created_at,
        }


# -- plain-language rendering of gathered inputs -----------------------------

UNITS = {
    MetricKind.temperature: "°C",
    MetricKind.moisture: "%RH",
    MetricKind.ph: "",
    MetricKind.ec: "µS/cm",
    MetricKind.nitrogen: "mg/kg",
    MetricKind.phosphorus: "mg/kg",
    MetricKind.potassium: "mg/kg",
}


def fmt_value(value: float) -> str:
    rounded = round(value, 1)
    if rounded == int(rounded):
        return str(int(rounded))
    return f"{rounded:.1f}"


def describe_series(series: GatheredSeries) -> str:
    unit = UNITS[series.kind]
    suffix = f" {unit}" if unit else ""
    points = series.points
    if series.request.window == "latest" or len(points) == 1:
        point = points[-1]
        return (
            f"Latest {series.kind.value}: {fmt_value(point.value)}{suffix} "
            f"(reading {reading_ref(point.node_id, point.seq)})."
        )
    values = [p.value for p in points]
    mean = sum(values) / len(values)
    return (
        f"{series.kind.value} over {series.request.window}: "
        f"latest {fmt_value(values[-1])}{suffix}, mean {fmt_value(mean)}, "
        f"min {fmt_value(min(values))}, max {fmt_value(max(values))} "
        f"({len(points)} readings, {reading_ref(points[0].node_id, points[0].seq)}"
        f" to {reading_ref(points[-1].node_id, points[-1].seq)})."
    )


def describe_forecast(forecast: ForecastWindow) -> str:
    days = len(forecast.entries)
    t_lo = min(e.t_min for e in forecast.entries)
    t_hi = max(e.t_max for e in forecast.entries)
    return (
        f"Rain expected over the next {days} day(s): {fmt_value(forecast.rain_sum())} mm total; "
        f"temperatures {fmt_value(t_lo)} to {fmt_value(t_hi)} °C "
        f"(forecast {forecast.forecast_id})."
    )


def describe_prices(prices: PriceSeries) -> str:
    points = prices.points
    first, last = points[0], points[-1]
    change = (last.price - first.price) / max(len(points) - 1, 1)
    trend = "rising" if change > 0 else ("falling" if change < 0 else "flat")
    return (
        f"{prices.crop} price over {len(points)} day(s): {fmt_value(first.price)} to "
        f"{fmt_value(last.price)} {last.currency} ({trend}, about {fmt_value(change)} per day)."
    )
