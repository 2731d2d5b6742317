"""Query-intent parsing: an LLM-backed path whose JSON output is
schema-validated, and a deterministic keyword table used as the test
path and as the fallback whenever the model emits invalid JSON."""

from __future__ import annotations

import json
import logging
import re

from ..llm import Backend, render_prompt
from ..telemetry import MetricKind
from .types import DataRequirement, MetricRequest, UnparseableIntent

logger = logging.getLogger(__name__)


def _req(metrics=(), forecast_days=0, needs_market=False, kb_query=None):
    return lambda crop: DataRequirement(
        metrics=[MetricRequest(kind, window) for kind, window in metrics],
        forecast_days=forecast_days,
        needs_market=needs_market,
        kb_query=kb_query.format(crop=crop) if kb_query else None,
    )


# Checked in order; first pattern hit wins.
_KEYWORD_RULES: list[tuple[re.Pattern, object]] = [
    (re.compile(r"irrigat|\bwater"), _req(
        metrics=[(MetricKind.moisture, "last_7d")], forecast_days=2,
        kb_query="irrigation scheduling {crop}")),
    (re.compile(r"\bsell\b|\bselling\b"), _req(
        needs_market=True, forecast_days=3, kb_query="market timing {crop}")),
    (re.compile(r"\bprice|\bmarket\b"), _req(
        needs_market=True, kb_query="market timing {crop}")),
    (re.compile(r"fertili[sz]"), _req(
        metrics=[(MetricKind.nitrogen, "latest"), (MetricKind.phosphorus, "latest"),
                 (MetricKind.potassium, "latest")],
        kb_query="fertilization {crop}")),
    (re.compile(r"nitrogen|phosphorus|potassium|\bnpk\b|nutrient"), _req(
        metrics=[(MetricKind.nitrogen, "last_7d"), (MetricKind.phosphorus, "last_7d"),
                 (MetricKind.potassium, "last_7d")],
        kb_query="fertilization {crop}")),
    (re.compile(r"\bph\b|acid|\blime\b"), _req(
        metrics=[(MetricKind.ph, "last_7d")], kb_query="soil acidity lime {crop}")),
    (re.compile(r"salin|conductivity|\bec\b|\bsalt"), _req(
        metrics=[(MetricKind.ec, "last_7d")], kb_query="salinity management {crop}")),
    (re.compile(r"\brain|weather|forecast|storm"), _req(
        metrics=[(MetricKind.moisture, "latest")], forecast_days=5)),
    (re.compile(r"moisture|\bdry\b"), _req(metrics=[(MetricKind.moisture, "latest")])),
    (re.compile(r"temperature|\bheat\b|frost|\bcold\b"), _req(
        metrics=[(MetricKind.temperature, "last_24h")], forecast_days=2)),
]


def parse_intent_rules(message_en: str, crop: str, reply_language: str = "en") -> DataRequirement:
    """Deterministic keyword-table parser."""
    text = message_en.strip()
    if not text:
        raise UnparseableIntent("empty message")
    lowered = text.lower()
    for pattern, builder in _KEYWORD_RULES:
        if pattern.search(lowered):
            requirement = builder(crop)
            requirement.reply_language = reply_language
            return requirement.validate()
    # no keyword hit: treat the whole message as a knowledge question
    requirement = DataRequirement(kb_query=text, reply_language=reply_language)
    return requirement.validate()


def parse_intent(
    message_en: str,
    crop: str,
    reply_language: str = "en",
    backend: Backend | None = None,
) -> DataRequirement:
    """Map an English-normalized message to a DataRequirement.

    With a backend, the model's JSON is parsed and schema-validated;
    anything invalid falls back to the keyword table. The reply language
    always comes from the farm profile, never from the model.
    """
    if not message_en.strip():
        raise UnparseableIntent("empty message")
    if backend is not None:
        request = render_prompt(
            "intent",
            {"message": message_en, "crop": crop, "reply_language": reply_language},
        )
        raw = backend.complete(request)
        try:
            requirement = DataRequirement.from_json(raw)
            requirement.reply_language = reply_language
            return requirement.validate()
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            logger.warning("intent output failed schema validation (%s); using rules", exc)
    return parse_intent_rules(message_en, crop, reply_language)
