"""Proactive alerting on the ingest path: a rule gate picks out-of-band
readings, the model (or mock) composes the recommendation, and a per
(farm, metric) cooldown stops repeats inside 24 hours. Assessment must
never break ingest, so unexpected failures log and return nothing."""

from __future__ import annotations

import logging

from ..crops import CropBand, UnknownCrop
from ..datastore import Store
from ..feeds import FeedsProvider, ProviderUnavailable
from ..knowledge import KnowledgeBase
from ..llm import Backend, render_prompt
from ..telemetry import MetricKind, SensorReading
from .types import Alert, Citation, fmt_value, reading_ref

logger = logging.getLogger(__name__)

ALERT_COOLDOWN_S = 24 * 3600.0
#: Skip low-moisture alerts when at least this much rain is coming.
RAIN_RELIEF_MM = 5.0
RAIN_LOOKAHEAD_DAYS = 5


def band_violations(
    reading: SensorReading, band: CropBand
) -> list[tuple[MetricKind, float, tuple[float, float]]]:
    """Metrics outside their band, worst (largest relative excursion) first."""
    out = []
    for metric, (lo, hi) in band.bands.items():
        value = reading.values.get(metric)
        if value is None:
            continue
        excursion = max(lo - value, value - hi, 0.0)
        if excursion > 0:
            out.append((excursion / (hi - lo), metric, value, (lo, hi)))
    out.sort(key=lambda item: -item[0])
    return [(metric, value, band_) for _, metric, value, band_ in out]


def assess_alert(
    reading: SensorReading,
    profile,
    band: CropBand,
    store: Store,
    feeds: FeedsProvider,
    backend: Backend,
    kb: KnowledgeBase,
    now: float,
) -> Alert | None:
    """Rule gate first, then model-composed recommendation. Returns None
    when everything is in band, the cooldown is active, or forecast rain
    makes a low-moisture alert moot."""
    violations = band_violations(reading, band)
    if not violations:
        return None
    metric, value, (lo, hi) = violations[0]

    last = store.last_alert_at(profile.farm_id, metric.value)
    if last is not None and now - last < ALERT_COOLDOWN_S:
        return None

    try:
        forecast = None
        passages = []
        if metric is MetricKind.moisture and value < lo:
            try:
                forecast = feeds.get_forecast(profile.location, RAIN_LOOKAHEAD_DAYS)
            except ProviderUnavailable:
                forecast = None  # assess without rain context
            if forecast is not None and forecast.rain_sum() >= RAIN_RELIEF_MM:
                logger.info(
                    "low moisture on %s but %.1f mm rain coming; no alert",
                    profile.farm_id,
                    forecast.rain_sum(),
                )
                return None
        if metric is MetricKind.ph:
            passages = [(p, kb.cite(p)) for p, _ in kb.search(f"soil acidity lime {profile.crops[0]}", k=4)]

        variables = {
            "crop": profile.crops[0],
            "stage": profile.growth_stage or "vegetative",
            "metric": metric.value,
            "value": fmt_value(value),
            "band_lo": fmt_value(lo),
            "band_hi": fmt_value(hi),
            "forecast_days": str(len(forecast.entries)) if forecast else "0",
            "rain_sum": fmt_value(forecast.rain_sum()) if forecast else "0",
            "passages": [(citation, p.text) for p, citation in passages],
            "passage_citations": "; ".join(citation for _, citation in passages) or "(none)",
        }
        recommendation = backend.complete(render_prompt("alert_assess", variables))

        width = hi - lo
        severity = "critical" if max(lo - value, value - hi) > 0.10 * width else "warning"
        citations = [Citation("reading", reading_ref(reading.node_id, reading.seq))]
        citations += [Citation("passage", p.ref) for p, _ in passages]
        if forecast is not None:
            citations.append(Citation("forecast", forecast.forecast_id))
        alert = Alert(
            farm_id=profile.farm_id,
            metric=metric,
            observed=value,
            band=(lo, hi),
            severity=severity,
            recommendation=recommendation,
            citations=citations,
            cooldown_key=f"{profile.farm_id}:{metric.value}",
            created_at=now,
        )
        if forecast is not None:
            store.archive_forecast(forecast.to_record())
        return alert
    except Exception:
        logger.exception("alert assessment failed for %s; skipping", profile.farm_id)
        return None


class AlertEngine:
    """Persists and delivers alerts produced on the ingest path. The
    deliver callable is the chat-service send hook (alerts go out as
    voice-flagged messages so low-literacy users hear them)."""

    def __init__(self, store, feeds, backend, kb, bands, deliver=None):
        self.store = store
        self.feeds = feeds
        self.backend = backend
        self.kb = kb
        self.bands = bands
        self.deliver = deliver

    def on_reading(self, farm_id: str, reading: SensorReading, now: float) -> Alert | None:
        try:
            profile = self.store.get_farm(farm_id)
            band = self.bands.band_for(profile.crops[0], profile.growth_stage)
        except UnknownCrop:
            logger.debug("no crop band for %s; alerts fail safe to routine", farm_id)
            return None
        except Exception:
            logger.exception("cannot resolve crop band for %s; skipping alert", farm_id)
            return None
        alert = assess_alert(
            reading, profile, band, self.store, self.feeds, self.backend, self.kb, now
        )
        if alert is None:
            return None
        self.store.append_alert(farm_id, alert.to_record())
        if self.deliver is not None:
            try:
                self.deliver(profile, alert)
            except Exception:
                logger.exception("alert delivery failed for %s", farm_id)
        return alert
