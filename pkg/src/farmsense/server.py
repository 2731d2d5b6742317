"""HTTP service tying the system together: reading ingestion (the
gateway's uplink target), the chat webhook and onboarding endpoints, the
farm read API used by the pipeline's consumers and the browser UI, and
the mock-provider outbox for inspection.

Ingestion is idempotent per (node_id, seq) and acks a per-node cursor,
which is what makes the gateway's at-least-once retries safe. Alert
assessment runs on the ingest path in virtual time (the reading's own
timestamp), decoupled from chat handling.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .chat import ChatService, MalformedPayload, MockMessageProvider, UnknownPhone
from .crops import CropBandBook
from .datastore import DuplicatePhone, Store, UnknownFarm
from .feeds import CachedFeedsProvider, ReplayFeedsProvider
from .knowledge import KnowledgeBase
from .llm import BackendConfig, make_backend
from .pipeline import AlertEngine, Orchestrator, SummaryScheduler
from .telemetry import MetricKind, RangeViolation, SensorReading, validate_reading

logger = logging.getLogger(__name__)


@dataclass
class ServerConfig:
    data_dir: str | None = None  # None -> in-memory store
    backend: BackendConfig = field(default_factory=BackendConfig)
    feeds_root: str | None = None  # None -> packaged fixtures
    feeds_live_url: str | None = None  # live forecast API; overrides fixtures
    feeds_api_key_env: str | None = None
    corpus_dir: str | None = None  # None -> packaged corpus
    crop_bands: str | None = None  # None -> packaged defaults
    frontend_dir: str | None = None  # static assets, mounted at /
    provider_kind: str = "mock"  # mock | real (real needs an adapter + credentials)
    provider_credentials_env: str | None = None


class OnboardRequest(BaseModel):
    phone: str
    language: str
    crops: list[str]
    location: tuple[float, float]
    summary_times: list[str] = []
    growth_stage: str | None = None


class ChatMessage(BaseModel):
    body: str
    kind: Literal["text", "voice"] = "text"


class AssignNodeRequest(BaseModel):
    node_id: str
    farm_id: str


class TickRequest(BaseModel):
    now: float


def build_runtime(config: ServerConfig) -> dict:
    store = Store(config.data_dir)
    backend = make_backend(config.backend)
    if config.feeds_live_url:
        import os

        from .feeds import LiveForecastProvider

        api_key = os.environ.get(config.feeds_api_key_env) if config.feeds_api_key_env else None
        feeds = CachedFeedsProvider(LiveForecastProvider(config.feeds_live_url, api_key=api_key))
    else:
        feeds_root = config.feeds_root or str(
            resources.files("farmsense").joinpath("fixtures/feeds")
        )
        feeds = CachedFeedsProvider(ReplayFeedsProvider(feeds_root))
    corpus = config.corpus_dir or str(resources.files("farmsense").joinpath("fixtures/corpus"))
    kb = KnowledgeBase.build(corpus)
    bands = CropBandBook.load(config.crop_bands)
    orchestrator = Orchestrator(store, feeds, kb, backend, bands)
    if config.provider_kind != "mock":
        # webhook-provider adapters for real messaging services plug in
        # here; none ships, so fail loudly instead of dropping messages
        raise ValueError(
            f"no message-provider adapter for kind {config.provider_kind!r}; use 'mock'"
        )
    provider = MockMessageProvider()
    chat = ChatService(
        store,
        provider,
        pipeline_handler=lambda profile, record: orchestrator.orchestrate(record),
        translator=backend.translate,
    )
    alerts = AlertEngine(
        store, feeds, backend, kb, bands,
        deliver=lambda profile, alert: chat.send(alert, profile.phone, as_voice=True),
    )
    scheduler = SummaryScheduler(
        store, orchestrator, deliver=lambda profile, reply: chat.send(reply, profile.phone)
    )
    return {
        "store": store,
        "backend": backend,
        "feeds": feeds,
        "kb": kb,
        "bands": bands,
        "orchestrator": orchestrator,
        "provider": provider,
        "chat": chat,
        "alerts": alerts,
        "scheduler": scheduler,
    }


def create_app(config: ServerConfig | None = None, runtime: dict | None = None) -> FastAPI:
    config = config or ServerConfig()
    runtime = runtime or build_runtime(config)
    app = FastAPI(title="farmsense", version="0.1.0")
    app.state.runtime = runtime
    store: Store = runtime["store"]
    chat: ChatService = runtime["chat"]
    alerts: AlertEngine = runtime["alerts"]

    web_message_seq = {"n": 0}

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "farms": len(store.list_farms())}

    # -- ingestion -----------------------------------------------------

    @app.post("/v1/ingest")
    async def ingest(request: Request) -> dict:
        body = (await request.body()).decode("utf-8")
        acked: dict[str, int] = {}
        dropped = 0
        for line in body.splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                reading = SensorReading.from_wire(json.loads(line))
                validate_reading(reading)
            except (RangeViolation, ValueError, KeyError) as exc:
                logger.warning("dropping bad reading: %s", exc)
                dropped += 1
                continue
            farm_id = store.farm_for_node(reading.node_id)
            if farm_id is None:
                farm_id = _auto_farm(store, reading.node_id)
            outcome = store.append_reading(farm_id, reading)
            acked[reading.node_id] = max(acked.get(reading.node_id, 0), reading.seq)
            if outcome == "stored":
                alerts.on_reading(farm_id, reading, now=reading.timestamp)
        return {"acked": acked, "dropped": dropped}

    # -- chat + onboarding ------------------------------------------------

    @app.post("/v1/onboard")
    def onboard(body: OnboardRequest) -> dict:
        try:
            state = chat.onboard(
                phone=body.phone,
                language=body.language,
                crops=body.crops,
                location=body.location,
                summary_times=body.summary_times,
                growth_stage=body.growth_stage,
            )
        except DuplicatePhone:
            raise HTTPException(status_code=409, detail="phone already onboarded")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"phone": state.phone, "stage": state.stage, "farm_id": state.farm_id}

    @app.get("/v1/onboard")
    def onboard_state(phone: str) -> dict:
        try:
            state = chat.onboarding_state(phone)
        except UnknownPhone:
            raise HTTPException(status_code=404, detail="unknown phone")
        return {"phone": state.phone, "stage": state.stage, "farm_id": state.farm_id}

    @app.post("/v1/webhook")
    def webhook(payload: dict) -> JSONResponse:
        try:
            result = chat.receive(payload)
        except MalformedPayload as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except UnknownPhone:
            raise HTTPException(status_code=404, detail="unknown phone; onboard first")
        chat.process_pending()
        return JSONResponse(result)

    @app.get("/v1/outbox")
    def outbox(phone: str) -> dict:
        provider: MockMessageProvider = runtime["provider"]
        return {"messages": provider.for_phone(phone)}

    @app.post("/v1/farms/{farm_id}/chat")
    def farm_chat(farm_id: str, message: ChatMessage) -> dict:
        try:
            profile = store.get_farm(farm_id)
        except UnknownFarm:
            raise HTTPException(status_code=404, detail="unknown farm")
        web_message_seq["n"] += 1
        payload = {
            "provider_message_id": f"web-{farm_id}-{web_message_seq['n']:06d}",
            "from_phone": profile.phone,
            "kind": message.kind,
            "body": message.body,
        }
        chat.receive(payload)
        replies = chat.process_pending()
        if not replies:
            return {"reply": None, "stage": store.farm_stage(farm_id)}
        reply = replies[-1]
        return {
            "reply": {
                "text": reply.text,
                "language": reply.language,
                "kind": reply.kind,
                "citations": reply.citation_dicts(),
                "generated_at": reply.generated_at,
            },
            "stage": store.farm_stage(farm_id),
        }

    # -- farm read API -------------------------------------------------------

    def _farm_or_404(farm_id: str):
        try:
            return store.get_farm(farm_id)
        except UnknownFarm:
            raise HTTPException(status_code=404, detail="unknown farm")

    def _metric_or_400(metric: str) -> MetricKind:
        try:
            return MetricKind(metric)
        except ValueError:
            raise HTTPException(status_code=400, detail=f"unknown metric {metric!r}")

    @app.get("/v1/farms")
    def farms() -> dict:
        out = []
        for profile in store.list_farms():
            out.append(
                {
                    "farm_id": profile.farm_id,
                    "phone": profile.phone,
                    "language": profile.language,
                    "crops": list(profile.crops),
                    "location": list(profile.location),
                    "summary_times": list(profile.summary_times),
                    "stage": store.farm_stage(profile.farm_id),
                }
            )
        return {"farms": out}

    @app.get("/v1/farms/{farm_id}/latest")
    def latest(farm_id: str, metric: str) -> dict:
        _farm_or_404(farm_id)
        kind = _metric_or_400(metric)
        found = store.latest(farm_id, kind)
        if found is None:
            return {"metric": metric, "latest": None}
        ts, value = found
        return {"metric": metric, "latest": {"ts": ts, "value": value}}

    @app.get("/v1/farms/{farm_id}/series")
    def series(
        farm_id: str,
        metric: str,
        from_ts: float = Query(default=0.0, alias="from"),
        to_ts: float = Query(default=float("inf"), alias="to"),
    ) -> dict:
        _farm_or_404(farm_id)
        kind = _metric_or_400(metric)
        points = store.window(farm_id, kind, from_ts, to_ts)
        return {
            "metric": metric,
            "points": [
                {"ts": p.timestamp, "value": p.value, "node_id": p.node_id, "seq": p.seq}
                for p in points
            ],
        }

    @app.get("/v1/farms/{farm_id}/trend")
    def trend(farm_id: str, metric: str, days: float = 7.0) -> dict:
        from .datastore import InsufficientData

        _farm_or_404(farm_id)
        kind = _metric_or_400(metric)
        try:
            report = store.detect_trend(farm_id, kind, days)
        except InsufficientData as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "metric": metric,
            "window_days": report.window_days,
            "slope_per_day": report.slope,
            "intercept": report.intercept,
            "flag": report.flag,
        }

    @app.get("/v1/farms/{farm_id}/alerts")
    def farm_alerts(farm_id: str) -> dict:
        _farm_or_404(farm_id)
        return {"alerts": store.alerts(farm_id)}

    @app.get("/v1/citations")
    def resolve_citation(kind: str, id: str) -> dict:
        """Resolution service for the UI's citation chips; keeps lookup
        logic server-side."""
        kb: KnowledgeBase = runtime["kb"]
        if kind == "reading":
            node_id, _, seq = id.rpartition(":")
            reading = store.get_reading(node_id, int(seq)) if seq.isdigit() else None
            if reading is None:
                raise HTTPException(status_code=404, detail="unknown reading")
            return {"kind": kind, "id": id, "reading": reading.to_wire()}
        if kind == "passage":
            from .knowledge import UnknownPassage

            try:
                passage = kb.get_by_ref(id)
            except UnknownPassage:
                raise HTTPException(status_code=404, detail="unknown passage")
            return {
                "kind": kind,
                "id": id,
                "passage": {
                    "citation": kb.cite(passage),
                    "title": passage.title,
                    "section": passage.section,
                    "text": passage.text,
                },
            }
        if kind == "forecast":
            record = store.get_forecast_record(id)
            if record is None:
                raise HTTPException(status_code=404, detail="unknown forecast")
            return {"kind": kind, "id": id, "forecast": record}
        raise HTTPException(status_code=400, detail=f"unknown citation kind {kind!r}")

    # -- admin / test hooks -----------------------------------------------------

    @app.post("/v1/admin/assign_node")
    def assign_node(body: AssignNodeRequest) -> dict:
        try:
            store.assign_node(body.node_id, body.farm_id)
        except UnknownFarm:
            raise HTTPException(status_code=404, detail="unknown farm")
        return {"node_id": body.node_id, "farm_id": body.farm_id}

    @app.post("/v1/admin/tick")
    def tick(body: TickRequest) -> dict:
        fired = runtime["scheduler"].tick(body.now)
        return {"summaries": [farm_id for farm_id, _ in fired]}

    if config.frontend_dir and Path(config.frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=config.frontend_dir, html=True), name="ui")

    return app


def _auto_farm(store: Store, node_id: str) -> str:
    """Readings from unassigned nodes are kept, not lost: they land in an
    auto-created holding farm until an operator assigns the node."""
    farm_id = f"auto-{node_id}"
    try:
        store.get_farm(farm_id)
    except UnknownFarm:
        from .datastore import FarmProfile

        store.register_farm(
            FarmProfile(
                farm_id=farm_id,
                phone=f"+0-{node_id}",
                language="en",
                crops=("unassigned",),
                location=(0.0, 0.0),
            ),
            stage="holding",
        )
    store.assign_node(node_id, farm_id)
    return farm_id
