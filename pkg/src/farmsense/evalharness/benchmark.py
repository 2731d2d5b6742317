"""Tiered benchmark handling: the 3 crops x 3 tiers x 11 items dataset
shape, a deterministic synthetic generator for the shipped fixture, and a
hermetic per-item answering pipeline (in-memory store, static feeds, mock
backend)."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..crops import CropBandBook
from ..datastore import ChatRecord, FarmProfile, Store
from ..feeds import DailyForecast, ForecastWindow, StaticFeedsProvider
from ..knowledge import KnowledgeBase
from ..llm import Backend, MockBackend
from ..pipeline import EnrichedContext, Orchestrator, StageRecord
from ..pipeline.types import AdvisoryReply
from ..telemetry import MetricKind, SensorReading

CROPS = ("maize", "sugarcane", "spinach")
TIERS = ("easy", "medium", "hard")
ITEMS_PER_CELL = 11
TOTAL_ITEMS = len(CROPS) * len(TIERS) * ITEMS_PER_CELL

BASE_TS = 1_700_000_000.0


class ShapeError(ValueError):
    def __init__(self, message: str, found_counts: dict):
        self.found_counts = found_counts
        super().__init__(f"{message}; found {found_counts}")


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    crop: str
    tier: str
    query: str
    sensor_context: dict  # {"readings": [wire records], "forecast": record | None}
    expected_facets: tuple[str, ...]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "crop": self.crop,
            "tier": self.tier,
            "query": self.query,
            "sensor_context": self.sensor_context,
            "expected_facets": list(self.expected_facets),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BenchmarkItem":
        return cls(
            id=rec["id"],
            crop=rec["crop"],
            tier=rec["tier"],
            query=rec["query"],
            sensor_context=rec["sensor_context"],
            expected_facets=tuple(rec.get("expected_facets", ())),
        )


def default_benchmark_path() -> Path:
    return Path(str(resources.files("farmsense").joinpath("fixtures/benchmark.ndjson")))


def load_benchmark(path: str | Path | None = None) -> list[BenchmarkItem]:
    """Load and shape-check the dataset: 11 items per (crop, tier), 99
    total, unique ids."""
    path = Path(path) if path is not None else default_benchmark_path()
    items = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                items.append(BenchmarkItem.from_record(json.loads(line)))
    counts: dict[str, int] = {}
    for item in items:
        counts[f"{item.crop}/{item.tier}"] = counts.get(f"{item.crop}/{item.tier}", 0) + 1
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise ShapeError("duplicate item ids", {"items": len(items)})
    expected = {f"{crop}/{tier}": ITEMS_PER_CELL for crop in CROPS for tier in TIERS}
    if counts != expected or len(items) != TOTAL_ITEMS:
        raise ShapeError("dataset shape must be 3 crops x 3 tiers x 11", counts)
    return items


def write_benchmark(items: list[BenchmarkItem], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for item in items:
            fh.write(json.dumps(item.to_record(), separators=(",", ":")) + "\n")


# -- synthetic generator ------------------------------------------------------

_BASELINES = {
    "maize": {"temperature": 26.0, "moisture": 48.0, "ph": 6.6, "ec": 700.0,
              "nitrogen": 140.0, "phosphorus": 45.0, "potassium": 170.0},
    "sugarcane": {"temperature": 29.0, "moisture": 58.0, "ph": 6.9, "ec": 900.0,
                  "nitrogen": 180.0, "phosphorus": 50.0, "potassium": 220.0},
    "spinach": {"temperature": 22.0, "moisture": 55.0, "ph": 6.8, "ec": 650.0,
                "nitrogen": 150.0, "phosphorus": 40.0, "potassium": 160.0},
}

_EASY_QUERIES = [
    ("What is the current soil moisture in my {crop} field?", "moisture", ["moisture"]),
    ("What is the soil temperature in my {crop} plot right now?", "temperature", ["temperature"]),
    ("What is the latest ph reading for my {crop}?", "ph", ["ph"]),
    ("What is the conductivity level in my {crop} field?", "ec", ["conductivity"]),
]

_MEDIUM_QUERIES = [
    ("Should I irrigate my {crop} today?", "irrigation", ["moisture", "rain"]),
    ("Given the dry weather ahead, when should I water my {crop}?", "irrigation", ["moisture", "rain"]),
    ("Do my readings mean my {crop} needs fertilizer this week?", "fertilizer", ["nitrogen"]),
    ("Is the coming rain enough for my {crop} or should I water anyway?", "irrigation", ["moisture", "rain"]),
]

_HARD_QUERIES = [
    ("Conductivity keeps climbing in my {crop} field; is salinity building up and what should I do?",
     "salinity", ["conductivity", "salinity"]),
    ("My {crop} looks weak and ph readings have been drifting down; is acidity the problem?",
     "acidity", ["ph", "lime"]),
    ("Moisture has been falling all week with no rain forecast; how urgent is irrigation for my {crop}?",
     "irrigation", ["moisture", "rain"]),
    ("Nitrogen readings dropped after the rains; does my {crop} need a top-up now?",
     "fertilizer", ["nitrogen"]),
]


def _reading_records(crop: str, idx: int, topic: str, tier: str) -> list[dict]:
    """Hourly readings over the last day, shaped so hard items show the
    trend the query asks about."""
    base = dict(_BASELINES[crop])
    node = f"bench-{crop[:3]}-{idx:02d}"
    records = []
    hours = 24
    for hour in range(hours):
        values = dict(base)
        wobble = ((idx * 7 + hour * 3) % 10 - 5) * 0.2
        values["temperature"] = base["temperature"] + wobble * 0.5
        if topic == "irrigation":
            values["moisture"] = max(18.0, base["moisture"] - 18.0 - 0.3 * hour + wobble)
        elif topic == "salinity" and tier == "hard":
            values["ec"] = base["ec"] + 40.0 * hour + wobble * 10
        elif topic == "acidity" and tier == "hard":
            values["ph"] = max(4.0, 5.6 - 0.04 * hour + wobble * 0.02)
        elif topic == "fertilizer":
            values["nitrogen"] = max(20.0, base["nitrogen"] - 60.0 - 1.5 * hour + wobble)
        else:
            values["moisture"] = base["moisture"] + wobble
        ts = BASE_TS + hour * 3600.0
        records.append(
            {
                "node_id": node,
                "seq": hour + 1,
                "ts": ts,
                "values": {k: round(float(v), 2) for k, v in values.items()},
            }
        )
    return records


def _forecast_record(crop: str, idx: int, topic: str) -> dict:
    rain = [0.0] * 5 if topic in ("irrigation", "salinity") else [0.0, 1.0 + idx % 3, 0.0, 2.0, 0.0]
    entries = [
        DailyForecast(f"2023-11-{15 + d:02d}", rain[d], 18.0 + idx % 4, 33.0 + idx % 3)
        for d in range(5)
    ]
    window = ForecastWindow(location=(31.5, 74.3), issued_at="2023-11-15", entries=tuple(entries))
    return window.to_record()


def generate_benchmark() -> list[BenchmarkItem]:
    items = []
    pools = {"easy": _EASY_QUERIES, "medium": _MEDIUM_QUERIES, "hard": _HARD_QUERIES}
    for crop in CROPS:
        for tier in TIERS:
            pool = pools[tier]
            for idx in range(ITEMS_PER_CELL):
                template, topic, facets = pool[idx % len(pool)]
                query = template.format(crop=crop)
                items.append(
                    BenchmarkItem(
                        id=f"{crop}-{tier}-{idx + 1:02d}",
                        crop=crop,
                        tier=tier,
                        query=query,
                        sensor_context={
                            "readings": _reading_records(crop, idx, topic, tier),
                            "forecast": _forecast_record(crop, idx, topic),
                        },
                        expected_facets=tuple([crop, *facets]),
                    )
                )
    return items


# -- hermetic per-item answering ------------------------------------------------


@dataclass
class EvalAnswer:
    item: BenchmarkItem
    reply: AdvisoryReply
    context: EnrichedContext | None
    stages: list[StageRecord]
    store: Store
    kb: KnowledgeBase
    elapsed_ms: float

    @property
    def text(self) -> str:
        return self.reply.text

    def context_texts(self) -> list[str]:
        return self.context.context_texts() if self.context is not None else []


class Answerer:
    """Answers benchmark items through the real pipeline against a fresh
    in-memory world per item; shared corpus index and backend."""

    def __init__(
        self,
        backend: Backend | None = None,
        kb: KnowledgeBase | None = None,
        bands: CropBandBook | None = None,
        stage_delay_s: float = 0.0,
    ):
        self.backend = backend or MockBackend()
        self.kb = kb or KnowledgeBase.build(
            str(resources.files("farmsense").joinpath("fixtures/corpus"))
        )
        self.bands = bands or CropBandBook.load()
        self.stage_delay_s = stage_delay_s

    def __call__(self, item: BenchmarkItem) -> EvalAnswer:
        started = time.perf_counter()
        store = Store()
        profile = FarmProfile(
            farm_id=f"bench-{item.id}",
            phone=f"+92300{abs(hash(item.id)) % 10_000_000:07d}",
            language="en",
            crops=(item.crop,),
            location=(31.5, 74.3),
        )
        store.register_farm(profile)
        last_ts = BASE_TS
        for record in item.sensor_context.get("readings", []):
            reading = SensorReading.from_wire(record)
            store.append_reading(profile.farm_id, reading)
            last_ts = max(last_ts, reading.timestamp)
        forecast_record = item.sensor_context.get("forecast")
        forecast = ForecastWindow.from_record(forecast_record) if forecast_record else None
        feeds = StaticFeedsProvider(forecast=forecast)
        orchestrator = Orchestrator(
            store, feeds, self.kb, self.backend, self.bands, sleep=lambda s: None
        )
        if self.stage_delay_s:
            time.sleep(self.stage_delay_s)
        inbound = ChatRecord(profile.farm_id, "inbound", last_ts + 60.0, item.query, "en")
        result = orchestrator.handle(inbound)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        return EvalAnswer(
            item=item,
            reply=result.reply,
            context=result.context,
            stages=result.stages,
            store=store,
            kb=self.kb,
            elapsed_ms=elapsed_ms,
        )
