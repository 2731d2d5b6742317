"""Farm datastore: readings, profiles, chat logs, alerts, and cited
forecasts, persisted as append-only JSONL logs per stream and replayed on
open.

Layout (version 1) under the store root:

    layout_version            -- single line "1"
    profiles.jsonl            -- profile registration + stage-change events
    nodes.jsonl               -- node-to-farm assignment events
    forecasts.jsonl           -- forecast windows cited by replies/alerts
    farms/<farm_id>/readings.jsonl
    farms/<farm_id>/chat.jsonl
    farms/<farm_id>/alerts.jsonl

A store opened with root=None keeps everything in memory (used by tests
and the evaluation harness). Writes per farm are serialized behind one
lock; queries copy under the lock so readers never see torn windows.
"""

from __future__ import annotations

import json
import re
import statistics
import threading
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .telemetry import MetricKind, SensorReading

LAYOUT_VERSION = "1"

SUPPORTED_LANGUAGES = ("en", "ur", "pa", "sd")

#: |slope| at or below the threshold (units/day) counts as stable.
SLOPE_THRESHOLDS: dict[MetricKind, float] = {
    MetricKind.temperature: 1.0,
    MetricKind.moisture: 2.0,
    MetricKind.ph: 0.05,
    MetricKind.ec: 50.0,
    MetricKind.nitrogen: 20.0,
    MetricKind.phosphorus: 20.0,
    MetricKind.potassium: 20.0,
}

_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


class UnknownFarm(KeyError):
    pass


class DuplicatePhone(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class FarmProfile:
    farm_id: str
    phone: str  # E.164
    language: str
    crops: tuple[str, ...]
    location: tuple[float, float]  # (lat, lon)
    summary_times: tuple[str, ...] = ()  # local "HH:MM"
    growth_stage: str | None = None
    created_at: float = 0.0

    def __post_init__(self):
        if self.language not in SUPPORTED_LANGUAGES:
            raise ValueError(f"unsupported language {self.language!r}")
        if not _ID_RE.match(self.farm_id):
            raise ValueError(f"bad farm_id {self.farm_id!r}")

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["crops"] = list(self.crops)
        rec["location"] = list(self.location)
        rec["summary_times"] = list(self.summary_times)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "FarmProfile":
        return cls(
            farm_id=rec["farm_id"],
            phone=rec["phone"],
            language=rec["language"],
            crops=tuple(rec["crops"]),
            location=tuple(rec["location"]),
            summary_times=tuple(rec.get("summary_times", ())),
            growth_stage=rec.get("growth_stage"),
            created_at=rec.get("created_at", 0.0),
        )


@dataclass(frozen=True)
class ChatRecord:
    farm_id: str
    direction: str  # inbound | outbound
    timestamp: float
    body: str
    language: str
    kind: str = "text"  # text | voice
    citations: tuple[dict, ...] = ()  # outbound only

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["citations"] = list(self.citations)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ChatRecord":
        return cls(
            farm_id=rec["farm_id"],
            direction=rec["direction"],
            timestamp=rec["timestamp"],
            body=rec["body"],
            language=rec["language"],
            kind=rec.get("kind", "text"),
            citations=tuple(rec.get("citations", ())),
        )


@dataclass(frozen=True)
class TrendReport:
    metric: MetricKind
    window_days: float
    slope: float  # units/day
    intercept: float
    flag: str  # rising | falling | stable


@dataclass(frozen=True)
class SeriesPoint:
    timestamp: float
    value: float
    node_id: str
    seq: int


def aggregate(series: Iterable[SeriesPoint], op: str) -> float:
    values = [p.value for p in series]
    if not values:
        raise InsufficientData("empty series")
    ops: dict[str, Callable[[list[float]], float]] = {
        "mean": statistics.fmean,
        "min": min,
        "max": max,
    }
    try:
        return ops[op](values)
    except KeyError:
        raise ValueError(f"unknown aggregate op {op!r}") from None


@dataclass
class _FarmData:
    profile: FarmProfile
    stage: str
    readings: list[SensorReading] = field(default_factory=list)
    seen: set[tuple[str, int]] = field(default_factory=set)
    chat: list[ChatRecord] = field(default_factory=list)
    alerts: list[dict] = field(default_factory=list)


class Store:
    def __init__(self, root: str | Path | None = None):
        self._root = Path(root) if root is not None else None
        self._lock = threading.RLock()
        self._farms: dict[str, _FarmData] = {}
        self._phones: dict[str, str] = {}  # phone -> farm_id
        self._nodes: dict[str, str] = {}  # node_id -> farm_id
        self._reading_index: dict[tuple[str, int], SensorReading] = {}
        self._forecasts: dict[str, dict] = {}
        if self._root is not None:
            self._root.mkdir(parents=True, exist_ok=True)
            version_file = self._root / "layout_version"
            if version_file.exists():
                found = version_file.read_text().strip()
                if found != LAYOUT_VERSION:
                    raise ValueError(f"unsupported store layout {found!r}")
            else:
                version_file.write_text(LAYOUT_VERSION + "\n")
            self._replay()

    # -- persistence -------------------------------------------------

    def _append_line(self, relpath: str, record: dict) -> None:
        if self._root is None:
            return
        path = self._root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a") as fh:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    def _iter_lines(self, relpath: str) -> Iterable[dict]:
        if self._root is None:
            return
        path = self._root / relpath
        if not path.exists():
            return
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def _replay(self) -> None:
        for event in self._iter_lines("profiles.jsonl"):
            if event["event"] == "register":
                profile = FarmProfile.from_record(event["profile"])
                self._farms[profile.farm_id] = _FarmData(profile, event["stage"])
                self._phones[profile.phone] = profile.farm_id
            elif event["event"] == "stage":
                self._farms[event["farm_id"]].stage = event["stage"]
        for event in self._iter_lines("nodes.jsonl"):
            self._nodes[event["node_id"]] = event["farm_id"]
        for record in self._iter_lines("forecasts.jsonl"):
            self._forecasts[record["forecast_id"]] = record
        for farm_id, data in self._farms.items():
            for rec in self._iter_lines(f"farms/{farm_id}/readings.jsonl"):
                reading = SensorReading.from_wire(rec)
                data.readings.append(reading)
                data.seen.add((reading.node_id, reading.seq))
                self._reading_index[(reading.node_id, reading.seq)] = reading
            for rec in self._iter_lines(f"farms/{farm_id}/chat.jsonl"):
                data.chat.append(ChatRecord.from_record(rec))
            for rec in self._iter_lines(f"farms/{farm_id}/alerts.jsonl"):
                data.alerts.append(rec)

    # -- farms and nodes ----------------------------------------------

    def register_farm(self, profile: FarmProfile, stage: str = "active") -> None:
        with self._lock:
            if profile.phone in self._phones:
                raise DuplicatePhone(profile.phone)
            if profile.farm_id in self._farms:
                raise ValueError(f"farm {profile.farm_id!r} already registered")
            self._farms[profile.farm_id] = _FarmData(profile, stage)
            self._phones[profile.phone] = profile.farm_id
            self._append_line(
                "profiles.jsonl",
                {"event": "register", "stage": stage, "profile": profile.to_record()},
            )

    def get_farm(self, farm_id: str) -> FarmProfile:
        with self._lock:
            try:
                return self._farms[farm_id].profile
            except KeyError:
                raise UnknownFarm(farm_id) from None

    def farm_stage(self, farm_id: str) -> str:
        with self._lock:
            try:
                return self._farms[farm_id].stage
            except KeyError:
                raise UnknownFarm(farm_id) from None

    def set_farm_stage(self, farm_id: str, stage: str) -> None:
        with self._lock:
            if farm_id not in self._farms:
                raise UnknownFarm(farm_id)
            self._farms[farm_id].stage = stage
            self._append_line("profiles.jsonl", {"event": "stage", "farm_id": farm_id, "stage": stage})

    def farm_by_phone(self, phone: str) -> FarmProfile | None:
        with self._lock:
            farm_id = self._phones.get(phone)
            return self._farms[farm_id].profile if farm_id else None

    def list_farms(self) -> list[FarmProfile]:
        with self._lock:
            return [data.profile for data in self._farms.values()]

    def assign_node(self, node_id: str, farm_id: str) -> None:
        with self._lock:
            if farm_id not in self._farms:
                raise UnknownFarm(farm_id)
            self._nodes[node_id] = farm_id
            self._append_line("nodes.jsonl", {"node_id": node_id, "farm_id": farm_id})

    def farm_for_node(self, node_id: str) -> str | None:
        with self._lock:
            return self._nodes.get(node_id)

    # -- readings ------------------------------------------------------

    def append_reading(self, farm_id: str, reading: SensorReading) -> str:
        """Idempotent on (node_id, seq); returns "stored" or
        "duplicate_ignored". Stored readings are immutable."""
        with self._lock:
            data = self._farm(farm_id)
            key = (reading.node_id, reading.seq)
            if key in data.seen:
                return "duplicate_ignored"
            data.seen.add(key)
            data.readings.append(reading)
            self._reading_index[key] = reading
            self._append_line(f"farms/{farm_id}/readings.jsonl", reading.to_wire())
            return "stored"

    def reading_count(self, farm_id: str) -> int:
        with self._lock:
            return len(self._farm(farm_id).readings)

    def get_reading(self, node_id: str, seq: int) -> SensorReading | None:
        with self._lock:
            return self._reading_index.get((node_id, seq))

    def latest(self, farm_id: str, metric: MetricKind) -> tuple[float, float] | None:
        point = self.latest_point(farm_id, metric)
        return (point.timestamp, point.value) if point else None

    def latest_point(self, farm_id: str, metric: MetricKind) -> SeriesPoint | None:
        with self._lock:
            best: SensorReading | None = None
            for reading in self._farm(farm_id).readings:
                if metric not in reading.values:
                    continue
                if best is None or reading.timestamp > best.timestamp:
                    best = reading
            if best is None:
                return None
            return SeriesPoint(best.timestamp, best.values[metric], best.node_id, best.seq)

    def window(
        self, farm_id: str, metric: MetricKind, from_ts: float, to_ts: float
    ) -> list[SeriesPoint]:
        """Time-ordered series over [from_ts, to_ts)."""
        with self._lock:
            points = [
                SeriesPoint(r.timestamp, r.values[metric], r.node_id, r.seq)
                for r in self._farm(farm_id).readings
                if metric in r.values and from_ts <= r.timestamp < to_ts
            ]
        points.sort(key=lambda p: (p.timestamp, p.node_id, p.seq))
        return points

    def detect_trend(
        self,
        farm_id: str,
        metric: MetricKind,
        window_days: float,
        now: float | None = None,
    ) -> TrendReport:
        """OLS slope in units/day over the trailing window."""
        if now is None:
            now = self._max_ts(farm_id)
        points = self.window(farm_id, metric, now - window_days * 86400.0, now + 1e-6)
        if len(points) < 2:
            raise InsufficientData(
                f"{metric.value}: {len(points)} point(s) in last {window_days} day(s)"
            )
        xs = [p.timestamp / 86400.0 for p in points]
        ys = [p.value for p in points]
        try:
            fit = statistics.linear_regression(xs, ys)
        except statistics.StatisticsError as exc:
            raise InsufficientData(str(exc)) from exc
        threshold = SLOPE_THRESHOLDS[metric]
        if fit.slope > threshold:
            flag = "rising"
        elif fit.slope < -threshold:
            flag = "falling"
        else:
            flag = "stable"
        return TrendReport(metric, window_days, fit.slope, fit.intercept, flag)

    def _max_ts(self, farm_id: str) -> float:
        with self._lock:
            readings = self._farm(farm_id).readings
            return max((r.timestamp for r in readings), default=0.0)

    # -- chat ------------------------------------------------------------

    def append_chat(self, record: ChatRecord) -> None:
        with self._lock:
            data = self._farm(record.farm_id)
            if data.chat and record.timestamp < data.chat[-1].timestamp:
                raise ValueError("chat timestamps must be non-decreasing per farm")
            data.chat.append(record)
            self._append_line(f"farms/{record.farm_id}/chat.jsonl", record.to_record())

    def last_chat_ts(self, farm_id: str) -> float | None:
        with self._lock:
            chat = self._farm(farm_id).chat
            return chat[-1].timestamp if chat else None

    def recent_chat(self, farm_id: str, days: float = 7.0, now: float | None = None) -> list[ChatRecord]:
        """Chat records from the trailing window, oldest first."""
        with self._lock:
            chat = list(self._farm(farm_id).chat)
        if now is None:
            now = max((c.timestamp for c in chat), default=0.0)
        cutoff = now - days * 86400.0
        return [c for c in chat if c.timestamp >= cutoff]

    # -- alerts -----------------------------------------------------------

    def append_alert(self, farm_id: str, alert: dict) -> None:
        with self._lock:
            self._farm(farm_id).alerts.append(alert)
            self._append_line(f"farms/{farm_id}/alerts.jsonl", alert)

    def alerts(self, farm_id: str) -> list[dict]:
        with self._lock:
            return list(self._farm(farm_id).alerts)

    def last_alert_at(self, farm_id: str, metric: str) -> float | None:
        with self._lock:
            times = [
                a["created_at"]
                for a in self._farm(farm_id).alerts
                if a.get("metric") == metric
            ]
            return max(times) if times else None

    # -- forecasts cited by replies ----------------------------------------

    def archive_forecast(self, record: dict) -> None:
        with self._lock:
            if record["forecast_id"] in self._forecasts:
                return
            self._forecasts[record["forecast_id"]] = record
            self._append_line("forecasts.jsonl", record)

    def get_forecast_record(self, forecast_id: str) -> dict | None:
        with self._lock:
            return self._forecasts.get(forecast_id)

    def _farm(self, farm_id: str) -> _FarmData:
        try:
            return self._farms[farm_id]
        except KeyError:
            raise UnknownFarm(farm_id) from None
