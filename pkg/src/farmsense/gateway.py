"""Store-and-forward gateway: aggregates node readings, rides out uplink
outages with a bounded ring buffer, and uplinks batches with
at-least-once, in-order delivery.

Delivery contract: the gateway may resend readings whose ack was lost;
receivers deduplicate by (node_id, seq). The buffer holds up to 72 hours
of readings per node (oldest evicted first), so any outage shorter than
that loses nothing.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Protocol

import httpx

from .crops import CropBand
from .telemetry import MetricKind, SensorReading

logger = logging.getLogger(__name__)

BUFFER_HORIZON_S = 72 * 3600.0

ROUTINE = "routine"
ELEVATED = "elevated"
ALERT = "alert"

_URGENCY_RANK = {ROUTINE: 0, ELEVATED: 1, ALERT: 2}


class UplinkUnavailable(RuntimeError):
    """The ingestion endpoint could not be reached or did not ack."""


class Uplink(Protocol):
    def send_batch(self, readings: list[SensorReading], now: float) -> dict[str, int]:
        """Deliver a batch; returns acked seq cursor per node_id."""
        ...


def buffer_capacity(sampling_interval_s: float, horizon_s: float = BUFFER_HORIZON_S) -> int:
    """Readings held per node to cover the buffering horizon."""
    return math.ceil(horizon_s / sampling_interval_s)


class GatewayBuffer:
    """Bounded per-node rings; iteration order is (timestamp, node_id, seq).

    capacity_readings applies per node so the 72-hour durability promise
    holds regardless of fleet size.
    """

    def __init__(self, capacity_readings: int):
        if capacity_readings <= 0:
            raise ValueError("capacity_readings must be positive")
        self.capacity_readings = capacity_readings
        self._rings: dict[str, deque[SensorReading]] = {}

    def __len__(self) -> int:
        return sum(len(ring) for ring in self._rings.values())

    def size_for(self, node_id: str) -> int:
        return len(self._rings.get(node_id, ()))

    def enqueue(self, reading: SensorReading) -> SensorReading | None:
        """Buffer the reading; returns the evicted oldest reading when the
        node's ring was full, else None."""
        ring = self._rings.setdefault(reading.node_id, deque())
        evicted = None
        if len(ring) >= self.capacity_readings:
            evicted = ring.popleft()
        ring.append(reading)
        return evicted

    def pending(self, last_acked: dict[str, int]) -> list[SensorReading]:
        """Unacked readings across all nodes, ordered by (ts, node_id, seq)."""
        out = [
            reading
            for node_id, ring in self._rings.items()
            for reading in ring
            if reading.seq > last_acked.get(node_id, 0)
        ]
        out.sort(key=lambda r: (r.timestamp, r.node_id, r.seq))
        return out

    def drop_acked(self, acked: dict[str, int]) -> None:
        for node_id, seq in acked.items():
            ring = self._rings.get(node_id)
            if not ring:
                continue
            while ring and ring[0].seq <= seq:
                ring.popleft()


@dataclass
class UplinkState:
    mode: str = "online"  # online | outage
    last_acked: dict[str, int] = field(default_factory=dict)
    retry_backoff_s: float = 5.0
    next_retry_at: float = 0.0

    def record_ack(self, node_id: str, seq: int) -> None:
        previous = self.last_acked.get(node_id, 0)
        self.last_acked[node_id] = max(previous, seq)


@dataclass
class TransmitSchedule:
    """Adaptive uplink cadence: shrink the interval as urgency rises, and
    back off toward the base interval when the link degrades (fewer,
    larger batches give a bad link fewer chances to waste energy)."""

    base_interval_s: float = 300.0
    min_interval_s: float = 30.0
    current_interval_s: float = 300.0
    urgency_class: str = ROUTINE

    def observe(self, urgency: str, link_quality: float = 1.0) -> bool:
        """Update cadence; returns True when an immediate flush is required."""
        self.urgency_class = urgency
        if urgency == ALERT:
            interval = self.min_interval_s
        elif urgency == ELEVATED:
            interval = self.base_interval_s / 2
        else:
            interval = self.base_interval_s
        if link_quality < 0.5:
            interval = min(self.base_interval_s, interval * 2)
        self.current_interval_s = min(self.base_interval_s, max(self.min_interval_s, interval))
        return urgency == ALERT


def classify_urgency(
    reading: SensorReading,
    crop_band: CropBand | None,
    band_margin_frac: float = 0.10,
) -> str:
    """Grade a reading against the crop band.

    alert: some metric sits outside its band by more than the margin
    (10% of band width); elevated: some metric is within the margin of a
    boundary; routine otherwise. Unknown crop (band None) is fail-safe
    routine.
    """
    if crop_band is None:
        return ROUTINE
    worst = ROUTINE
    for metric, (lo, hi) in crop_band.bands.items():
        value = reading.values.get(metric)
        if value is None:
            continue
        margin = band_margin_frac * (hi - lo)
        outside_by = max(lo - value, value - hi, 0.0)
        if outside_by > margin:
            return ALERT
        if min(abs(value - lo), abs(value - hi)) <= margin:
            worst = max(worst, ELEVATED, key=_URGENCY_RANK.get)
    return worst


@dataclass
class FlushReport:
    sent: int
    acked_through: dict[str, int]


class Gateway:
    """One intake writer and one flusher may run concurrently; all buffer
    and ack-state mutations happen under a single lock."""

    def __init__(
        self,
        uplink: Uplink,
        sampling_interval_s: float = 300.0,
        horizon_s: float = BUFFER_HORIZON_S,
        schedule: TransmitSchedule | None = None,
        backoff_base_s: float = 5.0,
        backoff_factor: float = 2.0,
        backoff_cap_s: float = 300.0,
    ):
        self.uplink = uplink
        self.buffer = GatewayBuffer(buffer_capacity(sampling_interval_s, horizon_s))
        self.state = UplinkState(retry_backoff_s=backoff_base_s)
        self.schedule = schedule or TransmitSchedule(
            base_interval_s=sampling_interval_s, current_interval_s=sampling_interval_s
        )
        self._backoff_base_s = backoff_base_s
        self._backoff_factor = backoff_factor
        self._backoff_cap_s = backoff_cap_s
        self._lock = threading.Lock()
        self._flush_asap = False
        self._last_flush_at: float | None = None
        self.evicted_count = 0

    def enqueue(
        self,
        reading: SensorReading,
        crop_band: CropBand | None = None,
        link_quality: float = 1.0,
    ) -> str:
        """Buffer a validated reading; returns its urgency class."""
        with self._lock:
            evicted = self.buffer.enqueue(reading)
            if evicted is not None:
                self.evicted_count += 1
                logger.debug("buffer full: evicted %s seq=%d", evicted.node_id, evicted.seq)
        urgency = classify_urgency(reading, crop_band)
        if self.schedule.observe(urgency, link_quality):
            self._flush_asap = True
        return urgency

    def flush_due(self, now: float) -> bool:
        if self._flush_asap:
            return True
        if self.state.mode == "outage":
            return now >= self.state.next_retry_at
        if self._last_flush_at is None:
            return True
        return now - self._last_flush_at >= self.schedule.current_interval_s

    def flush(self, now: float) -> FlushReport:
        """Send all contiguous unacked readings as one batch.

        Raises UplinkUnavailable after switching to outage mode and
        scheduling the backed-off retry; buffered readings stay put.
        """
        with self._lock:
            batch = self.buffer.pending(self.state.last_acked)
        self._last_flush_at = now
        self._flush_asap = False
        if not batch:
            return FlushReport(sent=0, acked_through=dict(self.state.last_acked))
        try:
            acks = self.uplink.send_batch(batch, now)
        except UplinkUnavailable:
            with self._lock:
                self.state.mode = "outage"
                self.state.next_retry_at = now + self.state.retry_backoff_s
                self.state.retry_backoff_s = min(
                    self._backoff_cap_s, self.state.retry_backoff_s * self._backoff_factor
                )
            logger.warning(
                "uplink unavailable; retry in %.0fs", self.state.next_retry_at - now
            )
            raise
        with self._lock:
            for node_id, seq in acks.items():
                self.state.record_ack(node_id, seq)
            self.buffer.drop_acked(self.state.last_acked)
            self.state.mode = "online"
            self.state.retry_backoff_s = self._backoff_base_s
        return FlushReport(sent=len(batch), acked_through=dict(acks))

    def maybe_flush(self, now: float) -> FlushReport | None:
        """Flush if due; outage errors are absorbed (retry is scheduled)."""
        if not self.flush_due(now):
            return None
        try:
            return self.flush(now)
        except UplinkUnavailable:
            return None


class InMemoryUplink:
    """Test/desk uplink: ingests batches with receiver-side dedup by
    (node_id, seq) and acks a per-node cursor. Failures are injectable."""

    def __init__(self):
        self.received: dict[str, dict[int, SensorReading]] = {}
        self.batches: list[list[SensorReading]] = []
        self.outages: list[tuple[float, float]] = []
        self.fail_next = 0
        self.drop_ack_next = 0

    def in_outage(self, now: float) -> bool:
        return any(lo <= now < hi for lo, hi in self.outages)

    def send_batch(self, readings: list[SensorReading], now: float) -> dict[str, int]:
        if self.fail_next > 0:
            self.fail_next -= 1
            raise UplinkUnavailable("injected failure")
        if self.in_outage(now):
            raise UplinkUnavailable(f"injected outage at t={now}")
        self.batches.append(list(readings))
        acks: dict[str, int] = {}
        for reading in readings:
            per_node = self.received.setdefault(reading.node_id, {})
            per_node.setdefault(reading.seq, reading)
            acks[reading.node_id] = max(acks.get(reading.node_id, 0), reading.seq)
        if self.drop_ack_next > 0:
            self.drop_ack_next -= 1
            raise UplinkUnavailable("injected ack loss")
        return acks

    def ordered(self, node_id: str) -> list[SensorReading]:
        return [self.received[node_id][seq] for seq in sorted(self.received.get(node_id, {}))]


class OutageInjectedUplink:
    """Test wrapper: the inner uplink is unreachable while virtual time
    sits inside any configured [start, end) window."""

    def __init__(self, inner: Uplink, windows: list[tuple[float, float]]):
        self.inner = inner
        self.windows = windows

    def send_batch(self, readings: list[SensorReading], now: float) -> dict[str, int]:
        if any(lo <= now < hi for lo, hi in self.windows):
            raise UplinkUnavailable(f"injected outage at t={now}")
        return self.inner.send_batch(readings, now)


class HttpUplink:
    """POSTs newline-delimited reading records to the ingestion endpoint;
    expects `{"acked": {node_id: seq, ...}}` back."""

    def __init__(self, endpoint: str, client: httpx.Client | None = None, timeout_s: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_s)

    def send_batch(self, readings: list[SensorReading], now: float) -> dict[str, int]:
        body = "\n".join(json.dumps(r.to_wire(), separators=(",", ":")) for r in readings)
        try:
            response = self._client.post(
                f"{self.endpoint}/v1/ingest",
                content=body.encode("utf-8"),
                headers={"content-type": "application/x-ndjson"},
            )
        except httpx.HTTPError as exc:
            raise UplinkUnavailable(str(exc)) from exc
        if response.status_code != 200:
            raise UplinkUnavailable(f"ingest returned {response.status_code}")
        acked = response.json().get("acked", {})
        return {str(node): int(seq) for node, seq in acked.items()}


def run_gateway(
    gateway: Gateway,
    readings: Iterable[SensorReading],
    band_for_node=None,
    final_flush: bool = True,
) -> dict:
    """Drive a gateway over a timestamp-ordered reading stream in virtual
    time (each reading's timestamp is "now"). Returns run counters."""
    count = 0
    urgencies = {ROUTINE: 0, ELEVATED: 0, ALERT: 0}
    last_ts = 0.0
    for reading in readings:
        band = band_for_node(reading.node_id) if band_for_node else None
        urgency = gateway.enqueue(reading, band)
        urgencies[urgency] += 1
        gateway.maybe_flush(reading.timestamp)
        last_ts = reading.timestamp
        count += 1
    if final_flush:
        now = last_ts + gateway.schedule.current_interval_s
        deadline = now + 100 * gateway._backoff_cap_s
        while gateway.buffer.pending(gateway.state.last_acked) and now < deadline:
            gateway.maybe_flush(now)
            now = max(
                now + gateway.schedule.current_interval_s,
                gateway.state.next_retry_at,
            )
    return {"readings": count, "urgencies": urgencies, "evicted": gateway.evicted_count}
