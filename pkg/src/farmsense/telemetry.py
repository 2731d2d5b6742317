"""Soil-probe node simulation: deterministic reading streams, a
distance-based delivery model for the local wireless link, and a node
energy estimator.

Each simulated node owns its RNG, so distinct nodes can be stepped
concurrently without shared state.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence, TextIO

import yaml


class MetricKind(str, Enum):
    """The seven metrics reported by the 7-in-1 soil probe."""

    temperature = "temperature"  # °C
    moisture = "moisture"        # %RH
    ph = "ph"                    # unitless
    ec = "ec"                    # µS/cm
    nitrogen = "nitrogen"        # mg/kg
    phosphorus = "phosphorus"    # mg/kg
    potassium = "potassium"      # mg/kg


#: Closed legal interval per metric; values outside are physically
#: impossible for the probe.
VALID_RANGES: dict[MetricKind, tuple[float, float]] = {
    MetricKind.temperature: (-40.0, 80.0),
    MetricKind.moisture: (0.0, 100.0),
    MetricKind.ph: (3.0, 9.0),
    MetricKind.ec: (0.0, 20000.0),
    MetricKind.nitrogen: (1.0, 2999.0),
    MetricKind.phosphorus: (1.0, 2999.0),
    MetricKind.potassium: (1.0, 2999.0),
}


class RangeViolation(ValueError):
    """A reading value is outside the probe's legal range.

    Callers should drop the reading and log; the simulator itself never
    produces these because synthesized values are clamped.
    """

    def __init__(self, metric: MetricKind, value: float):
        self.metric = metric
        self.value = value
        lo, hi = VALID_RANGES[metric]
        super().__init__(f"{metric.value}={value} outside legal range [{lo}, {hi}]")


class UnknownState(ValueError):
    """A power-schedule entry names a state the power model does not know."""


@dataclass(frozen=True)
class SensorReading:
    """One timestamped 7-metric measurement from one node."""

    node_id: str
    seq: int
    timestamp: float  # UTC seconds
    values: dict[MetricKind, float]

    def to_wire(self) -> dict:
        return {
            "node_id": self.node_id,
            "seq": self.seq,
            "ts": self.timestamp,
            "values": {k.value: v for k, v in self.values.items()},
        }

    @classmethod
    def from_wire(cls, record: dict) -> "SensorReading":
        return cls(
            node_id=record["node_id"],
            seq=int(record["seq"]),
            timestamp=float(record["ts"]),
            values={MetricKind(k): float(v) for k, v in record["values"].items()},
        )


def validate_reading(reading: SensorReading) -> None:
    """Raise RangeViolation for the first out-of-range metric, in enum order.

    Requires all seven metrics to be present.
    """
    for metric in MetricKind:
        if metric not in reading.values:
            raise ValueError(f"reading missing metric {metric.value}")
        value = reading.values[metric]
        lo, hi = VALID_RANGES[metric]
        if not (lo <= value <= hi):
            raise RangeViolation(metric, value)


@dataclass(frozen=True)
class LinkModel:
    """Piecewise-linear packet-delivery envelope for the node-gateway link.

    Delivery probability is p_max out to d_knee, declines linearly to
    0.90 at d_90, then to zero at d_cutoff.
    """

    p_max: float = 1.0
    d_knee: float = 100.0
    d_90: float = 425.0
    d_cutoff: float = 700.0
    p_90: float = 0.90

    def __post_init__(self):
        if not (0.0 < self.p_90 <= self.p_max <= 1.0):
            raise ValueError("require 0 < p_90 <= p_max <= 1")
        if not (self.d_knee < self.d_90 < self.d_cutoff):
            raise ValueError("require d_knee < d_90 < d_cutoff")


def delivery_probability(model: LinkModel, distance_m: float) -> float:
    """Packet delivery ratio at the given distance, in [0, 1]."""
    if distance_m < 0:
        raise ValueError("distance_m must be >= 0")
    if distance_m <= model.d_knee:
        return model.p_max
    if distance_m <= model.d_90:
        frac = (distance_m - model.d_knee) / (model.d_90 - model.d_knee)
        return model.p_max + frac * (model.p_90 - model.p_max)
    if distance_m <= model.d_cutoff:
        frac = (distance_m - model.d_90) / (model.d_cutoff - model.d_90)
        return model.p_90 * (1.0 - frac)
    return 0.0


@dataclass(frozen=True)
class PowerModel:
    """Per-state power draw in milliwatts."""

    tx_mw: float = 1030.0
    sense_mw: float = 115.0
    proc_mw: float = 482.0
    sleep_mw: float = 0.030

    def __post_init__(self):
        draws = (self.sleep_mw, self.sense_mw, self.proc_mw, self.tx_mw)
        if any(p <= 0 for p in draws):
            raise ValueError("all power draws must be strictly positive")
        if not (self.sleep_mw < self.sense_mw < self.proc_mw < self.tx_mw):
            raise ValueError("require sleep < sense < proc < tx power")

    def draw_mw(self, state: str) -> float:
        try:
            return {
                "tx": self.tx_mw,
                "sense": self.sense_mw,
                "proc": self.proc_mw,
                "sleep": self.sleep_mw,
            }[state]
        except KeyError:
            raise UnknownState(f"unknown power state {state!r}") from None


def estimate_energy(power: PowerModel, schedule: Sequence[tuple[str, float]]) -> float:
    """Energy in mWh for a (state, duration_s) schedule."""
    total_mws = 0.0
    for state, duration_s in schedule:
        if duration_s < 0:
            raise ValueError("durations must be >= 0")
        total_mws += power.draw_mw(state) * duration_s
    return total_mws / 3600.0


@dataclass(frozen=True)
class MetricProfile:
    """Baseline signal shape for one metric of one node."""

    baseline: float
    drift_per_day: float = 0.0
    noise_amp: float = 0.0


@dataclass
class NodeConfig:
    node_id: str
    rng_seed: int = 0
    sampling_interval_s: float = 300.0
    profiles: dict[MetricKind, MetricProfile] = field(default_factory=dict)

    def __post_init__(self):
        if self.sampling_interval_s <= 0:
            raise ValueError("sampling_interval_s must be > 0")
        defaults = _default_profiles()
        for metric in MetricKind:
            self.profiles.setdefault(metric, defaults[metric])


def _default_profiles() -> dict[MetricKind, MetricProfile]:
    return {
        MetricKind.temperature: MetricProfile(24.0, 0.0, 1.5),
        MetricKind.moisture: MetricProfile(55.0, 0.0, 3.0),
        MetricKind.ph: MetricProfile(6.8, 0.0, 0.1),
        MetricKind.ec: MetricProfile(900.0, 0.0, 40.0),
        MetricKind.nitrogen: MetricProfile(120.0, 0.0, 8.0),
        MetricKind.phosphorus: MetricProfile(45.0, 0.0, 4.0),
        MetricKind.potassium: MetricProfile(180.0, 0.0, 10.0),
    }


class NodeSimulator:
    """Steppable simulator for one probe node.

    Streams are bitwise reproducible from (seed, config, step count):
    values depend only on the node RNG and elapsed time, and are clamped
    into VALID_RANGES so every emitted reading passes validation.
    """

    def __init__(self, config: NodeConfig, start_time: float = 0.0):
        self.config = config
        self._rng = random.Random(config.rng_seed)
        self._seq = 0
        self._start_time = start_time
        self._last_emit: float | None = None

    @property
    def seq(self) -> int:
        return self._seq

    def next_reading(self, now: float) -> SensorReading:
        if self._last_emit is not None:
            min_now = self._last_emit + self.config.sampling_interval_s
            if now < min_now:
                raise ValueError(
                    f"next emission for {self.config.node_id} not due before {min_now}"
                )
        elapsed_days = (now - self._start_time) / 86400.0
        values: dict[MetricKind, float] = {}
        for metric in MetricKind:
            prof = self.config.profiles[metric]
            value = prof.baseline + prof.drift_per_day * elapsed_days
            if prof.noise_amp:
                value += self._rng.gauss(0.0, prof.noise_amp)
            lo, hi = VALID_RANGES[metric]
            values[metric] = min(hi, max(lo, value))
        self._seq += 1
        self._last_emit = now
        return SensorReading(self.config.node_id, self._seq, now, values)

    def stream(self, start: float, duration_s: float) -> Iterator[SensorReading]:
        """Emit readings at the sampling cadence over (start, start + duration]."""
        interval = self.config.sampling_interval_s
        t = start + interval
        while t <= start + duration_s:
            yield self.next_reading(t)
            t += interval


@dataclass
class Scenario:
    """Parsed scenario document: node fleet plus link model."""

    nodes: list[NodeConfig]
    link: LinkModel = field(default_factory=LinkModel)
    node_distances_m: dict[str, float] = field(default_factory=dict)
    start_time: float = 0.0


def load_scenario(path: str | Path) -> Scenario:
    doc = yaml.safe_load(Path(path).read_text())
    version = doc.get("version")
    if version != 1:
        raise ValueError(f"unsupported scenario version {version!r}")
    nodes = []
    distances: dict[str, float] = {}
    for entry in doc.get("nodes", []):
        profiles = {}
        for key, spec in entry.get("metrics", {}).items():
            profiles[MetricKind(key)] = MetricProfile(
                baseline=float(spec.get("baseline", 0.0)),
                drift_per_day=float(spec.get("drift_per_day", 0.0)),
                noise_amp=float(spec.get("noise_amp", 0.0)),
            )
        nodes.append(
            NodeConfig(
                node_id=str(entry["node_id"]),
                rng_seed=int(entry.get("seed", 0)),
                sampling_interval_s=float(entry.get("sampling_interval_s", 300)),
                profiles=profiles,
            )
        )
        if "distance_m" in entry:
            distances[str(entry["node_id"])] = float(entry["distance_m"])
    link_spec = doc.get("link", {})
    link = LinkModel(
        p_max=float(link_spec.get("p_max", 1.0)),
        d_knee=float(link_spec.get("d_knee", 100.0)),
        d_90=float(link_spec.get("d_90", 425.0)),
        d_cutoff=float(link_spec.get("d_cutoff", 700.0)),
    )
    return Scenario(
        nodes=nodes,
        link=link,
        node_distances_m=distances,
        start_time=float(doc.get("start_time", 0.0)),
    )


def run_scenario(scenario: Scenario, duration_s: float, out: TextIO) -> int:
    """Write every node's readings over the duration as newline-delimited
    JSON records, merge-ordered by (ts, node_id, seq). Returns the count."""
    readings: list[SensorReading] = []
    for config in scenario.nodes:
        sim = NodeSimulator(config, start_time=scenario.start_time)
        readings.extend(sim.stream(scenario.start_time, duration_s))
    readings.sort(key=lambda r: (r.timestamp, r.node_id, r.seq))
    for reading in readings:
        out.write(json.dumps(reading.to_wire(), separators=(",", ":")) + "\n")
    return len(readings)


def read_ndjson_readings(lines: Iterable[str]) -> Iterator[SensorReading]:
    for line in lines:
        line = line.strip()
        if line:
            yield SensorReading.from_wire(json.loads(line))
