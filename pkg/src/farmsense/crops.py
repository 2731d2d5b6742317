"""Per-crop acceptable metric intervals ("crop bands"), optionally
modified by growth stage. Shipped as a versioned config file so agronomy
reviewers can adjust thresholds without touching code."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .telemetry import VALID_RANGES, MetricKind

GROWTH_STAGES = ("germination", "vegetative", "maturity")
DEFAULT_STAGE = "vegetative"


class UnknownCrop(KeyError):
    """No band configuration exists for the crop."""


@dataclass(frozen=True)
class CropBand:
    """Acceptable interval per metric for one crop at one growth stage."""

    crop: str
    stage: str
    bands: dict[MetricKind, tuple[float, float]] = field(default_factory=dict)

    def interval(self, metric: MetricKind) -> tuple[float, float] | None:
        return self.bands.get(metric)


class CropBandBook:
    """Loads and serves crop bands from the versioned YAML config."""

    def __init__(self, crops: dict[str, dict]):
        self._crops = crops

    @classmethod
    def load(cls, path: str | Path | None = None) -> "CropBandBook":
        if path is None:
            text = (
                resources.files("farmsense")
                .joinpath("fixtures/crop_bands.yaml")
                .read_text()
            )
        else:
            text = Path(path).read_text()
        doc = yaml.safe_load(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported crop band config version {doc.get('version')!r}")
        crops = doc.get("crops", {})
        for crop, spec in crops.items():
            _validate_intervals(crop, spec)
            for stage, overrides in spec.get("stages", {}).items():
                if stage not in GROWTH_STAGES:
                    raise ValueError(f"unknown growth stage {stage!r} for crop {crop!r}")
                _validate_intervals(crop, overrides)
        return cls(crops)

    def crops(self) -> list[str]:
        return sorted(self._crops)

    def band_for(self, crop: str, stage: str | None = None) -> CropBand:
        stage = stage or DEFAULT_STAGE
        try:
            spec = self._crops[crop]
        except KeyError:
            raise UnknownCrop(crop) from None
        bands = {}
        for metric, interval in spec.items():
            if metric == "stages":
                continue
            bands[MetricKind(metric)] = (float(interval[0]), float(interval[1]))
        for metric, (lo, hi) in spec.get("stages", {}).get(stage, {}).items():
            bands[MetricKind(metric)] = (float(lo), float(hi))
        return CropBand(crop=crop, stage=stage, bands=bands)


def _validate_intervals(crop: str, spec: dict) -> None:
    for metric, interval in spec.items():
        if metric == "stages":
            continue
        kind = MetricKind(metric)
        lo, hi = float(interval[0]), float(interval[1])
        vlo, vhi = VALID_RANGES[kind]
        if not (vlo <= lo < hi <= vhi):
            raise ValueError(
                f"crop {crop!r} band for {metric} [{lo}, {hi}] must sit inside "
                f"the probe range [{vlo}, {vhi}]"
            )
