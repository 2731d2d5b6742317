"""Weather-forecast and market-price feeds behind a provider interface:
a deterministic replay provider over on-disk fixtures for tests and desk
runs, and a live HTTP adapter. Provider failures surface as
ProviderUnavailable so the pipeline can retry or degrade; they never
crash it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from datetime import date as date_type
from datetime import timedelta
from pathlib import Path
from typing import Protocol

import httpx

MAX_HORIZON_DAYS = 14
CACHE_TTL_S = 15 * 60.0


class ProviderUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class DailyForecast:
    date: str  # ISO date
    rain_mm: float
    t_min: float
    t_max: float


@dataclass(frozen=True)
class ForecastWindow:
    location: tuple[float, float]
    issued_at: str  # ISO date
    entries: tuple[DailyForecast, ...]

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("forecast horizon must be >= 1 day")
        previous = None
        for entry in self.entries:
            current = date_type.fromisoformat(entry.date)
            if previous is not None and current != previous + timedelta(days=1):
                raise ValueError("forecast entries must be contiguous by date")
            previous = current

    @property
    def forecast_id(self) -> str:
        lat, lon = self.location
        return f"{lat:.1f},{lon:.1f}@{self.issued_at}"

    def rain_sum(self, days: int | None = None) -> float:
        entries = self.entries if days is None else self.entries[:days]
        return sum(e.rain_mm for e in entries)

    def to_record(self) -> dict:
        return {
            "forecast_id": self.forecast_id,
            "location": list(self.location),
            "issued_at": self.issued_at,
            "entries": [
                {"date": e.date, "rain_mm": e.rain_mm, "t_min": e.t_min, "t_max": e.t_max}
                for e in self.entries
            ],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "ForecastWindow":
        return cls(
            location=tuple(rec["location"]),
            issued_at=rec["issued_at"],
            entries=tuple(DailyForecast(**e) for e in rec["entries"]),
        )


@dataclass(frozen=True)
class PricePoint:
    date: str
    price: float
    currency: str


@dataclass(frozen=True)
class PriceSeries:
    crop: str
    points: tuple[PricePoint, ...]

    def __post_init__(self):
        dates = [p.date for p in self.points]
        if dates != sorted(dates):
            raise ValueError("price points must be date-ascending")


class FeedsProvider(Protocol):
    def get_forecast(self, location: tuple[float, float], horizon_days: int) -> ForecastWindow: ...

    def get_prices(self, crop: str, days: int) -> PriceSeries: ...


def _check_horizon(horizon_days: int) -> None:
    if not (1 <= horizon_days <= MAX_HORIZON_DAYS):
        raise ValueError(f"horizon_days must be in [1, {MAX_HORIZON_DAYS}]")


def location_key(location: tuple[float, float]) -> str:
    lat, lon = location
    return f"{lat:.1f}_{lon:.1f}"


class ReplayFeedsProvider:
    """Serves fixtures verbatim from a directory tree:

        <root>/forecasts/<lat>_<lon>/<issue-date>.json
        <root>/prices/<crop>.json

    Forecast lookups use the location rounded to 0.1 degrees and the most
    recent issue date on disk.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def get_forecast(self, location: tuple[float, float], horizon_days: int) -> ForecastWindow:
        _check_horizon(horizon_days)
        folder = self.root / "forecasts" / location_key(location)
        candidates = sorted(folder.glob("*.json"))
        if not candidates:
            raise ProviderUnavailable(f"no forecast fixture for {location_key(location)}")
        doc = json.loads(candidates[-1].read_text())
        entries = tuple(DailyForecast(**e) for e in doc["entries"])
        if len(entries) < horizon_days:
            raise ProviderUnavailable(
                f"fixture has {len(entries)} day(s); {horizon_days} requested"
            )
        return ForecastWindow(
            location=location,
            issued_at=doc["issued_at"],
            entries=entries[:horizon_days],
        )

    def get_prices(self, crop: str, days: int) -> PriceSeries:
        path = self.root / "prices" / f"{crop}.json"
        if not path.exists():
            return PriceSeries(crop=crop, points=())
        doc = json.loads(path.read_text())
        points = tuple(PricePoint(**p) for p in doc.get("points", []))
        return PriceSeries(crop=crop, points=points[-days:] if days else points)


class StaticFeedsProvider:
    """In-memory provider for tests and the evaluation harness."""

    def __init__(
        self,
        forecast: ForecastWindow | None = None,
        prices: dict[str, PriceSeries] | None = None,
        fail_forecasts: int = 0,
    ):
        self.forecast = forecast
        self.prices = prices or {}
        self.fail_forecasts = fail_forecasts
        self.forecast_calls = 0
        self.price_calls = 0

    def get_forecast(self, location: tuple[float, float], horizon_days: int) -> ForecastWindow:
        _check_horizon(horizon_days)
        self.forecast_calls += 1
        if self.fail_forecasts > 0:
            self.fail_forecasts -= 1
            raise ProviderUnavailable("injected forecast failure")
        if self.forecast is None:
            raise ProviderUnavailable("no forecast configured")
        if len(self.forecast.entries) < horizon_days:
            raise ProviderUnavailable("configured forecast too short")
        return ForecastWindow(
            location=location,
            issued_at=self.forecast.issued_at,
            entries=self.forecast.entries[:horizon_days],
        )

    def get_prices(self, crop: str, days: int) -> PriceSeries:
        self.price_calls += 1
        series = self.prices.get(crop)
        if series is None:
            return PriceSeries(crop=crop, points=())
        return PriceSeries(crop=crop, points=series.points[-days:] if days else series.points)


class LiveForecastProvider:
    """Adapter for an open-meteo-shaped daily forecast API. Any transport
    or shape problem maps to ProviderUnavailable."""

    def __init__(
        self,
        base_url: str,
        client: httpx.Client | None = None,
        timeout_s: float = 10.0,
        price_url: str | None = None,
        api_key: str | None = None,
    ):
        self.base_url = base_url
        self.price_url = price_url
        headers = {"authorization": f"Bearer {api_key}"} if api_key else None
        self._client = client or httpx.Client(timeout=timeout_s, headers=headers)

    def get_forecast(self, location: tuple[float, float], horizon_days: int) -> ForecastWindow:
        _check_horizon(horizon_days)
        lat, lon = location
        try:
            response = self._client.get(
                self.base_url,
                params={
                    "latitude": lat,
                    "longitude": lon,
                    "forecast_days": horizon_days,
                    "daily": "precipitation_sum,temperature_2m_min,temperature_2m_max",
                },
            )
            response.raise_for_status()
            daily = response.json()["daily"]
            entries = tuple(
                DailyForecast(
                    date=daily["time"][i],
                    rain_mm=float(daily["precipitation_sum"][i]),
                    t_min=float(daily["temperature_2m_min"][i]),
                    t_max=float(daily["temperature_2m_max"][i]),
                )
                for i in range(horizon_days)
            )
            return ForecastWindow(
                location=location, issued_at=daily["time"][0], entries=entries
            )
        except (httpx.HTTPError, KeyError, IndexError, ValueError, TypeError) as exc:
            raise ProviderUnavailable(f"live forecast failed: {exc}") from exc

    def get_prices(self, crop: str, days: int) -> PriceSeries:
        if self.price_url is None:
            return PriceSeries(crop=crop, points=())
        try:
            response = self._client.get(self.price_url, params={"crop": crop, "days": days})
            response.raise_for_status()
            points = tuple(PricePoint(**p) for p in response.json()["points"])
            return PriceSeries(crop=crop, points=points)
        except (httpx.HTTPError, KeyError, ValueError, TypeError) as exc:
            raise ProviderUnavailable(f"live prices failed: {exc}") from exc


class CachedFeedsProvider:
    """15-minute response cache keyed by the full request."""

    def __init__(self, inner: FeedsProvider, ttl_s: float = CACHE_TTL_S, clock=time.monotonic):
        self.inner = inner
        self.ttl_s = ttl_s
        self._clock = clock
        self._cache: dict[tuple, tuple[float, object]] = {}

    def _memo(self, key: tuple, compute):
        now = self._clock()
        hit = self._cache.get(key)
        if hit is not None and hit[0] > now:
            return hit[1]
        value = compute()
        self._cache[key] = (now + self.ttl_s, value)
        return value

    def get_forecast(self, location: tuple[float, float], horizon_days: int) -> ForecastWindow:
        key = ("forecast", location_key(location), horizon_days)
        return self._memo(key, lambda: self.inner.get_forecast(location, horizon_days))

    def get_prices(self, crop: str, days: int) -> PriceSeries:
        return self._memo(("prices", crop, days), lambda: self.inner.get_prices(crop, days))
