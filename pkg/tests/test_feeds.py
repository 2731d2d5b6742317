from __future__ import annotations

import json
import statistics
from importlib import resources
from pathlib import Path

import httpx
import pytest

from farmsense.feeds import (
    CachedFeedsProvider,
    DailyForecast,
    ForecastWindow,
    LiveForecastProvider,
    PricePoint,
    PriceSeries,
    ProviderUnavailable,
    ReplayFeedsProvider,
    StaticFeedsProvider,
)

FIXTURES = Path(str(resources.files("farmsense").joinpath("fixtures/feeds")))
FARM_LOC = (31.5, 74.3)


@pytest.fixture
def replay() -> ReplayFeedsProvider:
    return ReplayFeedsProvider(FIXTURES)


class TestForecast:
    def test_horizon_two_gives_two_entries(self, replay):
        window = replay.get_forecast(FARM_LOC, 2)
        assert len(window.entries) == 2

    def test_fixture_round_trip(self, tmp_path):
        entries = [
            {"date": "2026-08-01", "rain_mm": 1.5, "t_min": 20.0, "t_max": 33.0},
            {"date": "2026-08-02", "rain_mm": 0.0, "t_min": 21.0, "t_max": 34.0},
        ]
        folder = tmp_path / "forecasts" / "10.0_20.0"
        folder.mkdir(parents=True)
        (folder / "2026-08-01.json").write_text(
            json.dumps({"issued_at": "2026-08-01", "entries": entries})
        )
        window = ReplayFeedsProvider(tmp_path).get_forecast((10.0, 20.0), 2)
        assert [vars(e) for e in window.entries] == entries
        assert window.issued_at == "2026-08-01"

    def test_zero_rain_week_sums_to_zero(self, replay):
        window = replay.get_forecast(FARM_LOC, 5)
        assert window.rain_sum() == 0.0

    def test_horizon_bounds_enforced(self, replay):
        with pytest.raises(ValueError):
            replay.get_forecast(FARM_LOC, 0)
        with pytest.raises(ValueError):
            replay.get_forecast(FARM_LOC, 15)

    def test_unknown_location_unavailable(self, replay):
        with pytest.raises(ProviderUnavailable):
            replay.get_forecast((0.0, 0.0), 2)

    def test_short_fixture_unavailable(self, replay):
        with pytest.raises(ProviderUnavailable):
            replay.get_forecast(FARM_LOC, 14)

    def test_non_contiguous_entries_rejected(self):
        with pytest.raises(ValueError, match="contiguous"):
            ForecastWindow(
                location=FARM_LOC,
                issued_at="2026-08-01",
                entries=(
                    DailyForecast("2026-08-01", 0.0, 20.0, 30.0),
                    DailyForecast("2026-08-03", 0.0, 20.0, 30.0),
                ),
            )

    def test_record_round_trip(self, replay):
        window = replay.get_forecast(FARM_LOC, 3)
        assert ForecastWindow.from_record(window.to_record()) == window


class TestPrices:
    def test_missing_fixture_gives_empty_series(self, replay):
        assert replay.get_prices("okra", 7).points == ()

    def test_seven_day_fixture(self, replay):
        series = replay.get_prices("sugarcane", 7)
        assert len(series.points) == 7
        dates = [p.date for p in series.points]
        assert dates == sorted(dates)

    def test_caller_slope_matches_least_squares_oracle(self, replay):
        series = replay.get_prices("sugarcane", 7)
        xs = list(range(len(series.points)))
        ys = [p.price for p in series.points]
        fit = statistics.linear_regression(xs, ys)
        # fixture rises 6 PKR/day by construction
        assert fit.slope == pytest.approx(6.0, rel=1e-9)

    def test_descending_points_rejected(self):
        with pytest.raises(ValueError, match="ascending"):
            PriceSeries(
                crop="x",
                points=(
                    PricePoint("2026-08-02", 1.0, "PKR"),
                    PricePoint("2026-08-01", 1.0, "PKR"),
                ),
            )


class TestLiveProvider:
    def _provider(self, handler) -> LiveForecastProvider:
        transport = httpx.MockTransport(handler)
        return LiveForecastProvider(
            "https://weather.test/v1/forecast", client=httpx.Client(transport=transport)
        )

    def test_normalizes_daily_payload(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(
                200,
                json={
                    "daily": {
                        "time": ["2026-08-01", "2026-08-02"],
                        "precipitation_sum": [0.0, 3.5],
                        "temperature_2m_min": [21.0, 22.0],
                        "temperature_2m_max": [35.0, 36.0],
                    }
                },
            )

        window = self._provider(handler).get_forecast(FARM_LOC, 2)
        assert window.entries[1] == DailyForecast("2026-08-02", 3.5, 22.0, 36.0)

    def test_http_error_maps_to_unavailable(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(503)

        with pytest.raises(ProviderUnavailable):
            self._provider(handler).get_forecast(FARM_LOC, 2)

    def test_malformed_payload_maps_to_unavailable(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(200, json={"nope": 1})

        with pytest.raises(ProviderUnavailable):
            self._provider(handler).get_forecast(FARM_LOC, 2)


class TestCache:
    def test_second_call_within_ttl_hits_cache(self):
        inner = StaticFeedsProvider(
            forecast=ForecastWindow(
                location=FARM_LOC,
                issued_at="2026-08-01",
                entries=(DailyForecast("2026-08-01", 0.0, 20.0, 30.0),) * 1,
            )
        )
        t = [0.0]
        cached = CachedFeedsProvider(inner, ttl_s=900.0, clock=lambda: t[0])
        cached.get_forecast(FARM_LOC, 1)
        cached.get_forecast(FARM_LOC, 1)
        assert inner.forecast_calls == 1
        t[0] = 901.0
        cached.get_forecast(FARM_LOC, 1)
        assert inner.forecast_calls == 2
