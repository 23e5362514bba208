"""Intensity fetching with caching and graceful degradation.

The tracker must never see an exception from here: provider or network
failures first fall back to the last successful value (for up to two
refresh periods), then to the static default average.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Mapping

from .http import HttpTransport, Transport
from .providers import default_intensity, provider_for
from .types import (
    CarbonIntensity,
    ForecastWindow,
    GeoLocation,
    IntensityForecast,
)

logger = logging.getLogger("wattprint.intensity")

DEFAULT_REFRESH_PERIOD = 900.0  # seconds between intensity fetches
CACHE_GRACE_PERIODS = 2  # reuse a stale value for this many refresh periods


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class IntensitySnapshot:
    """What the intensity worker publishes to the tracker."""

    current: CarbonIntensity
    forecast: IntensityForecast


class IntensityService:
    """Resolves current and forecasted intensity for one location."""

    def __init__(
        self,
        location: GeoLocation,
        transport: Transport | None = None,
        endpoints: Mapping[str, str] | None = None,
        refresh_period: float = DEFAULT_REFRESH_PERIOD,
        wall_clock: Callable[[], datetime] = _utc_now,
    ):
        self.location = location
        self._transport = transport if transport is not None else HttpTransport()
        self._provider = provider_for(location.country_code, self._transport, endpoints)
        self._refresh_period = refresh_period
        self._wall = wall_clock
        self._cached: CarbonIntensity | None = None
        self._cached_at: datetime | None = None

    def fetch_current(self) -> CarbonIntensity:
        """Current intensity for this location. Never raises.

        Regions without a registered provider get the default average;
        provider failures reuse the cached value while it is fresh
        enough, then degrade to the default average.
        """
        now = self._wall()
        if self._provider is None:
            return default_intensity(now)
        try:
            result = self._provider.current(now)
        except Exception as exc:
            logger.warning(
                "intensity fetch for %s failed: %s", self.location.country_code, exc
            )
            return self._fallback(now)
        self._cached = result
        self._cached_at = now
        return result

    def _fallback(self, now: datetime) -> CarbonIntensity:
        if self._cached is not None and self._cached_at is not None:
            age = (now - self._cached_at).total_seconds()
            if age <= CACHE_GRACE_PERIODS * self._refresh_period:
                logger.warning("reusing intensity fetched %.0f s ago", age)
                return self._cached
        logger.warning("falling back to the default average intensity")
        return default_intensity(now)

    def fetch_forecast(self, horizon_s: float) -> IntensityForecast:
        """Forecast covering the next ``horizon_s`` seconds. Never raises.

        Providers without forecasts, and any failure, yield one flat
        window at the current intensity (itself possibly cached or
        default).

        Raises:
            ValueError: horizon_s <= 0 (a caller bug, not a fetch failure).
        """
        if horizon_s <= 0:
            raise ValueError(f"forecast horizon must be positive, got {horizon_s}")
        now = self._wall()
        if self._provider is not None:
            try:
                return self._provider.forecast(now, horizon_s)
            except Exception as exc:
                logger.warning(
                    "forecast fetch for %s failed: %s", self.location.country_code, exc
                )
        flat = self.fetch_current()
        start = now.timestamp()
        return IntensityForecast(
            windows=(ForecastWindow(start=start, end=start + horizon_s, value=flat.value),)
        )

    def snapshot(self, horizon_s: float) -> IntensitySnapshot:
        return IntensitySnapshot(
            current=self.fetch_current(), forecast=self.fetch_forecast(horizon_s)
        )


def fetch_current(
    location: GeoLocation,
    transport: Transport | None = None,
    endpoints: Mapping[str, str] | None = None,
) -> CarbonIntensity:
    """One-shot current intensity for a location. Never raises."""
    return IntensityService(location, transport=transport, endpoints=endpoints).fetch_current()


def fetch_forecast(
    location: GeoLocation,
    horizon_s: float,
    transport: Transport | None = None,
    endpoints: Mapping[str, str] | None = None,
) -> IntensityForecast:
    """One-shot forecast for a location; degrades like fetch_current."""
    return IntensityService(location, transport=transport, endpoints=endpoints).fetch_forecast(
        horizon_s
    )
