"""Carbon-intensity values, forecasts, and time-weighted averaging."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from datetime import datetime

logger = logging.getLogger("wattprint.intensity")


class IntensitySource(enum.Enum):
    REALTIME = "realtime"
    FORECAST = "forecast"
    DEFAULT_AVERAGE = "default_average"


class ResolvedFrom(enum.Enum):
    IP_LOOKUP = "ip_lookup"
    OVERRIDE = "override"


@dataclass(frozen=True, slots=True)
class GeoLocation:
    """Where the compute is running, as far as we can tell."""

    country_code: str
    region_name: str = ""
    city: str = ""
    resolved_from: ResolvedFrom = ResolvedFrom.IP_LOOKUP

    def __post_init__(self):
        if not self.country_code:
            raise ValueError("country_code must be nonempty (use 'unknown')")

    @property
    def display(self) -> str:
        parts = [p for p in (self.city, self.region_name, self.country_code) if p]
        return ", ".join(parts)


@dataclass(frozen=True, slots=True)
class CarbonIntensity:
    """Grid carbon intensity in gCO2eq per kWh, with provenance."""

    value: float
    region: str
    fetched_at: datetime
    source: IntensitySource

    def __post_init__(self):
        if self.value <= 0:
            raise ValueError(f"carbon intensity must be positive, got {self.value}")


@dataclass(frozen=True, slots=True)
class ForecastWindow:
    start: float  # seconds (unix time for live providers)
    end: float
    value: float  # gCO2eq/kWh

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"window must end after it starts: {self.start} -> {self.end}")
        if self.value <= 0:
            raise ValueError(f"window value must be positive, got {self.value}")


@dataclass(frozen=True, slots=True)
class IntensityForecast:
    """Ordered, non-overlapping forecast windows on one time axis."""

    windows: tuple[ForecastWindow, ...]

    def __post_init__(self):
        for prev, curr in zip(self.windows, self.windows[1:]):
            if curr.start < prev.end:
                raise ValueError("forecast windows must be ordered and non-overlapping")

    def __bool__(self) -> bool:
        return bool(self.windows)

    @property
    def coverage(self) -> tuple[float, float]:
        if not self.windows:
            raise ValueError("empty forecast has no coverage")
        return self.windows[0].start, self.windows[-1].end


def value_at(forecast: IntensityForecast, when: float) -> float:
    """Forecast value at one instant; outside coverage, the nearest window."""
    if not forecast.windows:
        raise ValueError("empty forecast")
    for window in forecast.windows:
        if window.start <= when < window.end:
            return window.value
    if when < forecast.windows[0].start:
        return forecast.windows[0].value
    return forecast.windows[-1].value


def average_over(forecast: IntensityForecast, start: float, end: float) -> float:
    """Time-weighted mean forecast intensity over [start, end].

    The span is clamped to the forecast's coverage with a warning when it
    pokes outside; a span that misses the coverage entirely falls back to
    the nearest window's value. Gaps between windows carry no weight.

    Raises:
        ValueError: end <= start, or the forecast is empty.
    """
    if end <= start:
        raise ValueError(f"span must end after it starts: {start} -> {end}")
    if not forecast.windows:
        raise ValueError("empty forecast")

    lo, hi = forecast.coverage
    if start < lo or end > hi:
        logger.warning(
            "span [%s, %s] extends outside forecast coverage [%s, %s]; clamping",
            start,
            end,
            lo,
            hi,
        )
    span_start = max(start, lo)
    span_end = min(end, hi)
    if span_end <= span_start:
        return value_at(forecast, start)

    weighted = 0.0
    width = 0.0
    for window in forecast.windows:
        overlap = min(window.end, span_end) - max(window.start, span_start)
        if overlap > 0:
            weighted += window.value * overlap
            width += overlap
    if width == 0.0:  # span fell entirely in a gap
        return value_at(forecast, span_start)
    return weighted / width


def step_average(points: list[tuple[float, float]], start: float, end: float) -> float:
    """Time-weighted mean of a step series of (time, value) over [start, end].

    Each value holds from its own time until the next point's time; the
    first value also extends back to ``start``, the last forward to
    ``end``. Used to average the realized intensity samples a session
    recorded. A degenerate span returns the value in effect at ``start``.

    Raises:
        ValueError: no points.
    """
    if not points:
        raise ValueError("no points to average")
    points = sorted(points)
    if end <= start:
        current = points[0][1]
        for when, value in points:
            if when <= start:
                current = value
        return current
    weighted = 0.0
    for i, (when, value) in enumerate(points):
        seg_start = start if i == 0 else max(when, start)
        seg_end = end if i == len(points) - 1 else min(max(points[i + 1][0], start), end)
        if seg_end > seg_start:
            weighted += value * (seg_end - seg_start)
    return weighted / (end - start)
