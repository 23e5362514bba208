"""Region-local carbon-intensity providers and the provider registry.

Supported regions each get a client for their national API; everywhere
else falls back to a static average shipped as a data file. New regions
are added by registering a provider factory against a country code.
"""

from __future__ import annotations

import json
import logging
from datetime import datetime, timedelta, timezone
from importlib import resources
from typing import Callable, Mapping, Protocol

from .http import Transport
from .types import CarbonIntensity, ForecastWindow, IntensityForecast, IntensitySource

logger = logging.getLogger("wattprint.intensity")

DK_ENDPOINT = "https://api.energidataservice.dk/dataset/CO2Emis"
GB_ENDPOINT = "https://api.carbonintensity.org.uk"


def _parse_iso(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


class IntensityProvider(Protocol):
    region: str
    name: str

    def current(self, now: datetime) -> CarbonIntensity: ...

    def forecast(self, now: datetime, horizon_s: float) -> IntensityForecast: ...


class DanishEnergyDataProvider:
    """Client for the Danish national energy data service.

    The CO2 prognosis dataset returns a record list with one value in
    gCO2/kWh per 5-minute window, covering both recent history and the
    near future, so the same dataset serves current and forecast reads.
    """

    region = "DK"
    name = "energidataservice"
    window_s = 300.0

    def __init__(
        self,
        transport: Transport,
        endpoint: str = DK_ENDPOINT,
        price_area: str = "DK2",
    ):
        self._transport = transport
        self._endpoint = endpoint
        self._price_area = price_area

    def _records(self, start: datetime, end: datetime) -> list[tuple[float, float]]:
        params = {
            "start": start.strftime("%Y-%m-%dT%H:%M"),
            "end": end.strftime("%Y-%m-%dT%H:%M"),
            "sort": "Minutes5UTC ASC",
        }
        payload = self._transport.get_json(self._endpoint, params=params)
        records = []
        for record in payload["records"]:
            area = record.get("PriceArea")
            if area is not None and area != self._price_area:
                continue
            stamp = _parse_iso(record["Minutes5UTC"]).timestamp()
            records.append((stamp, float(record["CO2Emission"])))
        records.sort()
        return records

    def current(self, now: datetime) -> CarbonIntensity:
        records = self._records(now - timedelta(hours=1), now + timedelta(minutes=10))
        if not records:
            raise ValueError("no CO2 prognosis records returned")
        stamp = now.timestamp()
        best = records[0]
        for record in records:
            if record[0] <= stamp:
                best = record
        return CarbonIntensity(
            value=best[1], region=self.region, fetched_at=now, source=IntensitySource.REALTIME
        )

    def forecast(self, now: datetime, horizon_s: float) -> IntensityForecast:
        records = self._records(now, now + timedelta(seconds=horizon_s))
        windows = [
            ForecastWindow(start=stamp, end=stamp + self.window_s, value=value)
            for stamp, value in records
        ]
        if not windows:
            raise ValueError("no forecast records returned")
        return IntensityForecast(windows=tuple(windows))


class BritishGridProvider:
    """Client for the national carbon-intensity service of Great Britain.

    Entries are half-hourly, each carrying a forecast value and, for
    past windows, the actual measured value.
    """

    region = "GB"
    name = "carbonintensity-gb"

    def __init__(self, transport: Transport, endpoint: str = GB_ENDPOINT):
        self._transport = transport
        self._endpoint = endpoint.rstrip("/")

    @staticmethod
    def _stamp(dt: datetime) -> str:
        return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%MZ")

    def current(self, now: datetime) -> CarbonIntensity:
        payload = self._transport.get_json(f"{self._endpoint}/intensity")
        entry = payload["data"][0]
        intensity = entry["intensity"]
        value = intensity.get("actual")
        if value is None:
            value = intensity["forecast"]
        return CarbonIntensity(
            value=float(value),
            region=self.region,
            fetched_at=now,
            source=IntensitySource.REALTIME,
        )

    def forecast(self, now: datetime, horizon_s: float) -> IntensityForecast:
        until = now + timedelta(seconds=horizon_s)
        payload = self._transport.get_json(
            f"{self._endpoint}/intensity/{self._stamp(now)}/{self._stamp(until)}"
        )
        windows = []
        for entry in payload["data"]:
            value = entry["intensity"].get("forecast")
            if value is None:
                value = entry["intensity"].get("actual")
            if value is None:
                continue
            windows.append(
                ForecastWindow(
                    start=_parse_iso(entry["from"]).timestamp(),
                    end=_parse_iso(entry["to"]).timestamp(),
                    value=float(value),
                )
            )
        if not windows:
            raise ValueError("no forecast entries returned")
        windows.sort(key=lambda w: w.start)
        return IntensityForecast(windows=tuple(windows))


ProviderFactory = Callable[[Transport, Mapping[str, str]], IntensityProvider]

_REGISTRY: dict[str, ProviderFactory] = {}


def register_provider(country_code: str, factory: ProviderFactory) -> None:
    """Register a provider factory for a country code (upper-cased)."""
    _REGISTRY[country_code.upper()] = factory


register_provider(
    "DK", lambda transport, endpoints: DanishEnergyDataProvider(
        transport, endpoint=endpoints.get("dk", DK_ENDPOINT)
    )
)
register_provider(
    "GB", lambda transport, endpoints: BritishGridProvider(
        transport, endpoint=endpoints.get("gb", GB_ENDPOINT)
    )
)


def provider_for(
    country_code: str,
    transport: Transport,
    endpoints: Mapping[str, str] | None = None,
) -> IntensityProvider | None:
    factory = _REGISTRY.get(country_code.upper())
    if factory is None:
        return None
    return factory(transport, endpoints or {})


def load_default_average() -> tuple[float, str, dict]:
    """The static fallback intensity shipped with the package.

    Returns (value in gCO2eq/kWh, region label, full citation record).
    """
    payload = json.loads(
        resources.files("wattprint.intensity").joinpath("data/default_average.json").read_text()
    )
    return float(payload["value_gco2eq_per_kwh"]), str(payload["region"]), payload


def default_intensity(now: datetime) -> CarbonIntensity:
    value, region, _ = load_default_average()
    return CarbonIntensity(
        value=value, region=region, fetched_at=now, source=IntensitySource.DEFAULT_AVERAGE
    )
