"""Shared fixtures: fixture transports, trace builders, session generators."""

from __future__ import annotations

import random
from datetime import datetime, timezone
from pathlib import Path

import pytest

from wattprint.devices import PowerSample
from wattprint.energy import close_epoch, total_energy
from wattprint.errors import TransportError
from wattprint.session_log import IntensityRecord, SessionLog, SessionSummary
from wattprint.intensity.types import step_average
from wattprint.reporting import to_km_by_car

FIXED_NOW = datetime(2020, 5, 21, 20, 0, 0, tzinfo=timezone.utc)


class FixtureTransport:
    """Serves canned JSON payloads by URL substring; records every call."""

    def __init__(self, routes: dict):
        self.routes = routes
        self.calls: list[tuple[str, dict | None]] = []

    def get_json(self, url, params=None):
        self.calls.append((url, dict(params) if params else None))
        for key, payload in self.routes.items():
            if key in url:
                if isinstance(payload, Exception):
                    raise payload
                if callable(payload):
                    return payload(url, params)
                return payload
        raise TransportError(f"no fixture for {url}")


class ExplodingTransport:
    """Fails in an unexpected way (not a TransportError)."""

    def get_json(self, url, params=None):
        raise RuntimeError("injected transport fault")


GB_CURRENT = {
    "data": [
        {
            "from": "2020-05-21T19:30Z",
            "to": "2020-05-21T20:00Z",
            "intensity": {"forecast": 205, "actual": 200, "index": "moderate"},
        }
    ]
}

DK_CURRENT = {
    "records": [
        {"Minutes5UTC": "2020-05-21T19:55:00", "PriceArea": "DK2", "CO2Emission": 54.09}
    ]
}

GEO_COPENHAGEN = {"country_code": "DK", "region": "Capital Region", "city": "Copenhagen"}


def gb_half_hourly(start: datetime, entries: int, values=None):
    """GB-style half-hourly forecast payload starting at ``start``."""
    from datetime import timedelta

    data = []
    for i in range(entries):
        lo = start + timedelta(minutes=30 * i)
        hi = lo + timedelta(minutes=30)
        value = values[i] if values else 100 + 10 * i
        data.append(
            {
                "from": lo.strftime("%Y-%m-%dT%H:%MZ"),
                "to": hi.strftime("%Y-%m-%dT%H:%MZ"),
                "intensity": {"forecast": value},
            }
        )
    return {"data": data}


def write_trace(path: Path, devices: list[tuple[str, str]], rows) -> Path:
    """Write a replay trace; rows are (timestamp, device_id, power)."""
    header = "devices: " + " ".join(f"{d}={k}" for d, k in devices)
    lines = [header] + [f"{t} {d} {p}" for t, d, p in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def constant_trace(path: Path, watts: float, steps: int, dt: float = 1.0,
                   device=("gpu0", "gpu")) -> Path:
    rows = [(i * dt, device[0], watts) for i in range(steps)]
    return write_trace(path, [device], rows)


@pytest.fixture
def fixed_wall():
    return lambda: FIXED_NOW


def make_epochs(power_series, duration=10.0, device="dev0"):
    """EpochRecords from one per-epoch average power each, via close_epoch."""
    records = []
    for i, watts in enumerate(power_series):
        start = i * duration
        samples = {
            device: [
                PowerSample(device, start + duration * 0.25, watts),
                PowerSample(device, start + duration * 0.75, watts),
            ]
        }
        records.append(close_epoch(samples, start, start + duration, index=i,
                                   previous=records[-1] if records else None))
    return records


def session_with_totals(seed: int, session_id: str, energy_kwh: float,
                        emissions_g: float) -> SessionLog:
    """A random session whose summary is pinned to the given totals."""
    session = random_session(random.Random(seed), session_id)
    session.summary = SessionSummary(
        measured_epochs=session.summary.measured_epochs,
        total_epochs=session.summary.total_epochs,
        duration_s=session.summary.duration_s,
        energy_kwh=energy_kwh,
        emissions_g=emissions_g,
        km_by_car=to_km_by_car(emissions_g),
        avg_intensity_gkwh=emissions_g / energy_kwh,
        pue=session.summary.pue,
        early_stop=False,
    )
    return session


def random_session(rng: random.Random, session_id: str) -> SessionLog:
    """A synthetic but internally consistent session for corpus tests."""
    n_devices = rng.randint(1, 3)
    devices = [f"dev{i}" for i in range(n_devices)]
    n_epochs = rng.randint(1, 8)
    pue = rng.choice([1.0, 1.125, 1.58, 1.67])
    records = []
    t = 0.0
    for index in range(n_epochs):
        duration = rng.uniform(5.0, 120.0)
        samples = {}
        for dev in devices:
            count = rng.randint(1, 6)
            samples[dev] = [
                PowerSample(dev, t + duration * (j + 0.5) / count, rng.uniform(5.0, 400.0))
                for j in range(count)
            ]
        records.append(
            close_epoch(samples, t, t + duration, index=index,
                        previous=records[-1] if records else None)
        )
        t += duration

    points = []
    clock = 0.0
    for _ in range(rng.randint(1, 4)):
        points.append((clock, rng.uniform(20.0, 600.0)))
        clock += rng.uniform(100.0, 900.0)
    intensity = [
        IntensityRecord(
            time=FIXED_NOW.isoformat(),
            monotonic=mono,
            value=value,
            source="realtime",
            region="DK",
        )
        for mono, value in points
    ]

    duration_total = sum(r.duration for r in records)
    energy_kwh = total_energy(records, pue)
    avg = step_average(points, points[0][0], max(points[-1][0], duration_total))
    emissions = energy_kwh * avg
    summary = SessionSummary(
        measured_epochs=n_epochs,
        total_epochs=n_epochs,
        duration_s=duration_total,
        energy_kwh=energy_kwh,
        emissions_g=emissions,
        km_by_car=to_km_by_car(emissions),
        avg_intensity_gkwh=avg,
        pue=pue,
        early_stop=False,
    )
    return SessionLog(
        session_id=session_id,
        started_at=FIXED_NOW.isoformat(),
        experiment="corpus",
        devices=[{"id": d, "kind": "gpu", "label": d, "backend": "replay"} for d in devices],
        config={"pue": pue},
        location={"country_code": "DK", "region_name": "", "city": "",
                  "resolved_from": "override"},
        epochs=records,
        intensity=intensity,
        prediction=None,
        summary=summary,
    )
