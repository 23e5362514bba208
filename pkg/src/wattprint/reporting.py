"""Emissions conversion and the human-readable consumption report.

The report block format is load-bearing: downstream tooling and the
golden tests lock it byte-for-byte, so formatting changes are breaking
changes. All numbers are kept at full precision internally and rounded
only at render time.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

# Average CO2 emissions of a newly registered EU car, 2018 fleet figure.
CAR_GCO2_PER_KM = 120.4


@dataclass(frozen=True, slots=True)
class ConversionFactors:
    car_gco2_per_km: float = CAR_GCO2_PER_KM

    def __post_init__(self):
        if self.car_gco2_per_km <= 0:
            raise ValueError("car_gco2_per_km must be positive")


def footprint(energy_kwh: float, intensity_gkwh: float) -> float:
    """Carbon footprint in gCO2eq: energy times grid intensity.

    Raises:
        ValueError: negative energy or non-positive intensity.
    """
    if energy_kwh < 0:
        raise ValueError(f"energy must be >= 0, got {energy_kwh}")
    if intensity_gkwh <= 0:
        raise ValueError(f"intensity must be > 0, got {intensity_gkwh}")
    return energy_kwh * intensity_gkwh


def to_km_by_car(emissions_g: float, factors: ConversionFactors | None = None) -> float:
    """Kilometres a new EU car would drive to emit ``emissions_g``."""
    if emissions_g < 0:
        raise ValueError(f"emissions must be >= 0, got {emissions_g}")
    factors = factors or ConversionFactors()
    return emissions_g / factors.car_gco2_per_km


def format_duration(seconds: float) -> str:
    """H:MM:SS with unpadded hours, e.g. 6894 s -> '1:54:54'."""
    total = int(round(seconds))
    hours, rest = divmod(total, 3600)
    minutes, secs = divmod(rest, 60)
    return f"{hours}:{minutes:02d}:{secs:02d}"


def compute_shares(energy_j: Mapping[str, float]) -> dict[str, float]:
    """Percentage of total energy per key; sums to 100 when total > 0."""
    total = sum(energy_j.values())
    if total <= 0:
        return {key: 0.0 for key in energy_j}
    return {key: 100.0 * value / total for key, value in energy_j.items()}


@dataclass(frozen=True, slots=True)
class FootprintReport:
    """Everything the consumption report shows, at full precision."""

    epochs: int
    duration_s: float
    energy_kwh: float
    emissions_g: float
    km_by_car: float
    intensity_gkwh: float
    intensity_source: str = ""
    location: str = ""
    device_energy_j: Mapping[str, float] = field(default_factory=dict)
    component_shares: Mapping[str, float] = field(default_factory=dict)


_KINDS = {"predicted": "Predicted", "actual": "Actual"}


def render_report(report: FootprintReport, kind: str) -> str:
    """The consumption block, exactly as printed and logged.

    ``kind`` is ``"predicted"`` or ``"actual"``. Detail lines are
    indented with a single tab.
    """
    try:
        heading = _KINDS[kind]
    except KeyError:
        raise ValueError(f"kind must be one of {sorted(_KINDS)}, got {kind!r}") from None
    return "\n".join(
        [
            f"{heading} consumption for {report.epochs} epoch(s):",
            f"\t{'Time:':<8}{format_duration(report.duration_s)}",
            f"\t{'Energy:':<8}{report.energy_kwh:.6f} kWh",
            f"\t{'CO2eq:':<8}{report.emissions_g:.6f} g",
            "\tThis is equivalent to:",
            f"\t{report.km_by_car:.6f} km travelled by car",
        ]
    )


_REPORT_RE = re.compile(
    r"(?P<kind>Predicted|Actual) consumption for (?P<epochs>\d+) epoch\(s\):\n"
    r"\tTime:\s+(?P<hours>\d+):(?P<minutes>\d{2}):(?P<seconds>\d{2})\n"
    r"\tEnergy:\s+(?P<energy>[\d.]+) kWh\n"
    r"\tCO2eq:\s+(?P<emissions>[\d.]+) g\n"
    r"\tThis is equivalent to:\n"
    r"\t(?P<km>[\d.]+) km travelled by car"
)


def parse_report(text: str) -> list[FootprintReport]:
    """Recover the numeric fields of every consumption block in ``text``.

    The inverse of render_report up to the 6-decimal rounding applied at
    render time; used for round-trip checks and post-hoc log scraping.
    """
    reports = []
    for match in _REPORT_RE.finditer(text):
        duration = (
            int(match["hours"]) * 3600 + int(match["minutes"]) * 60 + int(match["seconds"])
        )
        energy = float(match["energy"])
        emissions = float(match["emissions"])
        reports.append(
            FootprintReport(
                epochs=int(match["epochs"]),
                duration_s=float(duration),
                energy_kwh=energy,
                emissions_g=emissions,
                km_by_car=float(match["km"]),
                intensity_gkwh=emissions / energy if energy > 0 else 0.0,
            )
        )
    return reports
