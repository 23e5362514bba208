"""Linear extrapolation of duration, energy, and emissions after a few epochs.

The model is deliberately simple: per-epoch means of the monitored
epochs, scaled to the full epoch count. Emissions use the time-weighted
forecast intensity over the remaining predicted duration, since the
grid's intensity during the not-yet-run part of the job is what the
predicted energy will be converted at.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .energy import JOULES_PER_KWH, EpochRecord, PueConfig
from .intensity.types import CarbonIntensity, IntensityForecast, average_over, value_at


@dataclass(frozen=True, slots=True)
class Prediction:
    """Forecast totals for the full run."""

    total_epochs: int
    monitored_epochs: int
    predicted_duration: float  # seconds
    predicted_energy: float  # kWh
    predicted_intensity: float  # gCO2eq/kWh
    predicted_emissions: float  # gCO2eq

    def __post_init__(self):
        for name in ("predicted_duration", "predicted_energy", "predicted_intensity",
                     "predicted_emissions"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def predict(
    epochs: Sequence[EpochRecord],
    total_epochs: int,
    pue: PueConfig | float,
    forecast: IntensityForecast | None = None,
    current: CarbonIntensity | None = None,
    now: float = 0.0,
    exclude_first: bool = False,
) -> Prediction:
    """Extrapolate the monitored epochs to ``total_epochs``.

    ``now`` is a point on the forecast's time axis; the predicted
    intensity is the forecast's time-weighted mean over
    [now, now + remaining predicted duration]. An empty or missing
    forecast uses ``current`` flat. ``exclude_first`` drops epoch 0 from
    the per-epoch means (its energy is often unrepresentative) whenever
    at least two epochs were monitored.

    Raises:
        ValueError: no epochs, total_epochs < monitored, or neither
            forecast nor current intensity given.
    """
    if not epochs:
        raise ValueError("cannot predict from zero monitored epochs")
    monitored = len(epochs)
    if total_epochs < monitored:
        raise ValueError(
            f"total_epochs ({total_epochs}) < monitored epochs ({monitored})"
        )
    multiplier = pue.pue if isinstance(pue, PueConfig) else float(pue)

    fit = epochs[1:] if exclude_first and monitored >= 2 else epochs
    mean_duration = sum(e.duration for e in fit) / len(fit)
    mean_energy_j = sum(e.total_energy_j for e in fit) / len(fit)

    predicted_duration = mean_duration * total_epochs
    predicted_energy = multiplier * ((mean_energy_j * total_epochs) / JOULES_PER_KWH)

    elapsed = sum(e.duration for e in epochs)
    remaining = predicted_duration - elapsed

    if forecast is not None and forecast.windows:
        if remaining > 0:
            predicted_intensity = average_over(forecast, now, now + remaining)
        else:
            predicted_intensity = value_at(forecast, now)
    elif current is not None:
        predicted_intensity = current.value
    else:
        raise ValueError("need a forecast or a current intensity to predict emissions")

    return Prediction(
        total_epochs=total_epochs,
        monitored_epochs=monitored,
        predicted_duration=predicted_duration,
        predicted_energy=predicted_energy,
        predicted_intensity=predicted_intensity,
        predicted_emissions=predicted_energy * predicted_intensity,
    )
