"""Per-epoch power averaging and total-energy accounting.

The total energy of a run is the facility-overhead multiplier times the
sum over epochs and devices of average power times epoch duration. Only
the per-device epoch averages matter downstream, so interval-average
samples (from energy counters) and instantaneous samples (from GPUs)
are aggregated identically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .devices import PowerSample
from .errors import NoMeasurementsError

logger = logging.getLogger("wattprint.energy")

JOULES_PER_KWH = 3.6e6

# Global average data-center overhead ratio for 2018; the 2019 average,
# 1.67, is a documented alternative.
DEFAULT_PUE = 1.58
PUE_GLOBAL_AVERAGE_2018 = 1.58
PUE_GLOBAL_AVERAGE_2019 = 1.67


@dataclass(frozen=True, slots=True)
class PueConfig:
    """Facility power-usage-effectiveness multiplier, >= 1."""

    pue: float = DEFAULT_PUE

    def __post_init__(self):
        if self.pue < 1.0:
            raise ValueError(f"PUE must be >= 1.0, got {self.pue}")


@dataclass(frozen=True, slots=True)
class EpochRecord:
    """Duration and per-device average power/energy of one epoch.

    ``energy[d]`` always equals ``avg_power[d] * duration``; device ids
    listed in ``carried`` had no samples this epoch and reuse the
    previous epoch's average.
    """

    index: int
    start: float
    end: float
    duration: float
    avg_power: Mapping[str, float]  # device_id -> watts
    energy: Mapping[str, float]  # device_id -> joules
    carried: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"epoch duration must be positive, got {self.duration}")
        for dev_id, watts in self.avg_power.items():
            joules = self.energy.get(dev_id)
            if joules is None:
                raise ValueError(f"no energy entry for device {dev_id!r}")
            if not (math.isfinite(watts) and math.isfinite(joules)):
                raise ValueError(f"non-finite measurement for device {dev_id!r}")
            if watts < 0 or joules < 0:
                raise ValueError(f"negative measurement for device {dev_id!r}")
            if joules != watts * self.duration:
                raise ValueError(
                    f"energy/power mismatch for {dev_id!r}: "
                    f"{joules} != {watts} * {self.duration}"
                )

    @property
    def total_energy_j(self) -> float:
        return sum(self.energy.values())


def close_epoch(
    samples: Mapping[str, Sequence[PowerSample]],
    start: float,
    end: float,
    previous: EpochRecord | None = None,
    index: int | None = None,
) -> EpochRecord:
    """Aggregate one epoch's samples into per-device averages.

    ``samples`` maps each live device to the samples bucketed into
    [start, end] (the caller owns the bucketing). Undefined samples
    (power None, from counters awaiting their second reading) are
    dropped. A device with no usable samples reuses its previous epoch
    average, flagged in ``carried``; in the first epoch it is omitted
    with a warning instead.

    Raises:
        ValueError: end <= start.
        NoMeasurementsError: not a single device produced a usable
            average.
    """
    if end <= start:
        raise ValueError(f"epoch must end after it starts: {start} -> {end}")
    if index is None:
        index = previous.index + 1 if previous is not None else 0
    duration = end - start

    avg_power: dict[str, float] = {}
    carried: set[str] = set()
    for dev_id, dev_samples in samples.items():
        powers = [s.power for s in dev_samples if s.power is not None]
        if powers:
            avg_power[dev_id] = sum(powers) / len(powers)
        elif previous is not None and dev_id in previous.avg_power:
            avg_power[dev_id] = previous.avg_power[dev_id]
            carried.add(dev_id)
            # Warn on the transition into the gap; a continuing gap is
            # already flagged in every record's `carried` field.
            level = logging.DEBUG if dev_id in previous.carried else logging.WARNING
            logger.log(
                level,
                "device %s had no samples in epoch %d; carrying forward %.3f W",
                dev_id,
                index,
                avg_power[dev_id],
            )
        else:
            level = logging.WARNING if index == 0 else logging.DEBUG
            logger.log(level, "device %s had no samples in epoch %d; omitted", dev_id, index)

    if not avg_power:
        raise NoMeasurementsError(f"no measurements in epoch {index}")

    energy = {dev_id: watts * duration for dev_id, watts in avg_power.items()}
    return EpochRecord(
        index=index,
        start=start,
        end=end,
        duration=duration,
        avg_power=avg_power,
        energy=energy,
        carried=frozenset(carried),
    )


def total_energy(epochs: Iterable[EpochRecord], pue: PueConfig | float) -> float:
    """Total energy of a run in kilowatt-hours.

    Computed as ``pue * (joules / 3.6e6)`` so that scaling the PUE
    scales the result exactly.

    Raises:
        ValueError: no epochs.
    """
    multiplier = pue.pue if isinstance(pue, PueConfig) else float(pue)
    if multiplier < 1.0:
        raise ValueError(f"PUE must be >= 1.0, got {multiplier}")
    joules = 0.0
    count = 0
    for epoch in epochs:
        joules += epoch.total_energy_j
        count += 1
    if count == 0:
        raise ValueError("cannot total an empty epoch list")
    return multiplier * (joules / JOULES_PER_KWH)
