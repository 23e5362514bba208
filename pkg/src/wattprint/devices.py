"""Device identities and raw power/energy observations.

Two observation shapes exist: instantaneous power samples (GPUs report
board power directly) and cumulative energy counters (CPU package and
DRAM domains expose a microjoule counter that wraps at a fixed maximum).
Counters are converted to interval-average power by differencing two
readings; downstream epoch accounting treats both shapes identically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import CounterResetError

MICROJOULES_PER_JOULE = 1_000_000


class DeviceKind(enum.Enum):
    GPU = "gpu"
    CPU_PACKAGE = "cpu_package"
    DRAM = "dram"


@dataclass(frozen=True, slots=True)
class Device:
    """One measurable hardware component.

    ``id`` is unique within a session and ``kind`` never changes for the
    lifetime of the device.
    """

    id: str
    kind: DeviceKind
    label: str
    backend: str


@dataclass(frozen=True, slots=True)
class PowerSample:
    """One power observation for one device.

    ``power`` is ``None`` when the backend cannot produce a value yet: a
    counter-based device needs two readings before the first rate is
    defined. Undefined samples are excluded from epoch averages.
    """

    device_id: str
    timestamp: float  # monotonic seconds
    power: float | None  # watts

    def __post_init__(self):
        if self.power is not None and self.power < 0:
            raise ValueError(f"negative power {self.power} W for {self.device_id!r}")


@dataclass(frozen=True, slots=True)
class CounterReading:
    """One cumulative energy-counter observation.

    ``energy`` is the counter value in microjoules; it wraps back to zero
    once it passes ``max_range``.
    """

    device_id: str
    timestamp: float  # monotonic seconds
    energy: int  # microjoules, cumulative
    max_range: int  # microjoules

    def __post_init__(self):
        if self.max_range <= 0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")
        if not 0 <= self.energy <= self.max_range:
            raise ValueError(
                f"counter value {self.energy} outside [0, {self.max_range}]"
            )


def power_from_counters(prev: CounterReading, curr: CounterReading) -> float:
    """Average power in watts between two readings of the same counter.

    A negative raw delta means the counter wrapped once between the
    readings, so ``max_range`` is added back. This is only unambiguous
    while the energy consumed per interval stays below ``max_range``,
    which the sampling cadence guarantees in practice.

    Raises:
        ValueError: readings are from different devices or time did not
            advance between them.
        CounterResetError: the delta is still negative after wraparound
            correction, i.e. the counter was reset.
    """
    if curr.device_id != prev.device_id:
        raise ValueError(
            f"counter readings from different devices: {prev.device_id!r} vs {curr.device_id!r}"
        )
    dt = curr.timestamp - prev.timestamp
    if dt <= 0:
        raise ValueError(f"non-increasing timestamps: {prev.timestamp} -> {curr.timestamp}")
    delta = curr.energy - prev.energy
    if delta < 0:
        delta += curr.max_range
    if delta < 0:
        raise CounterResetError(
            f"counter for {curr.device_id!r} went backwards past one wraparound"
        )
    return (delta / MICROJOULES_PER_JOULE) / dt
