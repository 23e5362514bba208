"""Cumulative energy-counter backend for CPU package and DRAM domains.

Reads the OS power-capping sysfs layout: one directory per domain with a
``name`` file, the current counter in ``energy_uj`` and the wraparound
limit in ``max_energy_range_uj``. Power is derived by differencing two
consecutive readings, so the very first read of each domain yields an
undefined sample.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path

from ..devices import CounterReading, Device, DeviceKind, PowerSample, power_from_counters
from ..errors import BackendUnavailableError, CounterResetError, DeviceVanishedError
from .base import PowerBackend

logger = logging.getLogger("wattprint.sampling")

# Fallback when a domain does not publish its range; large enough that
# wraparound correction never misfires.
DEFAULT_MAX_RANGE_UJ = 2**60


def _kind_for_domain(domain_name: str) -> DeviceKind | None:
    if domain_name.startswith("package"):
        return DeviceKind.CPU_PACKAGE
    if domain_name == "dram":
        return DeviceKind.DRAM
    return None  # core/uncore/psys are subsets or out of scope


class PowercapBackend(PowerBackend):
    name = "powercap"

    def __init__(
        self,
        root: str | Path = Path("/sys/class/powercap"),
        kinds: set[str] | None = None,
        clock=time.monotonic,
    ):
        self._root = Path(root)
        self._wanted = {DeviceKind(k) for k in kinds} if kinds else {
            DeviceKind.CPU_PACKAGE,
            DeviceKind.DRAM,
        }
        self._clock = clock
        self._paths: dict[str, Path] = {}
        self._ranges: dict[str, int] = {}
        self._prev: dict[str, CounterReading] = {}
        self._devices = self._discover()
        if not self._devices:
            raise BackendUnavailableError(f"no energy counters under {self._root}")

    def _discover(self) -> list[Device]:
        if not self._root.is_dir():
            return []
        devices = []
        for entry in sorted(self._root.iterdir()):
            energy_file = entry / "energy_uj"
            name_file = entry / "name"
            if not entry.is_dir() or not energy_file.is_file():
                continue
            try:
                domain = name_file.read_text(encoding="utf-8").strip()
                int(energy_file.read_text())
            except (OSError, ValueError) as exc:
                logger.warning("skipping unreadable domain %s: %s", entry.name, exc)
                continue
            kind = _kind_for_domain(domain)
            if kind is None or kind not in self._wanted:
                continue
            max_range = DEFAULT_MAX_RANGE_UJ
            range_file = entry / "max_energy_range_uj"
            if range_file.is_file():
                try:
                    max_range = int(range_file.read_text())
                except (OSError, ValueError):
                    pass
            dev_id = entry.name
            self._paths[dev_id] = energy_file
            self._ranges[dev_id] = max_range
            devices.append(Device(id=dev_id, kind=kind, label=domain, backend=self.name))
        return devices

    def devices(self) -> list[Device]:
        return list(self._devices)

    def read(self, device: Device) -> PowerSample:
        try:
            raw = int(self._paths[device.id].read_text())
        except (OSError, ValueError) as exc:
            raise DeviceVanishedError(device.id, str(exc)) from exc
        curr = CounterReading(
            device_id=device.id,
            timestamp=self._clock(),
            energy=raw,
            max_range=self._ranges[device.id],
        )
        prev = self._prev.get(device.id)
        self._prev[device.id] = curr
        if prev is None:
            # Differencing needs two readings; the first sample is undefined.
            return PowerSample(device_id=device.id, timestamp=curr.timestamp, power=None)
        try:
            watts = power_from_counters(prev, curr)
        except (CounterResetError, ValueError) as exc:
            logger.warning("counter rebased for %s: %s", device.id, exc)
            return PowerSample(device_id=device.id, timestamp=curr.timestamp, power=None)
        return PowerSample(device_id=device.id, timestamp=curr.timestamp, power=watts)
