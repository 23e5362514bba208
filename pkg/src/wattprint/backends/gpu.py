"""GPU power backend over the vendor management interface.

The vendor library reports instantaneous board power in milliwatts. All
imports are deferred so this module is safe on hosts without GPUs; an
NVML-compatible module can also be injected, which is how the tests
exercise the backend without hardware.
"""

from __future__ import annotations

import logging
import time

from ..devices import Device, DeviceKind, PowerSample
from ..errors import BackendUnavailableError, DeviceVanishedError
from .base import PowerBackend

logger = logging.getLogger("wattprint.sampling")


class GpuBackend(PowerBackend):
    name = "gpu"

    def __init__(self, nvml=None, clock=time.monotonic):
        if nvml is None:
            try:
                import pynvml as nvml  # type: ignore[no-redef]
            except ImportError as exc:
                raise BackendUnavailableError("pynvml is not installed") from exc
        self._nvml = nvml
        self._clock = clock
        try:
            self._nvml.nvmlInit()
            count = self._nvml.nvmlDeviceGetCount()
        except Exception as exc:
            raise BackendUnavailableError(f"management interface init failed: {exc}") from exc
        self._handles = {}
        self._devices = []
        for index in range(count):
            handle = self._nvml.nvmlDeviceGetHandleByIndex(index)
            label = self._nvml.nvmlDeviceGetName(handle)
            if isinstance(label, bytes):
                label = label.decode("utf-8", "replace")
            dev_id = f"gpu:{index}"
            self._handles[dev_id] = handle
            self._devices.append(
                Device(id=dev_id, kind=DeviceKind.GPU, label=label, backend=self.name)
            )

    def devices(self) -> list[Device]:
        return list(self._devices)

    def read(self, device: Device) -> PowerSample:
        try:
            milliwatts = self._nvml.nvmlDeviceGetPowerUsage(self._handles[device.id])
        except Exception as exc:
            raise DeviceVanishedError(device.id, str(exc)) from exc
        return PowerSample(
            device_id=device.id,
            timestamp=self._clock(),
            power=milliwatts / 1000.0,
        )

    def close(self) -> None:
        try:
            self._nvml.nvmlShutdown()
        except Exception:  # pragma: no cover - best effort
            pass
