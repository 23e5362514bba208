"""Backend interface and the sampler that owns running backends."""

from __future__ import annotations

import abc
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..devices import Device, PowerSample
from ..errors import BackendUnavailableError, DeviceVanishedError

logger = logging.getLogger("wattprint.sampling")


class PowerBackend(abc.ABC):
    """Source of power observations for one family of devices.

    Backends are only ever called from a single thread (the collection
    worker, or the session thread in scripted replay mode), so they do
    not need to be safe for concurrent calls.
    """

    name: str = "backend"

    @abc.abstractmethod
    def devices(self) -> list[Device]:
        """Enumerate the devices this backend can currently measure."""

    @abc.abstractmethod
    def read(self, device: Device) -> PowerSample:
        """Take one observation of ``device``.

        Raises DeviceVanishedError if the device stopped answering; any
        other exception disables the backend for the rest of the session.
        """

    def close(self) -> None:
        """Release backend resources; best-effort."""


@dataclass
class SamplerConfig:
    """Which backends to enable and where they read from."""

    components: tuple[str, ...] = ("gpu", "cpu_package", "dram")
    replay_trace: Path | str | None = None
    powercap_root: Path | str = Path("/sys/class/powercap")
    nvml: Any = None  # injectable NVML-like module, for tests


def build_backends(config: SamplerConfig) -> list[PowerBackend]:
    """Construct every enabled backend that is available on this host.

    Unavailable backends are skipped with a warning; they are not an
    error. The replay backend is enabled whenever a trace is configured.
    """
    from .gpu import GpuBackend
    from .powercap import PowercapBackend
    from .replay import ReplayBackend

    components = set(config.components)
    backends: list[PowerBackend] = []

    if config.replay_trace is not None:
        try:
            backends.append(ReplayBackend(config.replay_trace))
        except BackendUnavailableError as exc:
            logger.warning("replay backend unavailable: %s", exc)

    if "gpu" in components:
        try:
            backends.append(GpuBackend(nvml=config.nvml))
        except BackendUnavailableError as exc:
            logger.warning("gpu backend unavailable: %s", exc)

    counter_kinds = components & {"cpu_package", "dram"}
    if counter_kinds:
        try:
            backends.append(
                PowercapBackend(root=config.powercap_root, kinds=counter_kinds)
            )
        except BackendUnavailableError as exc:
            logger.warning("powercap backend unavailable: %s", exc)

    return backends


def enumerate_devices(config: SamplerConfig) -> list[Device]:
    """List every device visible to the enabled backends.

    An empty list is a legal outcome (the tracker then refuses to report
    energy rather than reporting zero).
    """
    devices: list[Device] = []
    for backend in build_backends(config):
        devices.extend(backend.devices())
        backend.close()
    return devices


@dataclass
class Sampler:
    """Owns the live backends of one session and serializes reads to them.

    A backend that raises anything other than DeviceVanishedError is
    disabled for the rest of the session; the session continues with the
    remaining devices. A vanished device is excluded from subsequent
    sweeps with a warning.
    """

    backends: list[PowerBackend]
    _devices: list[Device] = field(default_factory=list, init=False)
    _owner: dict[str, PowerBackend] = field(default_factory=dict, init=False)
    _dead: set[str] = field(default_factory=set, init=False)

    def __post_init__(self):
        for backend in self.backends:
            try:
                found = backend.devices()
            except Exception as exc:
                logger.warning("backend %s failed to enumerate: %s", backend.name, exc)
                continue
            for device in found:
                if device.id in self._owner:
                    raise ValueError(f"duplicate device id {device.id!r}")
                self._owner[device.id] = backend
                self._devices.append(device)

    @property
    def devices(self) -> list[Device]:
        return list(self._devices)

    def live_devices(self) -> list[Device]:
        return [d for d in self._devices if d.id not in self._dead]

    def sample(self, device: Device) -> PowerSample:
        """Take one observation of a device returned by this sampler."""
        backend = self._owner[device.id]
        return backend.read(device)

    def sweep(self) -> list[PowerSample]:
        """Sample every live device once, applying the failure policy."""
        samples: list[PowerSample] = []
        for device in self.live_devices():
            backend = self._owner[device.id]
            if backend not in self.backends:  # disabled earlier in this sweep
                continue
            try:
                samples.append(backend.read(device))
            except DeviceVanishedError as exc:
                logger.warning("excluding device: %s", exc)
                self._dead.add(device.id)
            except Exception as exc:
                logger.warning(
                    "backend %s failed (%s); disabling it for this session",
                    backend.name,
                    exc,
                )
                self.backends.remove(backend)
                for d in self._devices:
                    if self._owner[d.id] is backend:
                        self._dead.add(d.id)
        return samples

    def close(self) -> None:
        for backend in self.backends:
            try:
                backend.close()
            except Exception:  # pragma: no cover - best effort cleanup
                logger.debug("backend %s close failed", backend.name, exc_info=True)
