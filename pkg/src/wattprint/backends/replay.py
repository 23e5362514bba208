"""Deterministic replay backend driven by a recorded trace file.

Trace format (the canonical test input):

    # optional comment lines
    devices: gpu0=gpu cpu0=cpu_package
    0.0 gpu0 250.0
    0.0 cpu0 80.0
    10.0 gpu0 252.5
    ...

The header names every device as ``id=kind``; each following row is
``timestamp_s device_id power_w``. Timestamps must be strictly
increasing per device and powers non-negative.
"""

from __future__ import annotations

import io
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from ..devices import Device, DeviceKind, PowerSample
from ..errors import BackendUnavailableError, TraceError
from .base import PowerBackend

logger = logging.getLogger("wattprint.sampling")

HEADER_PREFIX = "devices:"


@dataclass
class ReplayTrace:
    """A parsed trace: device declarations plus per-device sample rows."""

    devices: list[Device]
    rows: dict[str, list[tuple[float, float]]]  # device_id -> [(timestamp, watts)]

    @property
    def start(self) -> float:
        return min(ts for rows in self.rows.values() for ts, _ in rows)

    @property
    def end(self) -> float:
        return max(ts for rows in self.rows.values() for ts, _ in rows)


def parse_trace(source: str | Path | io.TextIOBase) -> ReplayTrace:
    """Parse a replay trace from a path, literal text, or open file."""
    if isinstance(source, io.TextIOBase):
        text = source.read()
        origin = getattr(source, "name", "<stream>")
    elif isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise TraceError(f"cannot read trace {path}: {exc}") from exc
        origin = str(path)
    else:
        text = source
        origin = "<string>"

    devices: list[Device] = []
    rows: dict[str, list[tuple[float, float]]] = {}
    header_seen = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if not line.startswith(HEADER_PREFIX):
                raise TraceError(f"{origin}:{line_no}: expected '{HEADER_PREFIX}' header")
            for entry in line[len(HEADER_PREFIX):].split():
                entry = entry.rstrip(",")
                if "=" not in entry:
                    raise TraceError(f"{origin}:{line_no}: bad device entry {entry!r}")
                dev_id, kind_name = entry.split("=", 1)
                try:
                    kind = DeviceKind(kind_name)
                except ValueError:
                    raise TraceError(
                        f"{origin}:{line_no}: unknown device kind {kind_name!r}"
                    ) from None
                if dev_id in rows:
                    raise TraceError(f"{origin}:{line_no}: duplicate device id {dev_id!r}")
                devices.append(Device(id=dev_id, kind=kind, label=dev_id, backend="replay"))
                rows[dev_id] = []
            if not devices:
                raise TraceError(f"{origin}:{line_no}: header declares no devices")
            header_seen = True
            continue
        parts = line.split()
        if len(parts) != 3:
            raise TraceError(f"{origin}:{line_no}: expected 'timestamp device power'")
        try:
            ts, power = float(parts[0]), float(parts[2])
        except ValueError:
            raise TraceError(f"{origin}:{line_no}: non-numeric field") from None
        dev_id = parts[1]
        if dev_id not in rows:
            raise TraceError(f"{origin}:{line_no}: undeclared device {dev_id!r}")
        if power < 0:
            raise TraceError(f"{origin}:{line_no}: negative power {power}")
        if rows[dev_id] and ts <= rows[dev_id][-1][0]:
            raise TraceError(
                f"{origin}:{line_no}: timestamps must strictly increase per device"
            )
        rows[dev_id].append((ts, power))

    if not header_seen:
        raise TraceError(f"{origin}: empty trace")
    for dev_id, dev_rows in rows.items():
        if not dev_rows:
            raise TraceError(f"{origin}: device {dev_id!r} has no rows")
    return ReplayTrace(devices=devices, rows=rows)


@dataclass
class ReplayBackend(PowerBackend):
    """Replays a recorded trace, one row per read, in file order.

    Reads past the end of a device's rows repeat the final power value
    with the trace's own cadence so long-running sessions see a steady
    tail; window-based consumers use ``peek_timestamp`` and stop at the
    real end of the trace.
    """

    source: str | Path
    name: str = field(default="replay", init=False)

    def __post_init__(self):
        try:
            self._trace = parse_trace(self.source)
        except TraceError as exc:
            raise BackendUnavailableError(str(exc)) from exc
        self._queues: dict[str, deque[tuple[float, float]]] = {
            dev_id: deque(rows) for dev_id, rows in self._trace.rows.items()
        }
        self._last: dict[str, tuple[float, float]] = {}
        self._steps: dict[str, float] = {}
        for dev_id, rows in self._trace.rows.items():
            if len(rows) >= 2:
                self._steps[dev_id] = rows[-1][0] - rows[-2][0]
            else:
                self._steps[dev_id] = 1.0

    @property
    def trace(self) -> ReplayTrace:
        return self._trace

    def devices(self) -> list[Device]:
        return list(self._trace.devices)

    def peek_timestamp(self, device: Device) -> float | None:
        """Trace time of the next un-consumed row, or None at the end."""
        queue = self._queues[device.id]
        return queue[0][0] if queue else None

    def read(self, device: Device) -> PowerSample:
        queue = self._queues[device.id]
        if queue:
            ts, power = queue.popleft()
        else:
            last_ts, power = self._last[device.id]
            ts = last_ts + self._steps[device.id]
        self._last[device.id] = (ts, power)
        return PowerSample(device_id=device.id, timestamp=ts, power=power)
