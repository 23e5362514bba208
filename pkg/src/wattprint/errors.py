"""Exception types shared across the package."""


class WattprintError(Exception):
    """Base class for errors raised by this package."""


class BackendUnavailableError(WattprintError):
    """A measurement backend cannot run on this host."""


class DeviceVanishedError(WattprintError):
    """A previously enumerated device stopped answering."""

    def __init__(self, device_id: str, reason: str = ""):
        self.device_id = device_id
        super().__init__(f"device {device_id!r} vanished" + (f": {reason}" if reason else ""))


class CounterResetError(WattprintError):
    """An energy counter went backwards by more than one wraparound."""


class TraceError(WattprintError):
    """A replay trace file is malformed."""


class NoMeasurementsError(WattprintError):
    """An epoch closed without a single usable power sample."""


class LogParseError(WattprintError):
    """A session log line could not be parsed."""

    def __init__(self, path, line_no: int, reason: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {reason}")


class TransportError(WattprintError):
    """An HTTP fetch failed after all retries."""
