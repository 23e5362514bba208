"""wattprint: energy and carbon footprint tracking for compute jobs.

Measure per-device power during a run, convert the energy to carbon
emissions with live (or forecasted) grid intensity, and predict the
footprint of the whole run after its first epochs.
"""

from .backends import ReplayBackend, Sampler, SamplerConfig, enumerate_devices, parse_trace
from .devices import CounterReading, Device, DeviceKind, PowerSample, power_from_counters
from .energy import (
    DEFAULT_PUE,
    JOULES_PER_KWH,
    EpochRecord,
    PueConfig,
    close_epoch,
    total_energy,
)
from .errors import (
    BackendUnavailableError,
    CounterResetError,
    DeviceVanishedError,
    LogParseError,
    NoMeasurementsError,
    TraceError,
    TransportError,
    WattprintError,
)
from .intensity import (
    CarbonIntensity,
    GeoLocation,
    IntensityForecast,
    IntensitySource,
    average_over,
    fetch_current,
    fetch_forecast,
    resolve_location,
)
from .predictor import Prediction, predict
from .reporting import (
    ConversionFactors,
    FootprintReport,
    footprint,
    format_duration,
    parse_report,
    render_report,
    to_km_by_car,
)
from .session_log import (
    AggregateTotals,
    SessionLog,
    SessionSummary,
    aggregate,
    find_logs,
    parse_log,
    write_log,
)
from .tracker import Tracker, TrackerConfig, start_session

__version__ = "0.1.0"

__all__ = [
    "AggregateTotals",
    "BackendUnavailableError",
    "CarbonIntensity",
    "ConversionFactors",
    "CounterReading",
    "CounterResetError",
    "DEFAULT_PUE",
    "Device",
    "DeviceKind",
    "DeviceVanishedError",
    "EpochRecord",
    "FootprintReport",
    "GeoLocation",
    "IntensityForecast",
    "IntensitySource",
    "JOULES_PER_KWH",
    "LogParseError",
    "NoMeasurementsError",
    "PowerSample",
    "Prediction",
    "PueConfig",
    "ReplayBackend",
    "Sampler",
    "SamplerConfig",
    "SessionLog",
    "SessionSummary",
    "TraceError",
    "Tracker",
    "TrackerConfig",
    "TransportError",
    "WattprintError",
    "aggregate",
    "average_over",
    "close_epoch",
    "enumerate_devices",
    "fetch_current",
    "fetch_forecast",
    "find_logs",
    "footprint",
    "format_duration",
    "parse_log",
    "parse_report",
    "parse_trace",
    "power_from_counters",
    "predict",
    "render_report",
    "resolve_location",
    "start_session",
    "to_km_by_car",
    "total_energy",
    "write_log",
]
