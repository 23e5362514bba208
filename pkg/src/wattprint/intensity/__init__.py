from .geo import DEFAULT_GEO_ENDPOINT, resolve_location
from .http import HttpTransport, NullTransport, Transport
from .providers import (
    DanishEnergyDataProvider,
    BritishGridProvider,
    default_intensity,
    load_default_average,
    provider_for,
    register_provider,
)
from .service import (
    DEFAULT_REFRESH_PERIOD,
    IntensityService,
    IntensitySnapshot,
    fetch_current,
    fetch_forecast,
)
from .types import (
    CarbonIntensity,
    ForecastWindow,
    GeoLocation,
    IntensityForecast,
    IntensitySource,
    ResolvedFrom,
    average_over,
    value_at,
)

__all__ = [
    "DEFAULT_GEO_ENDPOINT",
    "DEFAULT_REFRESH_PERIOD",
    "CarbonIntensity",
    "DanishEnergyDataProvider",
    "ForecastWindow",
    "GeoLocation",
    "BritishGridProvider",
    "HttpTransport",
    "IntensityForecast",
    "IntensityService",
    "IntensitySnapshot",
    "IntensitySource",
    "NullTransport",
    "ResolvedFrom",
    "Transport",
    "average_over",
    "default_intensity",
    "fetch_current",
    "fetch_forecast",
    "load_default_average",
    "provider_for",
    "register_provider",
    "resolve_location",
    "value_at",
]
