"""Host location resolution via IP lookup, with an explicit override."""

from __future__ import annotations

import logging

from .http import HttpTransport, Transport
from .types import GeoLocation, ResolvedFrom

logger = logging.getLogger("wattprint.intensity")

DEFAULT_GEO_ENDPOINT = "https://ipapi.co/json/"

UNKNOWN = GeoLocation(country_code="unknown", resolved_from=ResolvedFrom.IP_LOOKUP)


def resolve_location(
    override: str | None = None,
    transport: Transport | None = None,
    endpoint: str = DEFAULT_GEO_ENDPOINT,
) -> GeoLocation:
    """Where is this host? An explicit region override always wins.

    Without an override, the public-IP lookup service is queried; any
    failure degrades to country_code "unknown" (which later selects the
    default-average intensity) rather than raising.
    """
    if override:
        return GeoLocation(country_code=override.upper(), resolved_from=ResolvedFrom.OVERRIDE)
    if transport is None:
        transport = HttpTransport()
    try:
        payload = transport.get_json(endpoint)
    except Exception as exc:  # lookups must never take the session down
        logger.warning("location lookup failed: %s", exc)
        return UNKNOWN
    try:
        country = payload.get("country_code") or payload.get("country") or ""
        region = payload.get("region") or payload.get("region_name") or ""
        city = payload.get("city") or ""
    except AttributeError:
        logger.warning("location lookup returned unexpected payload: %r", payload)
        return UNKNOWN
    if not country:
        logger.warning("location lookup returned no country code")
        return UNKNOWN
    return GeoLocation(
        country_code=str(country).upper(),
        region_name=str(region),
        city=str(city),
        resolved_from=ResolvedFrom.IP_LOOKUP,
    )
