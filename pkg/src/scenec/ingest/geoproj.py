"""Local equirectangular projection about a GeoOrigin.

Good to < 1 cm over the < 2 km extents this pipeline deals with; avoids a
geodesy dependency. x grows east, y grows north.
"""
from __future__ import annotations

import math

from .types import GeoOrigin

EARTH_RADIUS_M = 6371008.8  # mean radius


def project_latlon(lat: float, lon: float, origin: GeoOrigin) -> tuple[float, float]:
    """(lat, lon) degrees -> local (x, y) meters about the origin."""
    k = math.pi / 180.0 * EARTH_RADIUS_M
    x = (lon - origin.lon) * math.cos(math.radians(origin.lat)) * k
    y = (lat - origin.lat) * k
    return x, y


def unproject_xy(x: float, y: float, origin: GeoOrigin) -> tuple[float, float]:
    """Local (x, y) meters -> (lat, lon) degrees."""
    k = math.pi / 180.0 * EARTH_RADIUS_M
    lat = origin.lat + y / k
    lon = origin.lon + x / (k * math.cos(math.radians(origin.lat)))
    return lat, lon
