"""Geodetic positions, node-to-node distance and a local planar frame.

All scenarios span less than 2 km, so an equirectangular approximation on a
spherical Earth (mean radius) is used throughout: the projection error at
these scales is below 0.01% and the math stays cheap and smooth. Distances
are 3-D: altitude differences enter via Pythagoras.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

# Altitude must survive the signed 16-bit wire encoding (integer meters).
ALT_MIN_M = -32768.0
ALT_MAX_M = 32767.0

MAX_PROJECTION_RANGE_M = 50_000.0


@dataclass(frozen=True)
class GeoPosition:
    """WGS-84 latitude/longitude in degrees, altitude in meters."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat!r} outside [-90, 90]")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValueError(f"longitude {self.lon!r} outside [-180, 180]")
        if not (ALT_MIN_M <= self.alt <= ALT_MAX_M):
            raise ValueError(f"altitude {self.alt!r} outside wire-encodable range")


@dataclass(frozen=True)
class LocalPosition:
    """Planar east/north/up meters relative to a scenario origin."""

    east: float
    north: float
    up: float = 0.0

    def norm(self) -> float:
        return math.sqrt(self.east * self.east + self.north * self.north + self.up * self.up)


def distance(a: GeoPosition, b: GeoPosition) -> float:
    """3-D separation in meters between two positions.

    Horizontal part is equirectangular on the mean-radius sphere, scaled by
    the cosine of the mean latitude; symmetric and non-negative.
    """
    mean_lat = math.radians((a.lat + b.lat) / 2.0)
    east = EARTH_RADIUS_M * math.radians(b.lon - a.lon) * math.cos(mean_lat)
    north = EARTH_RADIUS_M * math.radians(b.lat - a.lat)
    up = b.alt - a.alt
    return math.sqrt(east * east + north * north + up * up)


def to_local(origin: GeoPosition, p: GeoPosition) -> LocalPosition:
    """Project p into the east/north/up frame centered on origin.

    Raises ValueError for points farther than 50 km from the origin, where
    the planar approximation is no longer trustworthy.
    """
    east = EARTH_RADIUS_M * math.radians(p.lon - origin.lon) * math.cos(math.radians(origin.lat))
    north = EARTH_RADIUS_M * math.radians(p.lat - origin.lat)
    if math.hypot(east, north) > MAX_PROJECTION_RANGE_M:
        raise ValueError("position beyond 50 km of the local-frame origin")
    return LocalPosition(east=east, north=north, up=p.alt - origin.alt)


def from_local(origin: GeoPosition, lp: LocalPosition) -> GeoPosition:
    """Inverse of to_local for the same origin."""
    lat = origin.lat + math.degrees(lp.north / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(lp.east / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    return GeoPosition(lat=lat, lon=lon, alt=origin.alt + lp.up)
