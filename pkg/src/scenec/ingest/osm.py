"""OSM XML parser: building footprints, road centerlines, sidewalk polylines.

Accepts the XML produced by the public OSM API / extract tools. Geometry is
projected into local meters about the scene origin. Footprints come out CCW;
degenerate ways (< 3 distinct vertices) are skipped with a warning.
"""
from __future__ import annotations

import logging
import math
import xml.etree.ElementTree as ET

import numpy as np

from ..errors import DegenerateFootprint, SchemaViolation, UnresolvedNodeRef, XmlMalformed
from ..geo import Polygon2, is_simple, shoelace_area
from .geoproj import project_latlon
from .types import GeoOrigin, OsmBuilding, OsmExtract, OsmRoad

log = logging.getLogger(__name__)

SIDEWALK_HIGHWAY_CLASSES = {"footway", "path", "pedestrian", "steps"}


def parse_osm(xml: bytes | str, origin: GeoOrigin) -> OsmExtract:
    """Parse an OSM XML byte stream into footprints, roads and sidewalks."""
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as e:
        raise XmlMalformed(f"not well-formed OSM XML: {e}") from e
    if root.tag != "osm":
        raise XmlMalformed(f"root element is <{root.tag}>, expected <osm>")

    nodes: dict[str, tuple[float, float]] = {}
    for nd in root.iter("node"):
        try:
            nid = nd.attrib["id"]
            lat = float(nd.attrib["lat"])
            lon = float(nd.attrib["lon"])
        except (KeyError, ValueError) as e:
            raise SchemaViolation(f"node missing/invalid id/lat/lon: {e}") from e
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise SchemaViolation(f"node {nid}: non-finite lat/lon")
        nodes[nid] = project_latlon(lat, lon, origin)

    buildings: list[OsmBuilding] = []
    roads: list[OsmRoad] = []
    sidewalks: list[np.ndarray] = []
    closed_way_coords: dict[str, np.ndarray] = {}  # for multipolygon outer rings

    for way in root.iter("way"):
        way_id = way.attrib.get("id", "?")
        tags = {t.attrib.get("k"): t.attrib.get("v") for t in way.findall("tag")}
        refs = [nd.attrib.get("ref") for nd in way.findall("nd")]
        missing = [r for r in refs if r not in nodes]
        if missing:
            raise UnresolvedNodeRef(f"way {way_id} references missing node(s) {missing[:3]}")
        coords = np.array([nodes[r] for r in refs], dtype=np.float64)
        closed = len(refs) >= 2 and refs[0] == refs[-1]
        if closed:
            closed_way_coords[way_id] = coords[:-1]

        if "building:part" in tags:
            continue  # placeholder geometry only; parts are invisible at this fidelity
        if "building" in tags and tags["building"] != "no":
            fp = _footprint(coords if not closed else coords[:-1], way_id)
            if fp is not None:
                buildings.append(OsmBuilding(
                    footprint=fp,
                    levels=_parse_levels(tags.get("building:levels")),
                    osm_id=way_id,
                ))
            continue
        highway = tags.get("highway")
        if highway and len(coords) >= 2:
            if highway in SIDEWALK_HIGHWAY_CLASSES or tags.get("footway") == "sidewalk":
                sidewalks.append(coords)
            else:
                roads.append(OsmRoad(
                    centerline=coords,
                    highway_class=highway,
                    tagged_width=_parse_width(tags.get("width")),
                    osm_id=way_id,
                ))

    # multipolygon building relations: outer ring only (holes invisible here)
    for rel in root.iter("relation"):
        tags = {t.attrib.get("k"): t.attrib.get("v") for t in rel.findall("tag")}
        if tags.get("type") != "multipolygon" or "building" not in tags:
            continue
        for member in rel.findall("member"):
            if member.attrib.get("role") != "outer" or member.attrib.get("type") != "way":
                continue
            ref = member.attrib.get("ref")
            coords = closed_way_coords.get(ref)
            if coords is None:
                log.warning("relation %s: outer way %s not a closed way in extract, skipped",
                            rel.attrib.get("id", "?"), ref)
                continue
            fp = _footprint(coords, f"rel/{ref}")
            if fp is not None:
                buildings.append(OsmBuilding(
                    footprint=fp,
                    levels=_parse_levels(tags.get("building:levels")),
                    osm_id=f"rel/{ref}",
                ))

    return OsmExtract(
        buildings=tuple(buildings),
        roads=tuple(roads),
        sidewalks=tuple(sidewalks),
    )


def _footprint(coords: np.ndarray, way_id: str) -> Polygon2 | None:
    distinct = np.unique(np.round(coords, 9), axis=0)
    if len(distinct) < 3:
        log.warning("way %s: degenerate footprint (%d distinct vertices), skipped",
                    way_id, len(distinct))
        return None
    ring = coords
    area = shoelace_area(ring)
    if area == 0.0:
        log.warning("way %s: zero-area footprint, skipped", way_id)
        return None
    if area < 0.0:
        ring = ring[::-1].copy()
    if not is_simple(ring):
        log.warning("way %s: self-intersecting footprint, skipped", way_id)
        return None
    try:
        return Polygon2(ring)
    except Exception:
        raise DegenerateFootprint(f"way {way_id}: invalid footprint ring") from None


def _parse_levels(value: str | None) -> int | None:
    if value is None:
        return None
    try:
        return max(1, int(float(value)))
    except ValueError:
        return None


def _parse_width(value: str | None) -> float | None:
    if value is None:
        return None
    try:
        w = float(value.removesuffix(" m").removesuffix("m"))
    except ValueError:
        return None
    return w if w > 0 else None
