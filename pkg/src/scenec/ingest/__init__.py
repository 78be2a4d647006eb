"""Parsers for all external inputs: scene records, OSM XML, LiDAR, asset catalogs."""

from .types import (
    AssetCatalog,
    AssetEntry,
    CameraRig,
    EgoPose,
    GeoOrigin,
    LidarSweep,
    MaterialEntry,
    ObjectBox,
    OsmBuilding,
    OsmExtract,
    OsmRoad,
    SceneRecord,
)
from .geoproj import project_latlon, unproject_xy
from .trovein import parse_scene_record, scene_record_to_dict
from .osm import parse_osm
from .lidar import parse_lidar, write_lidar
from .catalog import load_catalog, parse_catalog

__all__ = [
    "AssetCatalog",
    "AssetEntry",
    "CameraRig",
    "EgoPose",
    "GeoOrigin",
    "LidarSweep",
    "MaterialEntry",
    "ObjectBox",
    "OsmBuilding",
    "OsmExtract",
    "OsmRoad",
    "SceneRecord",
    "project_latlon",
    "unproject_xy",
    "parse_scene_record",
    "scene_record_to_dict",
    "parse_osm",
    "parse_lidar",
    "write_lidar",
    "load_catalog",
    "parse_catalog",
]
