"""Asset-catalog manifest loader ("trove-assets/1")."""
from __future__ import annotations

import json
from pathlib import Path

from .. import ASSET_SCHEMA
from ..errors import MissingFile, SchemaViolation
from .types import AssetCatalog, AssetEntry, MaterialEntry


def load_catalog(path) -> AssetCatalog:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(str(p))
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise SchemaViolation(f"catalog is not valid JSON: {e}") from e
    return parse_catalog(doc)


def parse_catalog(doc: dict) -> AssetCatalog:
    try:
        return _parse_catalog(doc)
    except SchemaViolation:
        raise
    except (TypeError, ValueError, AttributeError, IndexError) as e:
        raise SchemaViolation(f"malformed catalog document: {e}") from e


def _parse_catalog(doc: dict) -> AssetCatalog:
    if not isinstance(doc, dict):
        raise SchemaViolation("catalog document must be a JSON object")
    schema = doc.get("schema")
    if schema != ASSET_SCHEMA:
        raise SchemaViolation(f"unsupported catalog schema {schema!r}, expected {ASSET_SCHEMA!r}")
    assets = []
    for i, a in enumerate(doc.get("assets", [])):
        try:
            assets.append(AssetEntry(
                asset_id=str(a["asset_id"]),
                category=str(a["category"]),
                bbox_dims=a["bbox_dims"],
                mesh_ref=str(a.get("mesh_ref", "")),
            ))
        except KeyError as e:
            raise SchemaViolation(f"assets[{i}] missing field {e.args[0]}") from None
    materials = []
    for i, m in enumerate(doc.get("materials", [])):
        try:
            materials.append(MaterialEntry(
                material_id=str(m["material_id"]),
                surface_role=str(m["surface_role"]),
            ))
        except KeyError as e:
            raise SchemaViolation(f"materials[{i}] missing field {e.args[0]}") from None
    hdris = tuple(str(h) for h in doc.get("hdris", []))
    return AssetCatalog(assets=tuple(assets), materials=tuple(materials), hdris=hdris)
