"""Programmatic end-to-end fixture: a small scene with 3 buildings, 2 roads,
4 vehicles, 2 pedestrians and a 10^4-point labeled LiDAR sweep, written in the
pipeline's own input formats."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from scenec.ingest.geoproj import unproject_xy
from scenec.ingest.types import GeoOrigin, LidarSweep
from scenec.ingest.lidar import write_lidar
from scenec.taxonomy import CLASS_NAMES_20

ORIGIN = GeoOrigin(lat=1.3, lon=103.8)

ROAD_LABEL = CLASS_NAMES_20.index("road")
TREES_LABEL = CLASS_NAMES_20.index("trees")
BUSHES_LABEL = CLASS_NAMES_20.index("bushes")
GROUND_LABEL = CLASS_NAMES_20.index("ground")

# forward-looking camera 1.6 m above the ego origin
CAM_ROTATION = [0.5, 0.5, -0.5, 0.5]
CAM_TRANSLATION = [0.0, 1.6, 0.0]


def _node(nid, x, y):
    lat, lon = unproject_xy(x, y, ORIGIN)
    return f'<node id="{nid}" lat="{lat:.9f}" lon="{lon:.9f}"/>'


def _rect(cx, cy, length, width, yaw):
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    local = np.array([
        [-length / 2, -width / 2], [length / 2, -width / 2],
        [length / 2, width / 2], [-length / 2, width / 2],
    ])
    return local @ rot.T + np.array([cx, cy])


def write_osm_fixture(path: Path) -> None:
    nodes = []
    ways = []
    nid = 100

    def add_ring(coords, tags):
        nonlocal nid
        ids = []
        for x, y in coords:
            nid += 1
            nodes.append(_node(nid, x, y))
            ids.append(nid)
        refs = "".join(f'<nd ref="{i}"/>' for i in ids + [ids[0]])
        tag_xml = "".join(f'<tag k="{k}" v="{v}"/>' for k, v in tags.items())
        ways.append(f'<way id="{nid}">{refs}{tag_xml}</way>')

    def add_line(coords, tags):
        nonlocal nid
        ids = []
        for x, y in coords:
            nid += 1
            nodes.append(_node(nid, x, y))
            ids.append(nid)
        refs = "".join(f'<nd ref="{i}"/>' for i in ids)
        tag_xml = "".join(f'<tag k="{k}" v="{v}"/>' for k, v in tags.items())
        ways.append(f'<way id="{nid}">{refs}{tag_xml}</way>')

    # two rectangular buildings (asset-replaceable) and one L-shape (facade)
    add_ring(_rect(30.0, 22.0, 12.0, 8.0, math.radians(20)),
             {"building": "yes", "building:levels": "4"})
    add_ring(_rect(-28.0, 18.0, 10.0, 10.0, 0.0), {"building": "yes"})
    add_ring([(40.0, -34.0), (52.0, -34.0), (52.0, -28.0), (46.0, -28.0),
              (46.0, -22.0), (40.0, -22.0)], {"building": "yes"})
    # two roads sharing the junction node region at the origin
    add_line([(-80.0, 0.0), (0.0, 0.0), (80.0, 0.0)], {"highway": "residential"})
    add_line([(0.0, -60.0), (0.0, 60.0)], {"highway": "residential"})
    # one sidewalk north of the main road
    add_line([(-60.0, 8.0), (60.0, 8.0)], {"highway": "footway"})

    xml = (
        '<?xml version="1.0" encoding="UTF-8"?>\n<osm version="0.6" generator="fixture">\n'
        + "\n".join(nodes) + "\n" + "\n".join(ways) + "\n</osm>\n"
    )
    path.write_text(xml)


def write_lidar_fixture(path: Path, n_points: int = 10_000, seed: int = 7) -> None:
    rng = np.random.default_rng(seed)
    pts = []
    labels = []
    # road returns along both carriageways
    n_road = n_points // 2
    xs = rng.uniform(-60, 60, n_road // 2)
    pts.append(np.column_stack([xs, rng.uniform(-3.5, 3.5, len(xs)), np.zeros(len(xs))]))
    labels.append(np.full(len(xs), ROAD_LABEL))
    ys = rng.uniform(-50, 50, n_road - len(xs))
    pts.append(np.column_stack([rng.uniform(-3.0, 3.0, len(ys)), ys, np.zeros(len(ys))]))
    labels.append(np.full(len(ys), ROAD_LABEL))
    # vegetation clusters
    n_veg = n_points // 4
    for i, (cx, cy) in enumerate([(-20.0, 30.0), (25.0, -25.0), (-35.0, -20.0), (15.0, 35.0)]):
        k = n_veg // 4
        pts.append(np.column_stack([
            rng.normal(cx, 3.0, k), rng.normal(cy, 3.0, k), rng.uniform(1.0, 8.0, k)]))
        labels.append(np.full(k, TREES_LABEL if i % 2 == 0 else BUSHES_LABEL))
    # ground clutter
    done = sum(len(p) for p in pts)
    k = n_points - done
    pts.append(np.column_stack([
        rng.uniform(-70, 70, k), rng.uniform(-60, 60, k), np.zeros(k)]))
    labels.append(np.full(k, GROUND_LABEL))
    sweep = LidarSweep(points=np.vstack(pts),
                       labels=np.concatenate(labels).astype(np.int16))
    write_lidar(path, sweep)


def scene_record_doc(scene_id: str = "fixture-001") -> dict:
    vehicles = [
        ("veh_a", "car", [15.0, 1.6, 0.75], [4.5, 1.9, 1.5], 0.0),
        ("veh_b", "car", [28.0, -1.7, 0.75], [4.2, 1.8, 1.5], math.pi),
        ("veh_c", "truck", [-20.0, 1.7, 1.3], [8.0, 2.5, 2.6], 0.0),
        ("veh_d", "car", [1.8, -12.0, 0.7], [4.0, 1.8, 1.4], -math.pi / 2),
    ]
    pedestrians = [
        ("ped_a", "human", [8.0, 7.5, 0.9], [0.6, 0.6, 1.8], math.pi / 2),
        ("ped_b", "human", [-12.0, 8.2, 0.85], [0.5, 0.5, 1.7], 0.0),
    ]
    objects = [
        {"id": oid, "category": cat, "timestamp": 0,
         "center": center, "size": size, "yaw": yaw}
        for oid, cat, center, size, yaw in vehicles + pedestrians
    ]
    return {
        "schema": "trove-in/1",
        "scene_id": scene_id,
        "origin": {"lat": ORIGIN.lat, "lon": ORIGIN.lon, "alt": 0.0},
        "ego_poses": [
            {"timestamp": i * 500_000, "position": [-40.0 + 2.5 * i, 0.0, 0.0],
             "rotation": [1, 0, 0, 0]}
            for i in range(20)
        ],
        "cameras": [{
            "name": "front", "fx": 400.0, "fy": 400.0, "cx": 160.0, "cy": 90.0,
            "width": 320, "height": 180,
            "extrinsics": {"rotation": CAM_ROTATION, "translation": CAM_TRANSLATION},
        }],
        "objects": objects,
        "lidar": [{"timestamp": 0, "file": "sweep.bin"}],
    }


def catalog_doc() -> dict:
    assets = [
        ("car_sedan", "car", [4.6, 1.85, 1.45]),
        ("car_hatch", "car", [4.0, 1.8, 1.5]),
        ("car_suv", "car", [4.7, 1.95, 1.75]),
        ("truck_box", "truck", [8.2, 2.5, 3.0]),
        ("person_a", "human", [0.6, 0.6, 1.75]),
        ("person_b", "human", [0.55, 0.55, 1.85]),
        ("bldg_block", "building", [14.0, 10.0, 12.0]),
        ("bldg_tower", "building", [12.0, 12.0, 30.0]),
        ("tree_oak", "trees", [4.0, 4.0, 9.0]),
        ("tree_pine", "trees", [2.5, 2.5, 12.0]),
        ("bush_low", "bushes", [1.5, 1.5, 1.0]),
        ("sign_stop", "traffic sign", [0.6, 0.1, 2.2]),
        ("pole_light", "pole", [0.3, 0.3, 6.0]),
    ]
    return {
        "schema": "trove-assets/1",
        "assets": [
            {"asset_id": a, "category": c, "bbox_dims": d, "mesh_ref": ""}
            for a, c, d in assets
        ],
        "materials": [
            {"material_id": "brick_red", "surface_role": "facade"},
            {"material_id": "plaster_grey", "surface_role": "facade"},
            {"material_id": "asphalt_worn", "surface_role": "road"},
            {"material_id": "paving_stone", "surface_role": "sidewalk"},
            {"material_id": "grass_dry", "surface_role": "terrain"},
        ],
        "hdris": ["hdri_noon", "hdri_overcast", "hdri_sunset"],
    }


def write_fixture_tree(root: Path, scene_id: str = "fixture-001",
                       seed: int = 42, resolution=(320, 180),
                       cameras_per_scene: int = 20) -> dict:
    """Create dataset + catalog + OSM + config under root; returns the config dict."""
    scene_dir = root / "dataset" / scene_id
    scene_dir.mkdir(parents=True, exist_ok=True)
    (scene_dir / "scene.json").write_text(json.dumps(scene_record_doc(scene_id)))
    write_lidar_fixture(scene_dir / "sweep.bin")
    write_osm_fixture(root / "map.osm")
    (root / "catalog.json").write_text(json.dumps(catalog_doc()))
    cfg = {
        "dataset_root": str(root / "dataset"),
        "catalog_path": str(root / "catalog.json"),
        "osm_path": str(root / "map.osm"),
        "output_dir": str(root / "out"),
        "seed": seed,
        "scenes": [scene_id],
        "cameras_per_scene": cameras_per_scene,
        "resolution": list(resolution),
        "background": {"density_coeff": 2.0},
    }
    (root / "config.json").write_text(json.dumps(cfg))
    return cfg
