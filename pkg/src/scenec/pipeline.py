"""End-to-end orchestration: ingest -> layout -> placement -> background ->
scene -> annotate -> curation, with crash-safe output layout.

Per-scene outputs land under `<output_dir>/<scene_id>/`; work happens inside
`<output_dir>/_incomplete/<scene_id>/` and is moved into place only when every
file is written, so a manifest is never found next to partial outputs. Given
the same inputs, config and seed, outputs are byte-identical across runs.
"""
from __future__ import annotations

import hashlib
import json
import logging
import shutil
import time
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .annotate.boxes import boxes_to_json, extract_boxes2d, extract_boxes3d
from .annotate.flow import compute_flow
from .annotate.formats import (
    write_flo,
    write_palette,
    write_pfm,
    write_png_gray8,
    write_png_gray16,
    write_png_rgb16,
)
from .annotate.raster import rasterize, scene_triangles
from .background import (
    mask_roads,
    place_roadside,
    sample_vegetation,
    save_density_image,
    vegetation_count,
    vegetation_density,
)
from .config import PipelineConfig, config_hash
from .errors import ConfigError, EmptyDensity, OsmUnavailable, SceneCompilerError, StageFailure
from .gltf_export import export_interchange
from .ingest import load_catalog, parse_lidar, parse_osm, parse_scene_record
from .ingest.types import LidarSweep, ObjectBox, OsmExtract, SceneRecord
from .layout import (
    RectReplace,
    build_road_network,
    extrude_building,
    fit_road_width,
    joint_road_mesh,
    plan_building,
    ribbon_mesh,
    SIDEWALK_Z,
)
from .mesh import TriMesh, merge_meshes
from .placement import load_compatibility, match_assets, sample_cameras
from .post import curate, write_curation_aggregate, write_curation_csv
from .scenegraph import SceneGraph, assemble, serialize

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
OSM_API = "https://api.openstreetmap.org/api/0.6/map"


@dataclass(frozen=True)
class RunManifest:
    scene_id: str
    config_hash: str
    tool_version: str
    scene_build_s: float
    annotate_s: tuple
    outputs: tuple
    images: int

    def to_dict(self) -> dict:
        return {
            "schema": "trove-manifest/1",
            "scene_id": self.scene_id,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "timings": {
                "scene_build_s": self.scene_build_s,
                "annotate_s": list(self.annotate_s),
            },
            "outputs": list(self.outputs),
            "images": self.images,
        }


def run_pipeline(cfg: PipelineConfig, jobs: int = 1) -> list[RunManifest]:
    """All configured scenes through every stage; manifests written last.

    `jobs` bounds scene-level concurrency; outputs are byte-identical for any
    job count because every scene (and every image within it) is an
    independent pure computation.
    """
    if not cfg.scenes:
        raise ConfigError("config lists no scenes")

    def one(scene_id: str) -> RunManifest:
        try:
            return run_scene(cfg, scene_id, jobs=jobs)
        except StageFailure:
            raise
        except SceneCompilerError as e:
            raise StageFailure(scene_id, type(e).__name__, e) from e

    if jobs <= 1 or len(cfg.scenes) == 1:
        return [one(s) for s in cfg.scenes]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, cfg.scenes))


def run_scene(cfg: PipelineConfig, scene_id: str, jobs: int = 1) -> RunManifest:
    out_root = Path(cfg.output_dir)
    work = out_root / "_incomplete" / scene_id
    final = out_root / scene_id
    if work.exists():
        shutil.rmtree(work)
    work.mkdir(parents=True)

    t0 = time.perf_counter()
    scene, road_plans = build_scene(cfg, scene_id, work)
    scene_build_s = time.perf_counter() - t0

    annotate_s, outputs = annotate_scene(cfg, scene, work, jobs=jobs)

    outputs = ["scene.json", "scene.gltf"] + outputs
    manifest = RunManifest(
        scene_id=scene_id,
        config_hash=config_hash(cfg),
        tool_version=__version__,
        scene_build_s=scene_build_s,
        annotate_s=tuple(annotate_s),
        outputs=tuple(outputs),
        images=len(annotate_s),
    )

    if final.exists():
        shutil.rmtree(final)
    final.parent.mkdir(parents=True, exist_ok=True)
    work.replace(final)
    # manifest last: its presence marks the directory complete
    (final / MANIFEST_NAME).write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))
    _cleanup_incomplete(out_root)
    return manifest


def _cleanup_incomplete(out_root: Path):
    inc = out_root / "_incomplete"
    if inc.exists() and not any(inc.iterdir()):
        inc.rmdir()


def build_scene(cfg: PipelineConfig, scene_id: str, out_dir: Path | None = None):
    """Stages ingest..scene; returns (SceneGraph, road plans) and writes the
    scene files when out_dir is given."""
    record = parse_scene_record(cfg.dataset_root, scene_id)
    catalog = load_catalog(cfg.catalog_path)
    compat = load_compatibility(cfg.compat_path) if cfg.compat_path else None
    extract = _load_osm(cfg, record)
    sweep = _load_lidar(record)

    # layout: buildings
    plans = [plan_building(b, cfg.layout) for b in extract.buildings]
    facade_meshes = []
    pseudo_objects: list[ObjectBox] = []
    t_ref = record.ego_poses[0].timestamp
    for i, plan in enumerate(plans):
        if isinstance(plan.classification, RectReplace):
            rect = plan.classification
            pseudo_objects.append(ObjectBox(
                id=f"bldg_{extract.buildings[i].osm_id or i}",
                category="building",
                center=np.array([rect.center[0], rect.center[1], plan.height / 2.0]),
                size=np.array([rect.extents[0], rect.extents[1], plan.height]),
                yaw=rect.yaw,
                timestamp=t_ref,
            ))
        else:
            facade_meshes.append(extrude_building(plan))

    # layout: roads from OSM widths, LiDAR fit, or class defaults
    widths = [
        r.tagged_width if r.tagged_width else fit_road_width(
            r.centerline, sweep, r.highway_class, cfg.layout)
        for r in extract.roads
    ]
    road_plans = build_road_network(list(extract.roads), widths, cfg.layout)

    meshes: dict[str, TriMesh] = {}
    if facade_meshes:
        meshes["buildings"] = merge_meshes(facade_meshes)
    if road_plans:
        meshes["roads"] = joint_road_mesh(road_plans)
    if extract.sidewalks:
        meshes["sidewalks"] = merge_meshes(
            [ribbon_mesh(sw, cfg.sidewalk_width, z=SIDEWALK_Z) for sw in extract.sidewalks])
    meshes["ground"] = _ground_quad(record, extract, sweep, cfg.ground_margin)

    # placement
    objects = record.objects_at_first_timestamp() + pseudo_objects
    matches = match_assets(objects, catalog, k=cfg.top_k, seed=cfg.seed,
                           compatibility=compat)
    cameras = sample_cameras(record, matches, n=cfg.cameras_per_scene, seed=cfg.seed)

    # background
    background = []
    grid = None
    if sweep is not None:
        grid = vegetation_density(sweep, cfg.grid)
        grid = mask_roads(grid, road_plans, margin=cfg.background.mask_margin)
        n_veg = vegetation_count(grid, cfg.background)
        if n_veg > 0 and grid.total() > 0:
            try:
                background.extend(sample_vegetation(
                    grid, n_veg, catalog, seed=cfg.seed, cfg=cfg.background))
            except EmptyDensity:
                log.warning("scene %s: vegetation grid empty after masking", scene_id)
    background.extend(place_roadside(
        list(extract.sidewalks), catalog, cfg.background, seed=cfg.seed, roads=road_plans))

    scene = assemble(
        record=record,
        objects=objects,
        matches=matches,
        cameras=cameras,
        background=background,
        catalog=catalog,
        seed=cfg.seed,
        meshes=meshes,
    )

    if out_dir is not None:
        (out_dir / "scene.json").write_bytes(serialize(scene))
        export_interchange(scene, catalog, path=out_dir / "scene.gltf")
        if grid is not None:
            save_density_image(grid, out_dir / "vegetation_density.png")
    return scene, road_plans


def annotate_scene(cfg: PipelineConfig, scene: SceneGraph, out_dir: Path,
                   jobs: int = 1):
    """Render every camera; returns (per-image seconds, output paths).

    Cameras render concurrently up to `jobs`; files are written in camera
    order afterwards, so the output never depends on the job count.
    """
    soup = scene_triangles(scene)
    taxonomy = scene.taxonomy
    ann_dir = out_dir / "annotations"
    ann_dir.mkdir(exist_ok=True)
    write_palette(ann_dir / "palette.json", taxonomy)

    def render_one(cam):
        t0 = time.perf_counter()
        bundle = rasterize(scene, cam, resolution=cfg.resolution, tiles=cfg.tiles, soup=soup)
        return bundle, time.perf_counter() - t0

    outputs = ["annotations/palette.json"]
    if jobs <= 1 or len(scene.cameras) == 1:
        results = [render_one(c) for c in scene.cameras]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(render_one, scene.cameras))
    bundles = [r[0] for r in results]
    timings = [r[1] for r in results]

    rasters13 = []
    for idx, (cam, bundle) in enumerate(zip(scene.cameras, bundles)):
        cam_dir = ann_dir / f"cam_{idx:02d}"
        cam_dir.mkdir(exist_ok=True)
        write_png_gray8(cam_dir / "semantic.png", bundle.semantic20)
        write_png_gray8(cam_dir / "semantic13.png", bundle.semantic13)
        write_png_gray16(cam_dir / "instance.png",
                         np.clip(bundle.instance, 0, 65535).astype(np.uint16))
        write_pfm(cam_dir / "depth.pfm", bundle.depth)
        write_png_rgb16(cam_dir / "normals.png", _encode_normals(bundle.normals))
        if idx + 1 < len(scene.cameras):
            flow, valid = compute_flow(cam, scene.cameras[idx + 1],
                                       bundle.depth, bundle.instance,
                                       view_t=bundle.view,
                                       view_t1=bundles[idx + 1].view)
            bundle.flow, bundle.flow_valid = flow, valid
            write_flo(cam_dir / "flow.flo", flow)
        bundle.boxes2d = extract_boxes2d(bundle.instance, bundle.semantic20,
                                         min_pixels=cfg.min_box_pixels)
        visible = {b.instance_id for b in bundle.boxes2d}
        bundle.boxes3d = extract_boxes3d(scene, cam, visible_ids=visible)
        (cam_dir / "boxes.json").write_text(json.dumps(
            boxes_to_json(bundle.boxes2d, bundle.boxes3d, taxonomy),
            indent=2, sort_keys=True))
        outputs.append(f"annotations/cam_{idx:02d}")
        rasters13.append((f"cam_{idx:02d}", bundle.semantic13))

    report = curate(rasters13, min_classes=cfg.curation_min_classes,
                    pixel_floor=cfg.curation_pixel_floor, taxonomy=taxonomy)
    write_curation_csv(report, out_dir / "curation.csv", taxonomy)
    write_curation_aggregate(report, out_dir / "curation_aggregate.json", taxonomy)
    outputs += ["curation.csv", "curation_aggregate.json"]
    return timings, outputs


def _encode_normals(normals: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((normals + 1.0) * 0.5 * 65535.0), 0, 65535).astype(np.uint16)


def _load_osm(cfg: PipelineConfig, record: SceneRecord) -> OsmExtract:
    if cfg.osm_path:
        path = Path(cfg.osm_path)
        if not path.is_file():
            raise OsmUnavailable(f"OSM extract missing: {path}")
        return parse_osm(path.read_bytes(), record.origin)
    if not cfg.osm_fetch:
        raise OsmUnavailable("no osm_path configured and fetching is disabled")
    cache_dir = Path(cfg.osm_cache_dir or Path(cfg.output_dir) / "_osm_cache")
    cache_dir.mkdir(parents=True, exist_ok=True)
    bbox = _bbox_around(record, cfg.osm_radius_m)
    key = hashlib.sha256(bbox.encode()).hexdigest()[:16]
    cached = cache_dir / f"{key}.osm"
    if not cached.is_file():
        url = f"{OSM_API}?bbox={bbox}"
        log.info("fetching OSM extract: %s", url)
        with urllib.request.urlopen(url, timeout=60) as resp:
            cached.write_bytes(resp.read())
    return parse_osm(cached.read_bytes(), record.origin)


def _bbox_around(record: SceneRecord, radius_m: float) -> str:
    from .ingest.geoproj import unproject_xy

    lat0, lon0 = unproject_xy(-radius_m, -radius_m, record.origin)
    lat1, lon1 = unproject_xy(radius_m, radius_m, record.origin)
    return f"{lon0:.6f},{lat0:.6f},{lon1:.6f},{lat1:.6f}"


def _load_lidar(record: SceneRecord) -> LidarSweep | None:
    sweeps = [parse_lidar(f) for f in record.lidar_files]
    if not sweeps:
        return None
    if len(sweeps) == 1:
        return sweeps[0]
    return LidarSweep(
        points=np.vstack([s.points for s in sweeps]),
        labels=np.concatenate([s.labels for s in sweeps]),
    )


def _ground_quad(record: SceneRecord, extract: OsmExtract,
                 sweep: LidarSweep | None, margin: float) -> TriMesh:
    pts = [p.transform.translation[:2] for p in record.ego_poses]
    pts += [o.center[:2] for o in record.objects]
    for b in extract.buildings:
        pts.extend(b.footprint.vertices)
    for r in extract.roads:
        pts.extend(r.centerline)
    if sweep is not None:
        pts.append(sweep.points[:, :2].min(axis=0))
        pts.append(sweep.points[:, :2].max(axis=0))
    arr = np.array(pts) if pts else np.zeros((1, 2))
    lo = arr.min(axis=0) - margin
    hi = arr.max(axis=0) + margin
    verts = np.array([
        [lo[0], lo[1], 0.0], [hi[0], lo[1], 0.0], [hi[0], hi[1], 0.0], [lo[0], hi[1], 0.0],
    ])
    return TriMesh(verts, np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32))


# --- stats ---------------------------------------------------------------------

def collect_stats(run_dir) -> dict:
    """Aggregate manifests + curation reports under a run directory."""
    run_dir = Path(run_dir)
    manifests = sorted(run_dir.glob(f"*/{MANIFEST_NAME}"))
    scene_times: list[float] = []
    image_times: list[float] = []
    images = 0
    histogram: dict[str, int] = {}
    kept = 0
    total_samples = 0
    for path in manifests:
        doc = json.loads(path.read_text())
        scene_times.append(doc["timings"]["scene_build_s"])
        image_times.extend(doc["timings"]["annotate_s"])
        images += doc["images"]
        agg_path = path.parent / "curation_aggregate.json"
        if agg_path.is_file():
            agg = json.loads(agg_path.read_text())
            kept += agg.get("kept", 0)
            total_samples += agg.get("total", 0)
            for name, count in agg.get("pixel_histogram", {}).items():
                histogram[name] = histogram.get(name, 0) + count
    return {
        "scenes": len(manifests),
        "images": images,
        "kept_samples": kept,
        "total_samples": total_samples,
        "pixel_histogram": histogram,
        "timing": {
            "scene_build": _percentiles(scene_times),
            "per_image": _percentiles(image_times),
        },
    }


def _percentiles(values: list[float]) -> dict:
    if not values:
        return {"p50": 0.0, "p90": 0.0, "max": 0.0}
    arr = np.array(values)
    return {
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "max": float(arr.max()),
    }


def stats_csv(stats: dict) -> str:
    lines = ["key,value"]
    lines.append(f"scenes,{stats['scenes']}")
    lines.append(f"images,{stats['images']}")
    lines.append(f"kept_samples,{stats['kept_samples']}")
    lines.append(f"total_samples,{stats['total_samples']}")
    for name, count in sorted(stats["pixel_histogram"].items()):
        lines.append(f"pixels_{name.replace(' ', '_')},{count}")
    for group in ("scene_build", "per_image"):
        for k, v in stats["timing"][group].items():
            lines.append(f"{group}_{k},{v:.6f}")
    return "\n".join(lines) + "\n"
