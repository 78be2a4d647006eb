"""Command-line entry point.

Subcommands mirror the pipeline stages so each is independently invokable:
ingest, build-scene, annotate, color-transfer, curate, stats, and run.
Exit codes: 0 success, 2 config error, 3 input error, 4 stage failure.
Logs go to stderr; machine-readable outputs go to the run directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .errors import (
    ConfigError,
    CorruptStream,
    EmptyScene,
    MissingFile,
    OsmUnavailable,
    SceneCompilerError,
    SchemaVersionMismatch,
    SchemaViolation,
    TruncatedRecord,
    UnresolvedNodeRef,
    XmlMalformed,
)

log = logging.getLogger("scenec")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_STAGE = 4

_INPUT_ERRORS = (MissingFile, SchemaViolation, EmptyScene, XmlMalformed,
                 UnresolvedNodeRef, TruncatedRecord, OsmUnavailable,
                 SchemaVersionMismatch, CorruptStream)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenec",
        description="Compile real road-scene annotations into virtual scenes "
                    "with pixel-exact ground truth.",
    )
    parser.add_argument("--version", action="version", version=f"scenec {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate a scene record")
    p.add_argument("--dataset-root", required=True)
    p.add_argument("--scene-id", required=True)
    p.add_argument("--from-nuscenes", action="store_true",
                   help="treat dataset-root as nuScenes tables and convert first")
    p.add_argument("--out", help="write the normalized scene JSON here")

    p = sub.add_parser("build-scene", help="compile one scene to scene.json + scene.gltf")
    p.add_argument("--config", required=True)
    p.add_argument("--scene-id", required=True)

    p = sub.add_parser("annotate", help="render ground truth for a built scene")
    p.add_argument("--config", required=True)
    p.add_argument("--scene-file", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("color-transfer", help="match image statistics in L*a*b*")
    p.add_argument("--source", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--target", help="target image (PNG)")
    group.add_argument("--stats", help="stored LabStats JSON")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--out", required=True)

    p = sub.add_parser("curate", help="class-diversity filter over semantic rasters")
    p.add_argument("--rasters", required=True, help="directory of 13-class PNGs")
    p.add_argument("--min-classes", type=int, default=6)
    p.add_argument("--pixel-floor", type=float, default=0.001)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)

    p = sub.add_parser("stats", help="aggregate run manifests")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--csv", help="also write a CSV report here")

    p = sub.add_parser("run", help="full pipeline for every configured scene")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent scenes/images; outputs are identical for any value")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except _INPUT_ERRORS as e:
        log.error("input error: %s", e)
        return EXIT_INPUT
    except SceneCompilerError as e:
        log.error("stage failure: %s", e)
        return EXIT_STAGE


def _dispatch(args) -> int:
    if args.command == "ingest":
        return _cmd_ingest(args)
    if args.command == "build-scene":
        return _cmd_build_scene(args)
    if args.command == "annotate":
        return _cmd_annotate(args)
    if args.command == "color-transfer":
        return _cmd_color_transfer(args)
    if args.command == "curate":
        return _cmd_curate(args)
    if args.command == "stats":
        return _cmd_stats(args)
    if args.command == "run":
        return _cmd_run(args)
    raise AssertionError(f"unhandled command {args.command}")


def _cmd_ingest(args) -> int:
    from .ingest import parse_scene_record, scene_record_to_dict
    from .ingest.trovein import parse_scene_dict

    if args.from_nuscenes:
        from .ingest.nuscenes import convert_nuscenes

        doc = convert_nuscenes(args.dataset_root, args.scene_id)
        record = parse_scene_dict(doc)
    else:
        record = parse_scene_record(args.dataset_root, args.scene_id)
        doc = scene_record_to_dict(record)
    log.info("scene %s: %d ego poses, %d cameras, %d boxes",
             record.scene_id, len(record.ego_poses), len(record.cameras),
             len(record.objects))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True))
        log.info("wrote %s", args.out)
    return EXIT_OK


def _cmd_build_scene(args) -> int:
    from .pipeline import build_scene

    cfg = load_config(args.config)
    out_dir = Path(cfg.output_dir) / args.scene_id
    out_dir.mkdir(parents=True, exist_ok=True)
    scene, _ = build_scene(cfg, args.scene_id, out_dir)
    log.info("scene %s: %d instances, %d cameras -> %s",
             args.scene_id, len(scene.instances), len(scene.cameras), out_dir)
    return EXIT_OK


def _cmd_annotate(args) -> int:
    from .pipeline import annotate_scene
    from .scenegraph import deserialize

    cfg = load_config(args.config)
    scene = deserialize(Path(args.scene_file).read_bytes())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings, _ = annotate_scene(cfg, scene, out_dir)
    log.info("rendered %d images (mean %.2fs)", len(timings),
             sum(timings) / max(1, len(timings)))
    return EXIT_OK


def _cmd_color_transfer(args) -> int:
    from .annotate.formats import read_png, write_png_rgb8
    from .post import LabStats, color_transfer, lab_stats

    src = read_png(args.source)
    if src.ndim != 3:
        raise SchemaViolation(f"{args.source} is not an RGB image")
    if args.stats:
        stats = LabStats.from_dict(json.loads(Path(args.stats).read_text()))
    else:
        tgt = read_png(args.target)
        if tgt.ndim != 3:
            raise SchemaViolation(f"{args.target} is not an RGB image")
        stats = lab_stats(tgt.astype(np.uint8))
    out = color_transfer(src.astype(np.uint8), stats, alpha=args.alpha)
    write_png_rgb8(args.out, out)
    log.info("wrote %s", args.out)
    return EXIT_OK


def _cmd_curate(args) -> int:
    from .annotate.formats import read_png
    from .post import curate, write_curation_aggregate, write_curation_csv

    raster_dir = Path(args.rasters)
    if not raster_dir.is_dir():
        raise MissingFile(str(raster_dir))
    paths = sorted(raster_dir.rglob("semantic13.png"))
    if not paths:
        paths = sorted(raster_dir.glob("*.png"))
    rasters = ((str(p.relative_to(raster_dir)), read_png(p)) for p in paths)
    report = curate(rasters, min_classes=args.min_classes, pixel_floor=args.pixel_floor)
    write_curation_csv(report, args.out_csv)
    write_curation_aggregate(report, args.out_json)
    log.info("curated %d rasters, kept %d", len(report.samples), len(report.kept_ids()))
    return EXIT_OK


def _cmd_stats(args) -> int:
    from .pipeline import collect_stats, stats_csv

    stats = collect_stats(args.run_dir)
    print(json.dumps(stats, indent=2, sort_keys=True))
    if args.csv:
        Path(args.csv).write_text(stats_csv(stats))
    return EXIT_OK


def _cmd_run(args) -> int:
    from .pipeline import run_pipeline

    cfg = load_config(args.config)
    manifests = run_pipeline(cfg, jobs=max(1, args.jobs))
    for m in manifests:
        log.info("scene %s: %d images, build %.2fs", m.scene_id, m.images, m.scene_build_s)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
