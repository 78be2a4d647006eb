"""Headless Blender entry point for the scenec interchange bridge.

    blender --background --python bridge.py -- <scene.gltf> <out-dir> \
        [--catalog DIR] [--scene-json FILE] [--resolution WxH] \
        [--samples N] [--engine CYCLES|BLENDER_EEVEE] [--index-pass] [--no-render]

Writes `bridge_report.json` into the output directory: imported instance and
camera counts, warnings, rendered image paths, and (when --scene-json is
given) per-instance pose errors against the compiler's scene file.
"""
import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))


def parse_args(argv):
    parser = argparse.ArgumentParser(prog="bridge.py")
    parser.add_argument("scene_file")
    parser.add_argument("out_dir")
    parser.add_argument("--catalog", default=None, help="asset dir (meshes/, hdri/)")
    parser.add_argument("--scene-json", default=None,
                        help="compiler scene.json for the pose round-trip report")
    parser.add_argument("--resolution", default="1600x900")
    parser.add_argument("--samples", type=int, default=64)
    parser.add_argument("--engine", default="CYCLES")
    parser.add_argument("--index-pass", action="store_true",
                        help="enable the object-index pass for mask comparison")
    parser.add_argument("--no-render", action="store_true",
                        help="import and report only")
    return parser.parse_args(argv)


def main() -> int:
    if "--" in sys.argv:
        argv = sys.argv[sys.argv.index("--") + 1:]
    else:
        argv = sys.argv[1:]
    args = parse_args(argv)

    try:
        import bpy  # noqa: F401
    except ImportError:
        print("bridge.py must run inside Blender: "
              "blender --background --python bridge.py -- <scene> <out>",
              file=sys.stderr)
        return 1

    from scenec_bridge.gltf_scene import compare_poses, load_interchange
    from scenec_bridge.importer import import_scene, render_rgb

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = import_scene(args.scene_file, catalog_dir=args.catalog)
    if args.scene_json:
        scene = load_interchange(args.scene_file)
        report.poses = compare_poses(scene, args.scene_json)

    if not args.no_render:
        width, height = (int(v) for v in args.resolution.lower().split("x"))
        render_rgb(report, out_dir, resolution=(width, height),
                   samples=args.samples, engine=args.engine,
                   index_pass=args.index_pass)

    (out_dir / "bridge_report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print(f"bridge: {report.imported_instances} instances, "
          f"{report.imported_cameras} cameras, {len(report.rendered)} renders")
    return 0


if __name__ == "__main__":
    sys.exit(main())
