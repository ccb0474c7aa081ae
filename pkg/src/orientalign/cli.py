"""Command-line entry points.

Exit codes: 0 success, 1 domain error, 2 usage error.  Reports go to stdout
as JSON; meshes and images go to files.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import curation, metrics, placement, pose
from .geometry import GeometryError, pca_align
from .meshio import MeshError, load_mesh, normalize_mesh, save_mesh
from .render import orthogonal_four_views, render, save_mask_png, save_png, six_canonical_views
from .vlm import VlmConfig, VlmError, applied_yaw_deg, canonicalize_with_vlm


class DomainError(RuntimeError):
    pass


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _vlm_config(args):
    return VlmConfig(
        endpoint_url=args.endpoint,
        model_name=args.model,
        api_key_env=args.api_key_env,
        wire_style=args.wire_style,
        timeout=args.timeout,
        max_retries=args.max_retries,
    )


def _add_vlm_args(p):
    p.add_argument("--endpoint", required=True, help="VLM endpoint URL")
    p.add_argument("--model", default="gemini-2.0-flash")
    p.add_argument("--api-key-env", default="VLM_API_KEY")
    p.add_argument("--wire-style", default="chat-completion-json",
                   choices=["chat-completion-json", "gemini-style-json"])
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=2)


def cmd_chamfer(args):
    a = normalize_mesh(load_mesh(args.mesh_a))
    b = normalize_mesh(load_mesh(args.mesh_b))
    flagged, cd = metrics.flag_misalignment(
        a, b, gamma=args.gamma, n=args.samples, seed=args.seed)
    _emit({"cd": cd, "flag": bool(flagged), "gamma": args.gamma,
           "samples": args.samples})


def cmd_pca_align(args):
    mesh = normalize_mesh(load_mesh(args.mesh))
    cloud = metrics.sample_surface(mesh, args.samples, seed=args.seed)
    rot = pca_align(cloud)
    if args.output:
        save_mesh(mesh.transformed(rotation=rot), args.output)
    _emit({"rotation": [[float(x) for x in row] for row in rot],
           "output": args.output})


def cmd_canonicalize(args):
    mesh = normalize_mesh(load_mesh(args.mesh))
    config = _vlm_config(args)
    aligned, verdict = canonicalize_with_vlm(mesh, config)
    yaw = applied_yaw_deg(verdict)
    if yaw is not None and args.output:
        save_mesh(aligned, args.output)
    _emit({
        "label": verdict.label.value,
        "applied_yaw_deg": yaw,
        "attempts": verdict.attempts,
        "excluded": yaw is None,
        "output": args.output if yaw is not None else None,
    })


def cmd_curate(args):
    config = _vlm_config(args)
    manifest = curation.curate_directory(
        args.in_dir, args.out_dir, config, resume=args.resume,
        resolution=args.resolution, max_workers=args.workers)
    _emit({"manifest": os.path.join(args.out_dir, curation.MANIFEST_NAME),
           "counts": manifest.counts(),
           "review_queue": manifest.review_queue()})


def cmd_error_analysis(args):
    skip = curation.read_skip_list(args.skip_list)
    report = curation.vlm_error_analysis(
        args.candidate_dir, args.reference_dir, gamma=args.gamma,
        n=args.samples, seed=args.seed, skip_ids=skip)
    print(report.to_json())


def cmd_render_views(args):
    mesh = normalize_mesh(load_mesh(args.mesh))
    cams = (orthogonal_four_views(args.resolution) if args.set == "four"
            else six_canonical_views(args.resolution))
    names = (["front", "back", "left", "right"] if args.set == "four"
             else ["front", "front_left", "front_right", "left", "right", "back"])
    os.makedirs(args.out_dir, exist_ok=True)
    written = []
    for name, cam in zip(names, cams):
        out = render(mesh, cam)
        color_path = os.path.join(args.out_dir, f"{name}.png")
        save_png(out.color_u8(), color_path)
        save_mask_png(out.mask, os.path.join(args.out_dir, f"{name}_mask.png"))
        depth = np.where(out.mask, out.depth, np.nan).astype(np.float32)
        placement.write_dmap(depth, os.path.join(args.out_dir, f"{name}.dmap"))
        written.append(color_path)
    _emit({"views": written})


def cmd_estimate(args):
    template = normalize_mesh(load_mesh(args.template))
    from PIL import Image

    query = np.asarray(Image.open(args.query).convert("RGB"))
    grid = pose.make_grid(*args.grid)
    from .render import evaluation_camera

    camera = evaluation_camera(args.camera_seed, resolution=query.shape[0])
    if query.shape[0] != query.shape[1]:
        raise DomainError("query image must be square")
    descriptor = pose.GrayscaleDescriptor()
    result = pose.estimate_orientation(template, query, camera, grid,
                                       descriptor, refine=args.refine)
    _emit({
        "rotation": [[float(x) for x in row] for row in result.best],
        "distance": result.best_distance,
        "angles_deg": list(result.best_angles) if result.best_angles else None,
    })


def cmd_eval(args):
    grid = pose.make_grid(*args.grid)
    descriptor = pose.GrayscaleDescriptor()
    report = pose.evaluate_estimator(args.manifest, grid, descriptor,
                                     seed=args.seed, refine=args.refine,
                                     resolution=args.resolution)
    print(report.to_json())


def cmd_place(args):
    try:
        coords = [float(x) for x in args.arrow.split(",")]
        if len(coords) != 4:
            raise ValueError
    except ValueError:
        raise DomainError("--arrow must be x1,y1,x2,y2")
    scene = placement.load_scene_bundle(args.scene_dir)
    arrow = placement.Arrow2D(coords[:2], coords[2:])
    region = "window" if args.window_radius else "whole-image"
    result = placement.plan_placement(
        scene, arrow, args.scale, region=region,
        radius_px=args.window_radius or 64, stride=args.stride,
        ransac=args.ransac)
    _emit(result.to_dict())


def cmd_serve(args):
    from .service import ServiceConfig, run

    config = ServiceConfig(host=args.host, port=args.port,
                           scenes_dir=args.scenes_dir,
                           meshes_dir=args.meshes_dir)
    run(config)


def _grid_triple(text):
    parts = [int(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be n_az,n_polar,n_roll")
    return parts


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orientalign",
        description="Mesh orientation canonicalization, metrics, pose "
                    "estimation and arrow-based placement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chamfer", help="Chamfer distance + threshold flag")
    p.add_argument("mesh_a")
    p.add_argument("mesh_b")
    p.add_argument("--gamma", type=float, default=metrics.DEFAULT_CD_GAMMA)
    p.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_chamfer)

    p = sub.add_parser("pca-align", help="PCA baseline alignment")
    p.add_argument("mesh")
    p.add_argument("--output")
    p.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pca_align)

    p = sub.add_parser("canonicalize", help="Single-object VLM canonicalization")
    p.add_argument("mesh")
    p.add_argument("--output")
    _add_vlm_args(p)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("curate", help="Batch VLM canonicalization pipeline")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--workers", type=int, default=4)
    _add_vlm_args(p)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("error-analysis", help="VLM error rates vs reference")
    p.add_argument("candidate_dir")
    p.add_argument("reference_dir")
    p.add_argument("--gamma", type=float, default=metrics.DEFAULT_CD_GAMMA)
    p.add_argument("--samples", type=int, default=metrics.DEFAULT_SAMPLE_COUNT)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-list")
    p.set_defaults(func=cmd_error_analysis)

    p = sub.add_parser("render-views", help="Render the fixed view rigs")
    p.add_argument("mesh")
    p.add_argument("--set", choices=["four", "six"], default="four")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--out-dir", default="views")
    p.set_defaults(func=cmd_render_views)

    p = sub.add_parser("estimate", help="Estimate orientation from a query image")
    p.add_argument("template")
    p.add_argument("query")
    p.add_argument("--grid", type=_grid_triple, default=list(pose.DEFAULT_GRID))
    p.add_argument("--refine", action="store_true")
    p.add_argument("--camera-seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("eval", help="Closed-loop estimator evaluation")
    p.add_argument("manifest")
    p.add_argument("--grid", type=_grid_triple, default=list(pose.DEFAULT_GRID))
    p.add_argument("--refine", action="store_true", default=True)
    p.add_argument("--no-refine", dest="refine", action="store_false")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("place", help="Plan an arrow-based placement")
    p.add_argument("scene_dir")
    p.add_argument("--arrow", required=True, help="x1,y1,x2,y2 in pixels")
    p.add_argument("--scale", type=float, required=True)
    p.add_argument("--window-radius", type=float, default=None)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--ransac", action="store_true")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("serve", help="Run the placement HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--scenes-dir", required=True)
    p.add_argument("--meshes-dir", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        args.func(args)
    except (MeshError, GeometryError, metrics.MetricsError, pose.PoseError,
            placement.PlacementError, VlmError, DomainError, ValueError,
            OSError) as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
