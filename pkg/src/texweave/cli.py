"""Command-line entry point: one subcommand per stage plus the full pipeline."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .camera import Camera, default_view_ring
from .enhance import ExternalUpscaler, LanczosUpscaler, dilate, upscale
from .errors import TexweaveError
from .inpaint import cloud_from_texture, s3i_inpaint, texture_from_cloud
from .metrics import coverage, cross_view_consistency
from .pipeline import load_config, prepare_mesh, run_pipeline
from .project import bake_views, load_views, save_views
from .raster import rasterize_uv, render_view
from .seam import band_radius_for, detect_seams, seam_energy, ssa_smooth
from .synth import synth_views
from .texture import (UvTexture, load_mask, load_rgb, save_depth16, save_mask, save_normal8,
                      save_rgb, save_texture)

log = logging.getLogger("texweave")

# pipeline flags that map straight onto config keys
OVERRIDES = {
    "texture_resolution": int,
    "final_resolution": int,
    "n_views": int,
    "view_resolution": int,
    "min_cos": float,
    "delta": float,
    "k_inpaint": int,
    "max_rounds": int,
    "seam_band_radius": int,
    "upscale_factor": int,
    "seed": int,
    "jitter": float,
    "field": str,
}


def _texture_on_mesh(mesh, path, painted_path=None) -> tuple[UvTexture, object]:
    """Texture PNG whose valid mask is the mesh's UV coverage at the image resolution."""
    data = load_rgb(path)
    h, w = data.shape[:2]
    buffers = rasterize_uv(mesh, (w, h))
    valid = buffers.valid_mask
    painted = valid.copy() if painted_path is None else load_mask(painted_path) & valid
    return UvTexture(data, valid.copy(), painted), buffers


def _write_json(path, doc) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2))


def cmd_synth_views(args):
    mesh = prepare_mesh(args.mesh)
    cams = default_view_ring(args.n, args.elevation, args.radius, args.fov_y, args.resolution)
    views = synth_views(mesh, cams, args.field, args.seed, args.jitter)
    manifest = save_views(args.out, views.cameras, views.images,
                          {"field": args.field, "seed": args.seed, "jitter": args.jitter})
    print(manifest)


def cmd_render(args):
    mesh = prepare_mesh(args.mesh)
    cam = Camera(args.azimuth, args.elevation, args.radius, args.fov_y, args.resolution, args.resolution)
    texture = None
    if args.texture:
        texture, _ = _texture_on_mesh(mesh, args.texture)
    r = render_view(mesh, cam, texture=texture)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    depth_max = save_depth16(out / "depth.png", r.depth_map)
    save_normal8(out / "normal.png", r.normal_map, r.hit_mask)
    save_mask(out / "mask.png", r.hit_mask)
    if r.color_map is not None:
        save_rgb(out / "color.png", np.where(r.color_mask[..., None], r.color_map, 0.0))
    _write_json(out / "render.json", {"camera": cam.to_dict(), "depth_max": depth_max})


def cmd_bake(args):
    mesh = prepare_mesh(args.mesh)
    views = load_views(mesh, args.views)
    buffers = rasterize_uv(mesh, args.texture_resolution)
    fused, _, occ = bake_views(views, buffers, min_cos=args.min_cos, delta=args.delta,
                               use_occlusion=not args.no_occlusion, threads=args.threads)
    save_texture(args.out, fused, "fused")
    _write_json(Path(args.out) / "bake.json", {"coverage": coverage(fused), "occlusion": occ.to_dict()})


def cmd_inpaint(args):
    mesh = prepare_mesh(args.mesh)
    texture, buffers = _texture_on_mesh(mesh, args.texture, args.painted)
    cloud, rounds = s3i_inpaint(cloud_from_texture(texture, buffers), args.k, args.max_rounds,
                                gating=args.gating, threads=args.threads, return_rounds=True)
    out = texture_from_cloud(cloud, texture)
    save_texture(args.out, out, "inpainted")
    _write_json(Path(args.out) / "inpaint.json", {"rounds": rounds, "coverage": coverage(out)})


def cmd_upscale(args):
    data = load_rgb(args.texture)
    valid = np.ones(data.shape[:2], bool) if args.valid is None else load_mask(args.valid)
    texture = UvTexture(data, valid, valid.copy())
    if args.upscaled_input:
        upscaler = ExternalUpscaler(args.upscaled_input, args.factor)
    else:
        upscaler = LanczosUpscaler(args.factor)
    save_texture(args.out, upscale(dilate(texture, args.dilate), upscaler), "upscaled")


def cmd_smooth(args):
    mesh = prepare_mesh(args.mesh)
    texture, buffers = _texture_on_mesh(mesh, args.texture)
    radius = args.band_radius or band_radius_for(texture.width)
    seam = detect_seams(buffers.valid_mask, radius)
    cloud = cloud_from_texture(texture, buffers)
    smoothed = ssa_smooth(cloud, seam, args.k, threads=args.threads)
    save_texture(args.out, texture_from_cloud(smoothed, texture), "smoothed")
    save_mask(Path(args.out) / "seam_mask.png", seam.mask)
    _write_json(Path(args.out) / "smooth.json", {
        "seam_texels": seam.count,
        "seam_energy_before": seam_energy(cloud, seam),
        "seam_energy_after": seam_energy(smoothed, seam),
    })


def cmd_metrics(args):
    mesh = prepare_mesh(args.mesh)
    texture, buffers = _texture_on_mesh(mesh, args.texture, args.painted)
    seam = detect_seams(buffers.valid_mask, band_radius_for(texture.width))
    cams = default_view_ring(args.n, args.elevation, 2.2, 45.0, args.resolution, interleave=False)
    report = cross_view_consistency(mesh, texture, cams)
    _write_json(args.out, {
        "coverage": coverage(texture),
        "seam_energy": seam_energy(cloud_from_texture(texture, buffers), seam),
        "consistency_mean": report.overall,
        "consistency": report.to_dict(),
    })


def cmd_pipeline(args):
    overrides = {key: getattr(args, key) for key in OVERRIDES if getattr(args, key) is not None}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.no_occlusion:
        overrides["use_occlusion"] = False
    try:
        cfg = load_config(args.config, overrides)
    except ValueError as exc:
        raise TexweaveError(f"bad config: {exc}") from exc
    except OSError as exc:
        raise TexweaveError(f"cannot read config: {exc}") from exc
    result = run_pipeline(args.mesh, args.views, cfg, out_dir=args.out, dump_dir=args.dump_intermediates,
                          upscaled_input=args.upscaled_input)
    r = result.report
    print(f"coverage {r['coverage']:.4f}  seam energy {r['seam_energy_before']:.4f} -> "
          f"{r['seam_energy_after']:.4f}  consistency {r['consistency_mean']:.4f}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="texweave", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def view_ring(sp):
        sp.add_argument("--n", type=int, default=8)
        sp.add_argument("--elevation", type=float, default=30.0)
        sp.add_argument("--radius", type=float, default=2.2)
        sp.add_argument("--fov-y", type=float, default=45.0)
        sp.add_argument("--resolution", type=int, default=512)

    sp = sub.add_parser("synth-views", help="render procedural views of a mesh")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--field", default="checker")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jitter", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    view_ring(sp)
    sp.set_defaults(func=cmd_synth_views)

    sp = sub.add_parser("render", help="render depth/normal (and colour with --texture) for one camera")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--texture")
    sp.add_argument("--azimuth", type=float, default=0.0)
    sp.add_argument("--elevation", type=float, default=15.0)
    sp.add_argument("--radius", type=float, default=2.2)
    sp.add_argument("--fov-y", type=float, default=45.0)
    sp.add_argument("--resolution", type=int, default=512)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("bake", help="fuse view images into a UV texture")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--views", required=True, help="view manifest JSON")
    sp.add_argument("--texture-resolution", type=int, default=1024)
    sp.add_argument("--min-cos", type=float, default=0.2)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--no-occlusion", action="store_true")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bake)

    sp = sub.add_parser("inpaint", help="fill unpainted texels by 3D propagation")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--texture", required=True)
    sp.add_argument("--painted", help="mask PNG of painted texels (default: all covered texels)")
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--max-rounds", type=int, default=64)
    sp.add_argument("--gating", choices=["robust", "raw", "none"], default="robust")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_inpaint)

    sp = sub.add_parser("upscale", help="dilate then upscale a texture")
    sp.add_argument("--texture", required=True)
    sp.add_argument("--valid", help="valid mask PNG (default: every texel)")
    sp.add_argument("--factor", type=int, default=2)
    sp.add_argument("--dilate", type=int, default=3)
    sp.add_argument("--upscaled-input", help="externally upscaled image to splice in")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_upscale)

    sp = sub.add_parser("smooth", help="smooth colours along UV seams")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--texture", required=True)
    sp.add_argument("--band-radius", type=int)
    sp.add_argument("--k", type=int, default=8)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_smooth)

    sp = sub.add_parser("metrics", help="coverage, seam energy and cross-view consistency")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--texture", required=True)
    sp.add_argument("--painted")
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--elevation", type=float, default=15.0)
    sp.add_argument("--resolution", type=int, default=512)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("pipeline", help="run every stage end to end")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--views", help="view manifest JSON (default: procedural views)")
    sp.add_argument("--config", help="flat TOML config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dump-intermediates", metavar="DIR")
    sp.add_argument("--upscaled-input", help="externally upscaled 2x texture to splice in")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--no-occlusion", action="store_true")
    for key, kind in OVERRIDES.items():
        sp.add_argument("--" + key.replace("_", "-"), dest=key, type=kind)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (TexweaveError, OSError) as exc:
        print(f"texweave {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
