"""End-to-end texturing: bake views, inpaint in 3D, upscale, smooth seams, measure."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .camera import default_view_ring
from .enhance import ExternalUpscaler, LanczosUpscaler, dilate, upscale
from .inpaint import cloud_from_texture, s3i_inpaint, texture_from_cloud
from .mesh import TriangleMesh, load_mesh, normalize_mesh
from .metrics import coverage, cross_view_consistency
from .project import ViewSet, bake_views, load_views
from .raster import rasterize_uv
from .seam import band_radius_for, detect_seams, seam_energy, ssa_smooth
from .synth import synth_views
from .texture import UvTexture, save_depth16, save_mask, save_normal8, save_texture

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    texture_resolution: int = 1024
    final_resolution: int = 2048
    n_views: int = 8
    elevation: float = 30.0
    radius: float = 2.2
    fov_y: float = 45.0
    view_resolution: int = 512
    min_cos: float = 0.2
    delta: float | None = None  # None: derived from the view resolution
    use_occlusion: bool = True
    k_inpaint: int = 8
    max_rounds: int = 64
    gating: str = "robust"
    k_smooth: int = 8
    seam_gating: str = "robust"
    seam_band_radius: int = 2  # at 2048 texels, scaled with final_resolution
    dilate_radius: int = 3
    upscale_factor: int = 2
    field: str = "checker"
    jitter: float = 0.0
    seed: int = 0
    eval_views: int = 4
    eval_elevation: float = 15.0
    eval_points: int = 2048
    threads: int = 1

    def __post_init__(self):
        if self.final_resolution != self.texture_resolution * self.upscale_factor:
            raise ValueError("final_resolution must equal texture_resolution x upscale_factor")
        for name in ("texture_resolution", "n_views", "view_resolution", "k_inpaint", "max_rounds",
                     "k_smooth", "seam_band_radius", "upscale_factor", "eval_views", "eval_points", "threads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged = dict(values)
        # keep final_resolution consistent when only the base resolution or factor was given
        if "final_resolution" not in values and ({"texture_resolution", "upscale_factor"} & set(values)):
            merged["final_resolution"] = (values.get("texture_resolution", cls.texture_resolution)
                                          * values.get("upscale_factor", cls.upscale_factor))
        return cls(**merged)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path=None, overrides: dict | None = None) -> PipelineConfig:
    """Flat TOML key/value file, with ``overrides`` applied on top."""
    values = {}
    if path is not None:
        with open(path, "rb") as fh:
            values = tomllib.load(fh)
        nested = [k for k, v in values.items() if isinstance(v, dict)]
        if nested:
            raise ValueError(f"config must be flat; found tables {nested}")
    values.update(overrides or {})
    return PipelineConfig.from_mapping(values)


@dataclass(eq=False)
class PipelineResult:
    texture: UvTexture  # final, at final_resolution
    fused: UvTexture  # after view fusion, at texture_resolution
    completed: UvTexture  # after 3D inpainting
    upscaled: UvTexture  # before seam smoothing
    seam_mask: np.ndarray
    report: dict


def prepare_mesh(mesh) -> TriangleMesh:
    if not isinstance(mesh, TriangleMesh):
        mesh = load_mesh(mesh)
    return normalize_mesh(mesh)


def run_pipeline(mesh, views=None, config: PipelineConfig | None = None, *, out_dir=None,
                 dump_dir=None, upscaled_input=None) -> PipelineResult:
    """Run every stage; ``views`` is a manifest path, a ViewSet, or None for synthetic views."""
    cfg = config or PipelineConfig()
    timings = {}
    t0 = time.perf_counter()

    def mark(stage):
        nonlocal t0
        now = time.perf_counter()
        timings[stage] = round(now - t0, 3)
        t0 = now
        log.info("%s done in %.2fs", stage, timings[stage])

    mesh = prepare_mesh(mesh)
    buffers = rasterize_uv(mesh, cfg.texture_resolution)
    mark("rasterize_uv")

    if isinstance(views, ViewSet):
        viewset = views
    elif views is not None:
        viewset = load_views(mesh, views)
    else:
        cams = default_view_ring(cfg.n_views, cfg.elevation, cfg.radius, cfg.fov_y, cfg.view_resolution)
        viewset = synth_views(mesh, cams, cfg.field, cfg.seed, cfg.jitter)
    mark("views")

    fused, _, occ = bake_views(viewset, buffers, min_cos=cfg.min_cos, delta=cfg.delta,
                               use_occlusion=cfg.use_occlusion, threads=cfg.threads)
    mark("bake")

    cloud = cloud_from_texture(fused, buffers)
    cloud, rounds = s3i_inpaint(cloud, cfg.k_inpaint, cfg.max_rounds, gating=cfg.gating,
                                threads=cfg.threads, return_rounds=True)
    completed = texture_from_cloud(cloud, fused)
    mark("inpaint")

    if upscaled_input is not None:
        upscaler = ExternalUpscaler(upscaled_input, cfg.upscale_factor)
    else:
        upscaler = LanczosUpscaler(cfg.upscale_factor)
    upscaled = upscale(dilate(completed, cfg.dilate_radius), upscaler, cfg.final_resolution)
    mark("upscale")

    fine = rasterize_uv(mesh, cfg.final_resolution)
    # colour for the fine atlas comes from the dilated upscale, so its own coverage is authoritative
    up_fine = UvTexture(upscaled.data, fine.valid_mask.copy(), fine.valid_mask.copy())
    seam = detect_seams(fine.valid_mask, band_radius_for(cfg.final_resolution, cfg.seam_band_radius))
    cloud_up = cloud_from_texture(up_fine, fine)
    energy_before = seam_energy(cloud_up, seam)
    smoothed = ssa_smooth(cloud_up, seam, cfg.k_smooth, gating=cfg.seam_gating, threads=cfg.threads)
    energy_after = seam_energy(smoothed, seam)
    final = texture_from_cloud(smoothed, up_fine)
    mark("smooth")

    eval_cams = default_view_ring(cfg.eval_views, cfg.eval_elevation, cfg.radius, cfg.fov_y,
                                  cfg.view_resolution, interleave=False)
    consistency = cross_view_consistency(mesh, final, eval_cams, max_points=cfg.eval_points, min_cos=cfg.min_cos)
    mark("metrics")

    report = {
        "coverage": coverage(final),
        "coverage_fused": coverage(fused),
        "coverage_inpainted": coverage(completed),
        "seam_energy_before": energy_before,
        "seam_energy_after": energy_after,
        "consistency_mean": consistency.overall,
        "occlusion_excluded": occ.total_occluded,
        "occlusion": occ.to_dict(),
        "consistency": consistency.to_dict(),
        "inpaint_rounds": rounds,
        "seam_texels": seam.count,
        "chart_count": seam.chart_count,
        "resolutions": {"fused": list(fused.resolution), "completed": list(completed.resolution),
                        "upscaled": list(upscaled.resolution), "final": list(final.resolution)},
        "timings": timings,
        "config": cfg.to_dict(),
    }

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_texture(out, final, "texture")
        save_mask(out / "seam_mask.png", seam.mask)
        (out / "report.json").write_text(json.dumps(report, indent=2))
    if dump_dir is not None:
        dump = Path(dump_dir)
        dump.mkdir(parents=True, exist_ok=True)
        save_texture(dump, fused, "fused")
        save_texture(dump, completed, "inpainted")
        save_texture(dump, upscaled, "upscaled")
        depth_max = {}
        for i, (cam, r) in enumerate(zip(viewset.cameras, viewset.renders)):
            depth_max[f"view{i}"] = save_depth16(dump / f"view{i}_depth.png", r.depth_map)
            save_normal8(dump / f"view{i}_normal.png", r.normal_map, r.hit_mask)
        (dump / "depth_max.json").write_text(json.dumps(depth_max, indent=2))
    return PipelineResult(final, fused, completed, upscaled, seam.mask, report)
