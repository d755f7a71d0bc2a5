"""Inverse UV projection of view images, occlusion limiting, and weighted fusion."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .camera import Camera
from .errors import ManifestError, MismatchedResolutions
from .mesh import TARGET_RADIUS, TriangleMesh
from .raster import GeometryBuffers, ViewRender, render_view
from .texture import UvTexture, load_rgb, sample_bilinear, save_rgb

log = logging.getLogger(__name__)

DEFAULT_MIN_COS = 0.2


class TexelState(IntEnum):
    INVALID = 0
    VISIBLE = 1
    OCCLUDED = 2
    UNOBSERVED = 3


@dataclass(eq=False)
class ViewSet:
    cameras: list[Camera]
    images: list[np.ndarray]
    renders: list[ViewRender]

    def __post_init__(self):
        if not (len(self.cameras) == len(self.images) == len(self.renders)) or not self.cameras:
            raise ValueError("a view set needs matching, non-empty camera/image/render lists")
        for cam, img in zip(self.cameras, self.images):
            if img.shape[:2] != (cam.height, cam.width):
                raise MismatchedResolutions(f"image {img.shape[:2]} vs camera {(cam.height, cam.width)}")

    def __len__(self) -> int:
        return len(self.cameras)


@dataclass(eq=False)
class PerViewUvLayer:
    color: np.ndarray  # (H, W, C)
    weight: np.ndarray  # (H, W) in [0, 1]
    valid_mask: np.ndarray  # (H, W)


@dataclass
class OcclusionReport:
    candidates: int = 0
    occluded: list[int] = field(default_factory=list)
    back_facing: list[int] = field(default_factory=list)
    unobserved: list[int] = field(default_factory=list)

    @property
    def total_occluded(self) -> int:
        return int(sum(self.occluded))

    def to_dict(self) -> dict:
        return {"candidates": self.candidates, "occluded": self.occluded,
                "back_facing": self.back_facing, "unobserved": self.unobserved}


def default_delta(camera: Camera, diameter: float = 2 * TARGET_RADIUS) -> float:
    """Occlusion tolerance: two depth-pixel footprints of the scene diameter."""
    return 2.0 * diameter / max(camera.width, camera.height)


def detect_occlusion(buffers: GeometryBuffers, camera: Camera, depth: ViewRender,
                     delta: float | None = None) -> np.ndarray:
    """Per-texel :class:`TexelState` by comparing texel distance to the depth map.

    A valid texel is OCCLUDED when its nearest pixel is a hit and the texel
    lies more than ``delta`` behind the rendered depth; texels landing off
    frame, behind the camera or on a miss pixel are UNOBSERVED.

    The rendered depth is read as the farthest hit among the 2 x 2 pixels
    around the projected position rather than at the nearest pixel alone:
    on steeply inclined surfaces half a pixel of offset is worth several
    delta of depth, which would otherwise hide a surface behind itself.
    """
    if depth.resolution != camera.resolution:
        raise MismatchedResolutions("depth render does not match the camera resolution")
    delta = default_delta(camera) if delta is None else delta
    state = np.full(buffers.valid_mask.shape, TexelState.INVALID, dtype=np.int8)
    valid = buffers.valid_mask
    p = buffers.position_map[valid]
    col, row, z = camera.project(p)
    ci = np.round(np.nan_to_num(col, nan=-1.0)).astype(np.int64)
    ri = np.round(np.nan_to_num(row, nan=-1.0)).astype(np.int64)
    inside = (z > 0) & (ci >= 0) & (ci < camera.width) & (ri >= 0) & (ri < camera.height)
    ci_s, ri_s = np.where(inside, ci, 0), np.where(inside, ri, 0)
    hit = inside & depth.hit_mask[ri_s, ci_s]
    dist = np.linalg.norm(p - camera.position, axis=1)
    h, w = depth.hit_mask.shape
    c0 = np.clip(np.floor(np.nan_to_num(col)), 0, max(w - 2, 0)).astype(np.int64)
    r0 = np.clip(np.floor(np.nan_to_num(row)), 0, max(h - 2, 0)).astype(np.int64)
    c1, r1 = np.minimum(c0 + 1, w - 1), np.minimum(r0 + 1, h - 1)
    far = np.where(depth.hit_mask, depth.depth_map, -np.inf)
    ref = np.maximum.reduce([far[r0, c0], far[r0, c1], far[r1, c0], far[r1, c1], far[ri_s, ci_s]])
    occluded = hit & (dist > ref + delta)
    s = np.full(len(p), TexelState.UNOBSERVED, dtype=np.int8)
    s[hit] = TexelState.VISIBLE
    s[occluded] = TexelState.OCCLUDED
    state[valid] = s
    return state


def inverse_project(image: np.ndarray, camera: Camera, buffers: GeometryBuffers,
                    occlusion: np.ndarray | None = None, min_cos: float = DEFAULT_MIN_COS,
                    depth: ViewRender | None = None, delta: float | None = None) -> PerViewUvLayer:
    """Pull view colours back onto the texel grid, weighted by view/normal cosine.

    ``occlusion`` is the state map from :func:`detect_occlusion`; when None,
    every in-frame texel counts as visible (no unprojection reduction). With
    ``depth``, bilinear taps are limited to hit pixels, and, when occlusion
    limiting is on, to pixels whose depth agrees with the texel within
    ``delta``.
    """
    if image.shape[:2] != (camera.height, camera.width):
        raise MismatchedResolutions("image does not match camera resolution")
    h, w = buffers.valid_mask.shape
    channels = image.shape[2] if image.ndim == 3 else 1
    color = np.zeros((h, w, channels))
    weight = np.zeros((h, w))
    valid = buffers.valid_mask
    if occlusion is not None:
        valid = valid & (occlusion == TexelState.VISIBLE)
    p = buffers.position_map[valid]
    n = buffers.normal_map[valid]
    to_cam = camera.position - p
    dist = np.linalg.norm(to_cam, axis=1)
    cos = np.einsum("nk,nk->n", to_cam / dist[:, None], n)
    wgt = np.where(cos >= min_cos, np.maximum(cos, 0.0), 0.0)
    col, row, z = camera.project(p)
    inside = (z > 0) & (col >= -0.5) & (col <= camera.width - 0.5) & (row >= -0.5) & (row <= camera.height - 0.5)
    wgt = np.where(inside, wgt, 0.0)

    mask = None
    if depth is not None:
        tol = default_delta(camera) if delta is None else delta
        hit, dmap = depth.hit_mask, depth.depth_map
        if occlusion is None:
            mask = hit
        else:
            def mask(rr, cc):
                return hit[rr, cc] & (np.abs(dmap[rr, cc] - dist) <= tol)

    vals, ok = sample_bilinear(image.reshape(camera.height, camera.width, channels), col, row, mask)
    wgt = np.where(ok, wgt, 0.0)
    color[valid] = np.where((wgt > 0)[:, None], vals, 0.0)
    weight[valid] = wgt
    return PerViewUvLayer(color, weight, buffers.valid_mask.copy())


def fuse_layers(layers: list[PerViewUvLayer]) -> UvTexture:
    """Cosine-weighted fusion, normalized by the weight sum at each texel.

    Layers are accumulated in list order; the raw weight sum is kept on the
    result for diagnostics.
    """
    if not layers:
        raise ValueError("need at least one layer")
    shape = layers[0].weight.shape
    for layer in layers:
        if layer.weight.shape != shape or layer.color.shape[:2] != shape:
            raise MismatchedResolutions("layers differ in resolution")
    acc = np.zeros(layers[0].color.shape)
    wsum = np.zeros(shape)
    for layer in layers:
        acc += layer.weight[..., None] * layer.color
        wsum += layer.weight
    painted = wsum > 0
    data = np.zeros_like(acc)
    data[painted] = acc[painted] / wsum[painted][:, None]
    valid = layers[0].valid_mask.copy()
    return UvTexture(np.clip(data, 0.0, 1.0), valid, painted & valid, weight_sum=wsum)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def bake_views(views: ViewSet, buffers: GeometryBuffers, *, min_cos: float = DEFAULT_MIN_COS,
               delta: float | None = None, use_occlusion: bool = True,
               threads: int = 1) -> tuple[UvTexture, list[PerViewUvLayer], OcclusionReport]:
    """Occlusion detection + inverse projection for every view, then fusion."""
    def one(i):
        cam, img, render = views.cameras[i], views.images[i], views.renders[i]
        state = detect_occlusion(buffers, cam, render, delta)
        layer = inverse_project(img, cam, buffers, state if use_occlusion else None, min_cos, render, delta)
        n = buffers.normal_map[buffers.valid_mask]
        to_cam = cam.position - buffers.position_map[buffers.valid_mask]
        visible = state[buffers.valid_mask] == TexelState.VISIBLE
        back = int((visible & (np.einsum("nk,nk->n", to_cam, n) <= 0)).sum())
        return layer, int((state == TexelState.OCCLUDED).sum()), back, int((state == TexelState.UNOBSERVED).sum())

    results = _map(one, range(len(views)), threads)
    report = OcclusionReport(candidates=int(buffers.valid_mask.sum()))
    layers = []
    for layer, occ, back, unobs in results:
        layers.append(layer)
        report.occluded.append(occ)
        report.back_facing.append(back)
        report.unobserved.append(unobs)
    return fuse_layers(layers), layers, report


@dataclass
class SyncReport:
    per_view: list[float]
    pixels: list[int]
    occlusion: OcclusionReport

    @property
    def mean(self) -> float:
        total = sum(e * n for e, n in zip(self.per_view, self.pixels))
        count = sum(self.pixels)
        return total / count if count else 0.0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "per_view": self.per_view, "pixels": self.pixels,
                "occlusion": self.occlusion.to_dict()}


def observed_pixels(render: ViewRender, camera: Camera, min_cos: float = DEFAULT_MIN_COS) -> np.ndarray:
    """Hit pixels whose surface faces the camera with cosine >= min_cos."""
    to_cam = camera.position - render.position_map
    length = np.linalg.norm(to_cam, axis=-1)
    cos = np.einsum("hwk,hwk->hw", to_cam, render.normal_map) / np.where(length > 0, length, 1.0)
    return render.hit_mask & (cos >= min_cos)


def sync_roundtrip(mesh: TriangleMesh, views: ViewSet, buffers: GeometryBuffers, *,
                   min_cos: float = DEFAULT_MIN_COS, delta: float | None = None,
                   use_occlusion: bool = True, threads: int = 1) -> tuple[UvTexture, SyncReport]:
    """Fuse the views, re-render the fused texture per camera, and measure the residue."""
    fused, _, occ = bake_views(views, buffers, min_cos=min_cos, delta=delta,
                               use_occlusion=use_occlusion, threads=threads)

    def one(i):
        cam, img = views.cameras[i], views.images[i]
        rr = render_view(mesh, cam, texture=fused)
        m = observed_pixels(rr, cam, min_cos) & rr.color_mask
        if not m.any():
            return 0.0, 0
        return float(np.abs(rr.color_map[m] - img[m]).mean()), int(m.sum())

    results = _map(one, range(len(views)), threads)
    return fused, SyncReport([r[0] for r in results], [r[1] for r in results], occ)


def make_viewset(mesh: TriangleMesh, cameras: list[Camera], images: list[np.ndarray]) -> ViewSet:
    renders = [render_view(mesh, cam) for cam in cameras]
    return ViewSet(list(cameras), list(images), renders)


def load_manifest(path) -> tuple[list[Camera], list[Path], dict]:
    """Read a view manifest; returns cameras, image paths and the raw document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    entries = doc.get("views") if isinstance(doc, dict) else None
    if not entries:
        raise ManifestError(f"{path}: manifest has no views")
    cams, images = [], []
    for k, v in enumerate(entries):
        try:
            cams.append(Camera(float(v["azimuth"]), float(v["elevation"]), float(v.get("radius", 2.2)),
                               float(v.get("fov_y", 45.0)), int(v["width"]), int(v["height"])))
            images.append(path.parent / v["image"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: view {k} is malformed: {exc}") from exc
    return cams, images, doc


def load_views(mesh: TriangleMesh, manifest) -> ViewSet:
    cams, paths, _ = load_manifest(manifest)
    images = []
    for p in paths:
        if not p.exists():
            raise ManifestError(f"view image missing: {p}")
        images.append(load_rgb(p))
    return make_viewset(mesh, cams, images)


def save_views(directory, cameras: list[Camera], images: list[np.ndarray], extra: dict | None = None) -> Path:
    """Write view PNGs plus ``manifest.json``; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (cam, img) in enumerate(zip(cameras, images)):
        name = f"v{i}.png"
        save_rgb(directory / name, img)
        entries.append({"image": name, **cam.to_dict()})
    doc = {"views": entries}
    if extra:
        doc.update(extra)
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps(doc, indent=2))
    return manifest
