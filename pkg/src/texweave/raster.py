"""UV-space and view-space rasterization.

Both rasterizers share one vectorized scan: a pixel is covered when its
centre lies inside the 2D triangle, with a top-left style rule on shared
edges so that every centre on an interior edge belongs to exactly one face.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import ResolutionTooSmall
from .mesh import TriangleMesh
from .texture import UvTexture, sample_bilinear, uv_to_pixel

log = logging.getLogger(__name__)

MIN_UV_RESOLUTION = 16
NEAR = 1e-4
_CHUNK = 1 << 21


@dataclass(frozen=True, eq=False)
class GeometryBuffers:
    position_map: np.ndarray  # (H, W, 3), zero where invalid
    normal_map: np.ndarray  # (H, W, 3), unit where valid, zero elsewhere
    valid_mask: np.ndarray  # (H, W) bool
    face_id_map: np.ndarray  # (H, W) int64, -1 where invalid
    overlap_count: int = 0

    @property
    def width(self) -> int:
        return self.valid_mask.shape[1]

    @property
    def height(self) -> int:
        return self.valid_mask.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height


@dataclass(frozen=True, eq=False)
class ViewRender:
    depth_map: np.ndarray  # (H, W), Euclidean distance from the camera, inf on misses
    normal_map: np.ndarray  # (H, W, 3)
    position_map: np.ndarray  # (H, W, 3)
    face_id_map: np.ndarray  # (H, W)
    hit_mask: np.ndarray  # (H, W) bool
    color_map: np.ndarray | None = None
    color_mask: np.ndarray | None = None  # hit pixels that found painted texels

    @property
    def resolution(self) -> tuple[int, int]:
        return self.hit_mask.shape[1], self.hit_mask.shape[0]


def _edge(a: np.ndarray, b: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Signed edge function, evaluated from a canonical endpoint order so that
    the two faces sharing an edge get exactly opposite values."""
    swap = (a[:, 0] > b[:, 0]) | ((a[:, 0] == b[:, 0]) & (a[:, 1] > b[:, 1]))
    lo = np.where(swap[:, None], b, a)
    hi = np.where(swap[:, None], a, b)
    e = (hi[:, 0] - lo[:, 0]) * (py - lo[:, 1]) - (hi[:, 1] - lo[:, 1]) * (px - lo[:, 0])
    return np.where(swap, -e, e)


def _owns_edge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exactly one of (a->b) and (b->a) owns a shared edge
    dx, dy = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    return (dy > 0) | ((dy == 0) & (dx < 0))


def scan_triangles(tri: np.ndarray, width: int, height: int):
    """Yield (face, col, row, bary) batches for pixel centres inside ``tri``.

    ``tri`` is (F, 3, 2) in continuous pixel coordinates. Batches come out in
    ascending face order; ``bary`` is (n, 3) barycentrics w.r.t. the original
    corner order.
    """
    tri = np.asarray(tri, dtype=np.float64)
    area = (tri[:, 1, 0] - tri[:, 0, 0]) * (tri[:, 2, 1] - tri[:, 0, 1]) - \
        (tri[:, 1, 1] - tri[:, 0, 1]) * (tri[:, 2, 0] - tri[:, 0, 0])
    ok = np.isfinite(area) & (area != 0)
    lo = np.floor(np.nan_to_num(tri.min(axis=1), nan=0.0))
    hi = np.ceil(np.nan_to_num(tri.max(axis=1), nan=-1.0))
    cmin = np.clip(lo[:, 0], 0, width).astype(np.int64)
    rmin = np.clip(lo[:, 1], 0, height).astype(np.int64)
    cmax = np.clip(hi[:, 0], -1, width - 1).astype(np.int64)
    rmax = np.clip(hi[:, 1], -1, height - 1).astype(np.int64)
    bw = np.maximum(cmax - cmin + 1, 0)
    bh = np.maximum(rmax - rmin + 1, 0)
    bh[~ok] = 0

    # work items: (face, first row, row count), big faces split into row bands
    faces = np.nonzero(bw * bh > 0)[0]
    items_f, items_r, items_n = [], [], []
    for f in faces:
        band = max(1, _CHUNK // int(bw[f]))
        for r0 in range(int(rmin[f]), int(rmin[f] + bh[f]), band):
            items_f.append(f)
            items_r.append(r0)
            items_n.append(min(band, int(rmin[f] + bh[f]) - r0))
    if not items_f:
        return
    items_f = np.asarray(items_f)
    items_r = np.asarray(items_r)
    items_n = np.asarray(items_n)
    counts = bw[items_f] * items_n
    ends = np.cumsum(counts)
    start = 0
    while start < len(items_f):
        base = ends[start - 1] if start else 0
        stop = max(start + 1, int(np.searchsorted(ends, base + _CHUNK, side="right")))
        f_ids = items_f[start:stop]
        cnt = counts[start:stop]
        face = np.repeat(f_ids, cnt)
        offs = np.arange(int(cnt.sum())) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        w_rep = np.repeat(bw[f_ids], cnt)
        col = np.repeat(cmin[f_ids], cnt) + offs % w_rep
        row = np.repeat(items_r[start:stop], cnt) + offs // w_rep
        t = tri[face]
        px, py = col.astype(np.float64), row.astype(np.float64)
        v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
        w0 = _edge(v1, v2, px, py)
        w1 = _edge(v2, v0, px, py)
        w2 = _edge(v0, v1, px, py)
        sgn = np.sign(area[face])
        w0, w1, w2 = w0 * sgn, w1 * sgn, w2 * sgn
        flip = sgn < 0

        def inside(w, a, b):
            own = np.where(flip, _owns_edge(b, a), _owns_edge(a, b))
            return (w > 0) | ((w == 0) & own)

        keep = inside(w0, v1, v2) & inside(w1, v2, v0) & inside(w2, v0, v1)
        if keep.any():
            a = np.abs(area[face[keep]])
            bary = np.stack([w0[keep], w1[keep], w2[keep]], axis=1) / a[:, None]
            yield face[keep], col[keep], row[keep], bary
        start = stop


def rasterize_uv(mesh: TriangleMesh, resolution, *, flat: bool = False) -> GeometryBuffers:
    """Rasterize the UV atlas into per-texel position / normal / face buffers.

    Overlapping charts are resolved last-writer-wins (highest face index)
    and counted in ``overlap_count``.
    """
    w, h = (resolution, resolution) if np.isscalar(resolution) else resolution
    w, h = int(w), int(h)
    if w < MIN_UV_RESOLUTION or h < MIN_UV_RESOLUTION:
        raise ResolutionTooSmall(f"UV resolution {w}x{h} below {MIN_UV_RESOLUTION}")
    col, row = uv_to_pixel(mesh.uv_corners, w, h)
    tri = np.stack([col, row], axis=-1)
    face_id = np.full(h * w, -1, dtype=np.int64)
    bary_map = np.zeros((h * w, 3))
    fragments = 0
    for face, c, r, bary in scan_triangles(tri, w, h):
        pix = r * w + c
        fragments += len(pix)
        # last fragment per texel wins; batches are in ascending face order
        _, first_rev = np.unique(pix[::-1], return_index=True)
        sel = len(pix) - 1 - first_rev
        face_id[pix[sel]] = face[sel]
        bary_map[pix[sel]] = bary[sel]
    valid = face_id >= 0
    overlaps = fragments - int(valid.sum())
    if overlaps:
        log.warning("UV atlas overlaps: %d texels written more than once", overlaps)

    fv = mesh.faces[face_id[valid]]
    b = bary_map[valid]
    positions = np.zeros((h * w, 3))
    normals = np.zeros((h * w, 3))
    positions[valid] = np.einsum("nk,nkd->nd", b, mesh.vertices[fv])
    if flat:
        n = mesh.face_normals()[face_id[valid]]
    else:
        n = np.einsum("nk,nkd->nd", b, mesh.vertex_normals[fv])
    normals[valid] = _unit(n, mesh.face_normals()[face_id[valid]])
    return GeometryBuffers(
        positions.reshape(h, w, 3), normals.reshape(h, w, 3), valid.reshape(h, w),
        face_id.reshape(h, w), overlaps,
    )


def _unit(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    bad = length[..., 0] < 1e-12
    out = v / np.where(length > 0, length, 1.0)
    out[bad] = fallback[bad]
    return out


def _moller_trumbore(origin, dirs, corners):
    """Distances (n,) and barycentrics (n, 3) of rays ``dirs`` against one triangle."""
    v0, v1, v2 = corners
    e1, e2 = v1 - v0, v2 - v0
    p = np.cross(dirs, e2)
    det = p @ e1
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        s = origin - v0
        u = (p @ s) * inv
        q = np.cross(s, e1)
        v = (dirs @ q) * inv
        t = (q @ e2) * inv
    hit = (np.abs(det) > 1e-15) & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > NEAR)
    return np.where(hit, t, np.inf), np.stack([1 - u - v, u, v], axis=-1)


def render_view(mesh: TriangleMesh, camera: Camera, resolution=None, texture: UvTexture | None = None,
                *, flat: bool = False) -> ViewRender:
    """Perspective z-buffer render of depth, normals, positions and optional colour.

    Depth is the Euclidean camera-to-surface distance. Colour is a bilinear
    lookup of ``texture`` at the interpolated UV, restricted to painted texels.
    """
    if resolution is not None:
        w, h = (resolution, resolution) if np.isscalar(resolution) else resolution
        if (w, h) != camera.resolution:
            camera = Camera(camera.azimuth, camera.elevation, camera.radius, camera.fov_y, int(w), int(h))
    w, h = camera.resolution
    col, row, z = camera.project(mesh.vertices)
    fz = z[mesh.faces]
    front = (fz > NEAR).all(axis=1)
    crossing = ~front & (fz > NEAR).any(axis=1)

    depth = np.full(h * w, np.inf)
    face_id = np.full(h * w, -1, dtype=np.int64)
    bary_map = np.zeros((h * w, 3))

    def merge(pix, d, face, bary):
        order = np.lexsort((face, d, pix))
        pix, d, face, bary = pix[order], d[order], face[order], bary[order]
        first = np.ones(len(pix), bool)
        first[1:] = pix[1:] != pix[:-1]
        pix, d, face, bary = pix[first], d[first], face[first], bary[first]
        cur_d, cur_f = depth[pix], face_id[pix]
        win = (d < cur_d) | ((d == cur_d) & (face < cur_f))
        depth[pix[win]] = d[win]
        face_id[pix[win]] = face[win]
        bary_map[pix[win]] = bary[win]

    front_idx = np.nonzero(front)[0]
    tri = np.stack([col[mesh.faces[front_idx]], row[mesh.faces[front_idx]]], axis=-1)
    for local, c, r, bary in scan_triangles(tri, w, h):
        face = front_idx[local]
        inv_z = bary / fz[face]
        persp = inv_z / inv_z.sum(axis=1, keepdims=True)
        p = np.einsum("nk,nkd->nd", persp, mesh.vertices[mesh.faces[face]])
        d = np.linalg.norm(p - camera.position, axis=1)
        merge(r * w + c, d, face, persp)

    if crossing.any():
        rays = camera.pixel_rays().reshape(-1, 3)
        for f in np.nonzero(crossing)[0]:
            t, bary = _moller_trumbore(camera.position, rays, mesh.vertices[mesh.faces[f]])
            pix = np.nonzero(np.isfinite(t))[0]
            if len(pix):
                merge(pix, t[pix], np.full(len(pix), f), bary[pix])

    hit = face_id >= 0
    fv = mesh.faces[face_id[hit]]
    b = bary_map[hit]
    positions = np.zeros((h * w, 3))
    normals = np.zeros((h * w, 3))
    positions[hit] = np.einsum("nk,nkd->nd", b, mesh.vertices[fv])
    fn = mesh.face_normals()[face_id[hit]]
    n = fn if flat else np.einsum("nk,nkd->nd", b, mesh.vertex_normals[fv])
    normals[hit] = _unit(n, fn)

    color = color_mask = None
    if texture is not None:
        uv = np.einsum("nk,nkd->nd", b, mesh.uv_corners[face_id[hit]])
        tc, tr = uv_to_pixel(uv, texture.width, texture.height)
        vals, ok = sample_bilinear(texture.data, tc, tr, texture.painted_mask)
        color = np.zeros((h * w, texture.channels))
        color_mask = np.zeros(h * w, bool)
        color[hit] = np.where(ok[:, None], vals, 0.0)
        color_mask[hit] = ok
        color = color.reshape(h, w, -1)
        color_mask = color_mask.reshape(h, w)

    return ViewRender(
        depth.reshape(h, w), normals.reshape(h, w, 3), positions.reshape(h, w, 3),
        face_id.reshape(h, w), hit.reshape(h, w), color, color_mask,
    )
