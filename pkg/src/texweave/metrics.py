"""Coverage, cross-view consistency, and the exhaustive ray-cast oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .camera import Camera
from .mesh import TriangleMesh
from .raster import rasterize_uv, render_view
from .texture import UvTexture, sample_bilinear

EPS_DET = 1e-15
T_MIN = 1e-9


def raycast_oracle(mesh: TriangleMesh, origin, direction):
    """Nearest hit of one ray by testing every face.

    Returns (distance, face) or None. Equal distances resolve to the
    smallest face index, so a ray through a shared edge reports one face.
    """
    t, face = raycast_many(mesh, np.asarray(origin, float)[None], np.asarray(direction, float)[None])
    if not np.isfinite(t[0]):
        return None
    return float(t[0]), int(face[0])


def raycast_many(mesh: TriangleMesh, origins: np.ndarray, directions: np.ndarray,
                 budget: int = 1 << 21) -> tuple[np.ndarray, np.ndarray]:
    """Exhaustive Moller-Trumbore for a batch of rays; inf / -1 on misses."""
    origins = np.broadcast_to(np.asarray(origins, float), np.shape(directions))
    directions = np.asarray(directions, float)
    c = mesh.corners()
    v0 = c[:, 0]
    e1 = c[:, 1] - v0
    e2 = c[:, 2] - v0
    n = len(directions)
    best_t = np.full(n, np.inf)
    best_f = np.full(n, -1, dtype=np.int64)
    step = max(1, budget // max(1, mesh.face_count))
    for s in range(0, n, step):
        o = origins[s:s + step, None, :]
        d = directions[s:s + step, None, :]
        p = np.cross(d, e2[None])
        det = np.einsum("rfk,fk->rf", p, e1)
        ok = np.abs(det) > EPS_DET
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        sv = o - v0[None]
        u = np.einsum("rfk,rfk->rf", p, sv) * inv
        q = np.cross(sv, e1[None])
        v = np.einsum("rfk,rfk->rf", np.broadcast_to(d, q.shape), q) * inv
        t = np.einsum("rfk,fk->rf", q, e2) * inv
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > T_MIN)
        t = np.where(hit, t, np.inf)
        f = np.argmin(t, axis=1)
        best_t[s:s + step] = t[np.arange(len(f)), f]
        best_f[s:s + step] = np.where(np.isfinite(best_t[s:s + step]), f, -1)
    return best_t, best_f


def oracle_visibility(mesh: TriangleMesh, camera: Camera, points: np.ndarray,
                      rel_eps: float = 1e-6, abs_eps: float = 1e-5) -> np.ndarray:
    """True where nothing lies between the camera and the point (by exhaustive ray cast)."""
    diff = points - camera.position
    dist = np.linalg.norm(diff, axis=1)
    dirs = diff / dist[:, None]
    t, _ = raycast_many(mesh, camera.position[None], dirs)
    return t >= dist * (1 - rel_eps) - abs_eps


def coverage(texture: UvTexture) -> float:
    valid = int(texture.valid_mask.sum())
    if valid == 0:
        return 1.0
    return float((texture.painted_mask & texture.valid_mask).sum()) / valid


@dataclass
class ConsistencyReport:
    pairs: dict = field(default_factory=dict)  # (i, j) -> mean abs colour difference
    counts: dict = field(default_factory=dict)  # (i, j) -> number of shared points
    overall: float = 0.0

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "pairs": [{"a": i, "b": j, "mean": m, "points": self.counts[(i, j)]} for (i, j), m in self.pairs.items()],
        }


def _sample_points(mesh: TriangleMesh, sample_resolution: int, max_points: int) -> tuple[np.ndarray, np.ndarray]:
    buf = rasterize_uv(mesh, sample_resolution)
    idx = np.flatnonzero(buf.valid_mask)
    if len(idx) > max_points:
        idx = idx[np.linspace(0, len(idx) - 1, max_points).astype(np.int64)]
    return buf.position_map.reshape(-1, 3)[idx], buf.normal_map.reshape(-1, 3)[idx]


def cross_view_consistency(mesh: TriangleMesh, texture, cameras: list[Camera], *,
                           sample_resolution: int = 128, max_points: int = 4096,
                           min_cos: float = 0.2) -> ConsistencyReport:
    """Pairwise colour disagreement between renders of shared surface points.

    ``texture`` is one UvTexture shared by every camera, or a list with one
    texture per camera (a per-view bake). Surface samples come from a
    ``sample_resolution`` UV raster; a sample counts for a camera when the
    ray-cast oracle sees it unobstructed, it lies in the frame, and it faces
    the camera with cosine >= ``min_cos``.
    """
    textures = texture if isinstance(texture, (list, tuple)) else [texture] * len(cameras)
    if len(textures) != len(cameras):
        raise ValueError("need one texture per camera")
    points, normals = _sample_points(mesh, sample_resolution, max_points)
    colors, seen = [], []
    for cam, tex in zip(cameras, textures):
        render = render_view(mesh, cam, texture=tex)
        col, row, _ = cam.project(points)
        vis = oracle_visibility(mesh, cam, points)
        to_cam = cam.position - points
        cos = np.einsum("nk,nk->n", to_cam / np.linalg.norm(to_cam, axis=1, keepdims=True), normals)
        vals, ok = sample_bilinear(render.color_map, col, row, render.color_mask)
        inside = (col >= -0.5) & (col <= cam.width - 0.5) & (row >= -0.5) & (row <= cam.height - 0.5)
        colors.append(vals)
        seen.append(ok & vis & inside & (cos >= min_cos))
    report = ConsistencyReport()
    total, count = 0.0, 0
    for i, j in itertools.combinations(range(len(cameras)), 2):
        both = seen[i] & seen[j]
        n = int(both.sum())
        diff = np.abs(colors[i][both] - colors[j][both]).mean(axis=1) if n else np.zeros(0)
        report.pairs[(i, j)] = float(diff.mean()) if n else 0.0
        report.counts[(i, j)] = n
        total += float(diff.sum())
        count += n
    report.overall = total / count if count else 0.0
    return report
