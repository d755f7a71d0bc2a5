"""Spatial-aware 3D inpainting over the texel point cloud.

Unpainted texels are lifted to 3D together with the painted ones, and colour
flows from painted to unpainted points by KNN averaging whose weights mix
inverse distance with a piecewise normal-agreement factor.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import (DomainError, MismatchedResolutions, NoNeighbors, NoPaintedSeed,
                     UnpaintedPoints)
from .raster import GeometryBuffers
from .texture import UvTexture

log = logging.getLogger(__name__)

MIN_DISTANCE = 1e-12
DEFAULT_K = 8
DEFAULT_MAX_ROUNDS = 64


@dataclass(frozen=True, eq=False)
class TexelCloud:
    positions: np.ndarray  # (N, 3)
    normals: np.ndarray  # (N, 3)
    colors: np.ndarray  # (N, C)
    painted: np.ndarray  # (N,) bool
    texel_index: np.ndarray  # (N, 2) int (row, col)
    grid_shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def painted_count(self) -> int:
        return int(self.painted.sum())


class SpatialIndex:
    """k-nearest-neighbour queries over a point subset.

    Results are sorted by distance with ties broken by ascending point
    index, and always hold min(k, size) entries.
    """

    def __init__(self, points: np.ndarray, ids: np.ndarray | None = None, threads: int = 1):
        self.points = np.asarray(points, dtype=np.float64)
        self.ids = np.arange(len(self.points)) if ids is None else np.asarray(ids)
        self.threads = max(1, int(threads))
        # shrink-wrapped node boxes make queries far from a thin painted cap very slow
        self._tree = cKDTree(self.points, compact_nodes=False, balanced_tree=False) if len(self.points) else None

    def __len__(self) -> int:
        return len(self.points)

    def query(self, x: np.ndarray, k: int, distance_upper_bound: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
        """(M, k') distances and ids with k' = min(k, size); misses beyond the bound are inf / -1."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n = len(self)
        if n == 0:
            raise NoNeighbors("spatial index is empty")
        k = min(k, n)
        dist = np.empty((len(x), k))
        idx = np.empty((len(x), k), dtype=np.int64)
        todo = np.arange(len(x))
        extra = 4
        while len(todo):
            kk = min(k + extra, n)
            d, i = self._tree.query(x[todo], k=kk, distance_upper_bound=distance_upper_bound, workers=self.threads)
            d = d.reshape(len(todo), kk)
            i = i.reshape(len(todo), kk)
            # miss slots carry index n; keep them last
            order = np.lexsort((i, d), axis=1)
            d = np.take_along_axis(d, order, axis=1)
            i = np.take_along_axis(i, order, axis=1)
            # a tie straddling the window edge could hide a lower index: widen and retry
            unsure = (d[:, k - 1] == d[:, kk - 1]) & np.isfinite(d[:, k - 1]) if kk < n else np.zeros(len(todo), bool)
            done = ~unsure
            dist[todo[done]] = d[done, :k]
            idx[todo[done]] = i[done, :k]
            todo = todo[unsure]
            extra *= 4
        miss = ~np.isfinite(dist)
        ids = np.where(miss, -1, self.ids[np.minimum(idx, n - 1)])
        return dist, ids


def cloud_from_texture(texture: UvTexture, buffers: GeometryBuffers) -> TexelCloud:
    """One point per valid texel of ``buffers``; unpainted points start black."""
    if texture.resolution != buffers.resolution:
        raise MismatchedResolutions(f"texture {texture.resolution} vs buffers {buffers.resolution}")
    rows, cols = np.nonzero(buffers.valid_mask)
    painted = texture.painted_mask[rows, cols]
    colors = np.where(painted[:, None], texture.data[rows, cols], 0.0)
    return TexelCloud(
        positions=buffers.position_map[rows, cols],
        normals=buffers.normal_map[rows, cols],
        colors=colors,
        painted=painted.copy(),
        texel_index=np.stack([rows, cols], axis=1),
        grid_shape=buffers.valid_mask.shape,
    )


def robust_map(x):
    """Piecewise normal-agreement factor: 1e-8 below 0.5, identity up to 0.9, then 10."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1 + 1e-9):
        raise DomainError("cosine similarity outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    out = np.where(x < 0.5, 1e-8, np.where(x < 0.9, x, 10.0))
    return out if out.ndim else float(out)


def aggregation_weights(distances, target_normal, neighbor_normals, gating: str = "robust") -> np.ndarray:
    """Neighbour weights for colour aggregation, summing to one along the last axis.

    Normalized inverse distance times a normal-agreement factor, then
    renormalized. Broadcasts: distances (..., k), target_normal (..., 3),
    neighbor_normals (..., k, 3). ``gating`` is "robust" (piecewise map),
    "raw" (clamped plain cosine) or "none" (distance only).
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.shape[-1] == 0:
        raise NoNeighbors("no neighbours to aggregate")
    inv = 1.0 / np.maximum(d, MIN_DISTANCE)
    dist_score = inv / inv.sum(axis=-1, keepdims=True)
    if gating == "none":
        return dist_score
    dots = np.einsum("...kd,...d->...k", np.asarray(neighbor_normals, float), np.asarray(target_normal, float))
    if gating == "robust":
        factor = robust_map(np.clip(dots, -1.0, 1.0))
    elif gating == "raw":
        factor = np.maximum(dots, 0.0)
    else:
        raise ValueError(f"unknown gating {gating!r}")
    raw = dist_score * factor
    total = raw.sum(axis=-1, keepdims=True)
    # all-zero rows only happen with raw gating; fall back to distance weights
    return np.where(total > 0, raw / np.where(total > 0, total, 1.0), dist_score)


def _blend(cloud: TexelCloud, index: SpatialIndex, targets: np.ndarray, k: int, gating: str,
           chunk: int = 1 << 18) -> np.ndarray:
    out = np.empty((len(targets), cloud.colors.shape[1]))
    for s in range(0, len(targets), chunk):
        t = targets[s:s + chunk]
        d, nb = index.query(cloud.positions[t], k)
        w = aggregation_weights(d, cloud.normals[t], cloud.normals[nb], gating)
        out[s:s + chunk] = np.einsum("mk,mkc->mc", w, cloud.colors[nb])
    return out


def s3i_inpaint(cloud: TexelCloud, k: int = DEFAULT_K, max_rounds: int = DEFAULT_MAX_ROUNDS, *,
                gating: str = "robust", threads: int = 1, return_rounds: bool = False):
    """Propagate colour from painted to unpainted points until every point is painted.

    Each round snapshots the painted set, indexes it, and colours every
    unpainted point from its k nearest painted neighbours; new colours only
    become sources in the next round.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if cloud.painted_count == 0:
        raise NoPaintedSeed("no painted points to propagate from")
    colors = cloud.colors.copy()
    painted = cloud.painted.copy()
    rounds = 0
    while not painted.all() and rounds < max_rounds:
        src = np.flatnonzero(painted)
        dst = np.flatnonzero(~painted)
        index = SpatialIndex(cloud.positions[src], src, threads)
        snap = replace(cloud, colors=colors)
        new = _blend(snap, index, dst, k, gating)
        colors[dst] = new
        painted[dst] = True
        rounds += 1
        log.debug("inpaint round %d: painted %d points", rounds, len(dst))
    if not painted.all():
        src = np.flatnonzero(painted)
        dst = np.flatnonzero(~painted)
        _, nb = SpatialIndex(cloud.positions[src], src, threads).query(cloud.positions[dst], 1)
        colors[dst] = colors[nb[:, 0]]
        painted[dst] = True
    out = replace(cloud, colors=colors, painted=painted)
    return (out, rounds) if return_rounds else out


def texture_from_cloud(cloud: TexelCloud, texture: UvTexture) -> UvTexture:
    """Write point colours back to their texels; the texture becomes fully painted.

    The valid mask of the result is the cloud's texel set.
    """
    if not cloud.painted.all():
        raise UnpaintedPoints(f"{int((~cloud.painted).sum())} points still unpainted")
    if tuple(cloud.grid_shape) != texture.data.shape[:2]:
        raise MismatchedResolutions("cloud grid does not match the texture")
    data = texture.data.copy()
    r, c = cloud.texel_index[:, 0], cloud.texel_index[:, 1]
    data[r, c] = cloud.colors
    valid = np.zeros(cloud.grid_shape, bool)
    valid[r, c] = True
    return UvTexture(data, valid, valid.copy())


def dump_cloud(cloud: TexelCloud, path) -> None:
    """Text dump, one point per line: x y z nx ny nz r g b painted."""
    table = np.concatenate([cloud.positions, cloud.normals, cloud.colors[:, :3],
                            cloud.painted[:, None].astype(np.float64)], axis=1)
    np.savetxt(Path(path), table, fmt=["%.6f"] * 9 + ["%d"])
