"""Chart-boundary seam detection and KNN seam smoothing on the texel cloud."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import NoNonSeamPoints
from .inpaint import DEFAULT_K, SpatialIndex, TexelCloud, _blend

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class SeamMask:
    mask: np.ndarray  # (H, W) bool
    band_radius: int
    chart_count: int
    chart_labels: np.ndarray  # (H, W) int, 0 outside charts

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def band_radius_for(resolution: int, radius_at_2k: int = 2) -> int:
    """Seam band width scaled from its 2048-texel value, at least one texel."""
    return max(1, int(round(radius_at_2k * resolution / 2048)))


def detect_seams(valid_mask: np.ndarray, band_radius: int = 2) -> SeamMask:
    """Valid texels within ``band_radius`` texels of a chart boundary.

    A boundary texel is valid with a 4-neighbour that is invalid (the image
    border does not count). ``band_radius=1`` selects exactly the boundary
    ring; each extra unit grows the band by one texel (Chebyshev).
    """
    if band_radius < 1:
        raise ValueError("band_radius must be at least 1")
    valid = np.asarray(valid_mask, bool)
    labels, count = ndimage.label(valid, structure=FOUR_CONNECTED)
    invalid = ~valid
    near_invalid = np.zeros_like(valid)
    near_invalid[1:] |= invalid[:-1]
    near_invalid[:-1] |= invalid[1:]
    near_invalid[:, 1:] |= invalid[:, :-1]
    near_invalid[:, :-1] |= invalid[:, 1:]
    boundary = valid & near_invalid
    if band_radius > 1:
        size = 2 * (band_radius - 1) + 1
        band = ndimage.binary_dilation(boundary, structure=np.ones((size, size), bool))
    else:
        band = boundary
    return SeamMask(band & valid, int(band_radius), int(count), labels)


def _seam_points(cloud: TexelCloud, seam: SeamMask) -> np.ndarray:
    if tuple(cloud.grid_shape) != seam.mask.shape:
        raise ValueError("seam mask and cloud come from different grids")
    return seam.mask[cloud.texel_index[:, 0], cloud.texel_index[:, 1]]


def ssa_smooth(cloud: TexelCloud, seam: SeamMask, k: int = DEFAULT_K, *, gating: str = "robust",
               threads: int = 1) -> TexelCloud:
    """Recolour seam points from their k nearest non-seam points in one pass.

    Weights are the same inverse-distance x normal-agreement mix used for
    inpainting. Non-seam colours are left untouched.
    """
    on_seam = _seam_points(cloud, seam)
    if not on_seam.any():
        return cloud
    src = np.flatnonzero(~on_seam)
    if len(src) == 0:
        raise NoNonSeamPoints("every point lies on a seam")
    dst = np.flatnonzero(on_seam)
    colors = cloud.colors.copy()
    colors[dst] = _blend(cloud, SpatialIndex(cloud.positions[src], src, threads), dst, k, gating)
    return replace(cloud, colors=colors)


def mean_texel_edge(cloud: TexelCloud) -> float:
    """Mean 3D distance between 4-adjacent texel points."""
    h, w = cloud.grid_shape
    grid = np.full((h, w), -1, dtype=np.int64)
    grid[cloud.texel_index[:, 0], cloud.texel_index[:, 1]] = np.arange(len(cloud))
    lengths = []
    for a, b in ((grid[:, :-1], grid[:, 1:]), (grid[:-1], grid[1:])):
        ok = (a >= 0) & (b >= 0)
        if ok.any():
            lengths.append(np.linalg.norm(cloud.positions[a[ok]] - cloud.positions[b[ok]], axis=1))
    if not lengths:
        return 0.0
    return float(np.concatenate(lengths).mean())


def seam_energy(cloud: TexelCloud, seam: SeamMask, pair_radius: float | None = None,
                candidates: int = 32, uv_gap: float | None = None) -> float:
    """Mean per-channel colour jump across seams.

    Each seam point is paired with its nearest seam point within
    ``pair_radius`` in 3D (default: three mean texel edges) that lies across
    a seam: in a different UV chart, or in the same chart but more than
    ``uv_gap`` texels away in the atlas (default: four pair radii, in
    texels), as happens where a chart wraps onto itself. Returns 0 when no
    such pair exists.
    """
    on_seam = _seam_points(cloud, seam)
    idx = np.flatnonzero(on_seam)
    if len(idx) < 2:
        return 0.0
    edge = mean_texel_edge(cloud)
    if pair_radius is None:
        pair_radius = 3.0 * edge
    if uv_gap is None:
        uv_gap = 4.0 * pair_radius / edge if edge > 0 else 12.0
    texel = cloud.texel_index[idx]
    labels = seam.chart_labels[texel[:, 0], texel[:, 1]]
    index = SpatialIndex(cloud.positions[idx])
    d, nb = index.query(cloud.positions[idx], candidates, distance_upper_bound=pair_radius)
    safe = np.maximum(nb, 0)
    apart = np.linalg.norm(texel[safe] - texel[:, None, :], axis=2) > uv_gap
    other = (nb >= 0) & (d <= pair_radius) & ((labels[safe] != labels[:, None]) | apart)
    has = other.any(axis=1)
    if not has.any():
        return 0.0
    first = np.argmax(other, axis=1)[has]
    a = idx[has]
    b = idx[nb[has, first]]
    return float(np.abs(cloud.colors[a] - cloud.colors[b]).mean())
