"""Procedural colour fields and synthetic multi-view images.

Stands in for externally generated view images: a colour field is a pure
function of 3D position, so every view of the same surface point agrees
unless per-view jitter is injected on purpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .errors import UnknownField
from .mesh import TriangleMesh
from .project import ViewSet
from .raster import GeometryBuffers, render_view
from .texture import UvTexture


def _constant(p):
    return np.broadcast_to(np.array([0.8, 0.35, 0.2]), p.shape).copy()


def _stripes(p):
    palette = np.array([[0.85, 0.2, 0.2], [0.2, 0.75, 0.3], [0.2, 0.3, 0.85]])
    band = np.floor((p[:, 1] + 1.0) / 0.3).astype(np.int64) % 3
    return palette[band]


def _checker(p):
    a, b = np.array([0.9, 0.85, 0.3]), np.array([0.15, 0.3, 0.6])
    parity = np.floor(p / 0.3).astype(np.int64).sum(axis=1) % 2
    return np.where(parity[:, None] == 0, a, b)


def _smooth(p):
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([
        0.5 + 0.35 * np.sin(2.1 * x + 0.7 * y),
        0.5 + 0.35 * np.sin(1.7 * y - 1.3 * z + 0.4),
        0.5 + 0.35 * np.cos(1.9 * z + 1.1 * x),
    ], axis=1)


FIELDS = {"constant": _constant, "stripes": _stripes, "checker": _checker, "smooth": _smooth}


def color_field(name: str):
    try:
        return FIELDS[name]
    except KeyError:
        raise UnknownField(f"unknown colour field {name!r}; choose from {sorted(FIELDS)}") from None


@dataclass(eq=False)
class SceneFixture:
    mesh: TriangleMesh
    field: str
    views: ViewSet


def synth_views(mesh: TriangleMesh, cameras: list[Camera], field: str = "checker", seed: int = 0,
                jitter: float = 0.0) -> ViewSet:
    """Render each camera and paint hit pixels with ``field(hit position)``.

    ``jitter`` adds a per-view brightness offset drawn uniformly from
    [-jitter/2, jitter/2], so offsets of two views differ by at most ``jitter``.
    """
    fn = color_field(field)
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-jitter / 2, jitter / 2, size=len(cameras)) if jitter else np.zeros(len(cameras))
    renders, images = [], []
    for cam, off in zip(cameras, offsets):
        r = render_view(mesh, cam)
        img = np.zeros((cam.height, cam.width, 3))
        img[r.hit_mask] = np.clip(fn(r.position_map[r.hit_mask]) + off, 0.0, 1.0)
        renders.append(r)
        images.append(img)
    return ViewSet(list(cameras), images, renders)


def texture_from_field(buffers: GeometryBuffers, field: str) -> UvTexture:
    """Ground-truth texture: the field evaluated at every valid texel's surface point."""
    fn = color_field(field)
    data = np.zeros(buffers.valid_mask.shape + (3,))
    data[buffers.valid_mask] = fn(buffers.position_map[buffers.valid_mask])
    return UvTexture(data, buffers.valid_mask.copy(), buffers.valid_mask.copy())


def views_from_texture(mesh: TriangleMesh, cameras: list[Camera], texture: UvTexture) -> ViewSet:
    """Views rendered from an existing texture (the ground-truth round-trip scene)."""
    renders, images = [], []
    for cam in cameras:
        r = render_view(mesh, cam, texture=texture)
        img = np.where(r.color_mask[..., None], r.color_map, 0.0)
        renders.append(r)
        images.append(img)
    return ViewSet(list(cameras), images, renders)
