"""Orbit cameras looking at the origin, and the default view ring."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Camera:
    """Pinhole camera on a sphere around the origin.

    Azimuth 0 / elevation 0 sits on +z; positive azimuth swings towards +x,
    positive elevation towards +y. Pixel (col, row) has its centre at
    continuous image coordinates (col, row); row 0 is the top of the image.
    """

    azimuth: float
    elevation: float
    radius: float = 2.2
    fov_y: float = 45.0
    width: int = 512
    height: int = 512
    position: np.ndarray = field(init=False, repr=False, compare=False)
    forward: np.ndarray = field(init=False, repr=False, compare=False)
    right: np.ndarray = field(init=False, repr=False, compare=False)
    up: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 < self.fov_y < 180:
            raise ValueError(f"fov_y must lie in (0, 180), got {self.fov_y}")
        if self.radius <= 0:
            raise ValueError("camera radius must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("camera resolution must be positive")
        az, el = np.radians(self.azimuth), np.radians(self.elevation)
        pos = self.radius * np.array([np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])
        fwd = -pos / np.linalg.norm(pos)
        ref = WORLD_UP if abs(fwd @ WORLD_UP) < 1 - 1e-9 else np.array([0.0, 0.0, -np.sign(fwd[1])])
        right = np.cross(fwd, ref)
        right /= np.linalg.norm(right)
        up = np.cross(right, fwd)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "up", up / np.linalg.norm(up))

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def view_direction(self) -> np.ndarray:
        return self.forward

    @property
    def _tan_half(self) -> tuple[float, float]:
        ty = np.tan(np.radians(self.fov_y) / 2)
        return ty * self.width / self.height, ty

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        """World points -> camera frame (x right, y up, z forward)."""
        d = np.asarray(points, dtype=np.float64) - self.position
        return np.stack([d @ self.right, d @ self.up, d @ self.forward], axis=-1)

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Continuous pixel coordinates (col, row) and camera-space depth z.

        Points with z <= 0 get NaN coordinates.
        """
        pc = self.to_camera(points)
        z = pc[..., 2]
        tx, ty = self._tan_half
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(z > 0, z, np.nan)
            xn = pc[..., 0] / (safe * tx)
            yn = pc[..., 1] / (safe * ty)
        col = (xn + 1) * 0.5 * self.width - 0.5
        row = (1 - yn) * 0.5 * self.height - 0.5
        return col, row, z

    def pixel_rays(self) -> np.ndarray:
        """(H, W, 3) unit ray directions through pixel centres."""
        tx, ty = self._tan_half
        xs = ((np.arange(self.width) + 0.5) / self.width * 2 - 1) * tx
        ys = (1 - (np.arange(self.height) + 0.5) / self.height * 2) * ty
        d = self.forward + xs[None, :, None] * self.right + ys[:, None, None] * self.up
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "azimuth": float(self.azimuth),
            "elevation": float(self.elevation),
            "radius": float(self.radius),
            "fov_y": float(self.fov_y),
            "width": int(self.width),
            "height": int(self.height),
        }


def default_view_ring(n: int = 8, elevation_degrees: float = 30.0, radius: float = 2.2,
                      fov_y: float = 45.0, resolution: int | tuple[int, int] = 512,
                      interleave: bool = True) -> list[Camera]:
    """Evenly spaced azimuths; elevations alternate +e, -e starting with +e.

    ``interleave=False`` keeps every camera at +e (used for held-out rings).
    """
    if n < 1:
        raise ValueError("need at least one view")
    w, h = (resolution, resolution) if isinstance(resolution, int) else resolution
    cams = []
    for i in range(n):
        el = elevation_degrees if (i % 2 == 0 or not interleave) else -elevation_degrees
        cams.append(Camera(360.0 * i / n, el, radius, fov_y, w, h))
    return cams
