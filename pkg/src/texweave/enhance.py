"""Gutter dilation and pluggable texture upscalers."""
from __future__ import annotations

from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import UpscalerMismatch
from .texture import UvTexture, load_rgb

LANCZOS_LOBES = 3


def dilate(texture: UvTexture, radius: int) -> UvTexture:
    """Fill invalid texels within ``radius`` (Chebyshev) of a chart with the nearest valid colour.

    Nearest is Euclidean; ties go to the source texel that comes first in
    scanline order. Valid texels are never modified.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    h, w = texture.valid_mask.shape
    filled = np.zeros((h, w), bool)
    if radius == 0:
        return replace(texture, dilated_mask=filled)
    data = texture.data.copy()
    valid = texture.valid_mask
    offsets = sorted(((dy * dy + dx * dx, dy, dx)
                      for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)
                      if (dy, dx) != (0, 0)))
    for _, dy, dx in offsets:
        # target (r, c) takes source (r + dy, c + dx)
        t_r = slice(max(0, -dy), h - max(0, dy))
        t_c = slice(max(0, -dx), w - max(0, dx))
        s_r = slice(max(0, dy), h - max(0, -dy))
        s_c = slice(max(0, dx), w - max(0, -dx))
        take = ~valid[t_r, t_c] & ~filled[t_r, t_c] & valid[s_r, s_c]
        if take.any():
            data[t_r, t_c][take] = texture.data[s_r, s_c][take]
            filled[t_r, t_c] |= take
    return replace(texture, data=data, dilated_mask=filled)


class Upscaler:
    """Resamples texture data by an integer factor."""

    name = "base"

    def __init__(self, factor: int):
        if int(factor) != factor or factor < 1:
            raise ValueError("upscale factor must be a positive integer")
        self.factor = int(factor)

    def __call__(self, data: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityUpscaler(Upscaler):
    name = "identity"

    def __init__(self):
        super().__init__(1)

    def __call__(self, data):
        return data.copy()


def _lanczos(x: np.ndarray, a: int = LANCZOS_LOBES) -> np.ndarray:
    return np.where(np.abs(x) < a, np.sinc(x) * np.sinc(x / a), 0.0)


def _resample_axis(data: np.ndarray, factor: int, axis: int, a: int) -> np.ndarray:
    data = np.moveaxis(data, axis, 0)
    n = data.shape[0]
    # one weight row per output phase, so every output with the same phase uses identical weights
    phase_centre = (np.arange(factor) + 0.5) / factor - 0.5
    phase_base = np.floor(phase_centre).astype(np.int64)
    offsets = np.arange(-a + 1, a + 1)
    phase_w = _lanczos(phase_centre[:, None] - (phase_base[:, None] + offsets[None, :]), a)
    phase_w /= phase_w.sum(axis=1, keepdims=True)
    phase_ref = np.round(phase_centre).astype(np.int64)

    out_idx = np.arange(n * factor)
    src, ph = np.divmod(out_idx, factor)
    taps = np.clip(src[:, None] + phase_base[ph][:, None] + offsets[None, :], 0, n - 1)
    weights = phase_w[ph]
    ref = data[np.clip(src + phase_ref[ph], 0, n - 1)]
    out = ref.copy()
    # accumulate differences from the nearest tap so constant input stays bit-exact
    for j in range(taps.shape[1]):
        wj = weights[:, j].reshape((-1,) + (1,) * (data.ndim - 1))
        out += wj * (data[taps[:, j]] - ref)
    return np.moveaxis(out, 0, axis)


class LanczosUpscaler(Upscaler):
    """Separable Lanczos-3 resampling, clamped to [0, 1]."""

    name = "lanczos3"

    def __init__(self, factor: int = 2, lobes: int = LANCZOS_LOBES):
        super().__init__(factor)
        self.lobes = lobes

    def __call__(self, data):
        if self.factor == 1:
            return data.copy()
        out = _resample_axis(data, self.factor, 0, self.lobes)
        out = _resample_axis(out, self.factor, 1, self.lobes)
        return np.clip(out, 0.0, 1.0)


class ExternalUpscaler(Upscaler):
    """Slots in an image super-resolved elsewhere (for example by a diffusion model)."""

    name = "external"

    def __init__(self, path, factor: int = 2):
        super().__init__(factor)
        self.path = Path(path)

    def __call__(self, data):
        img = load_rgb(self.path)
        expected = (data.shape[0] * self.factor, data.shape[1] * self.factor)
        if img.shape[:2] != expected:
            raise UpscalerMismatch(f"{self.path} is {img.shape[:2]}, expected {expected}")
        return img


def upscale(texture: UvTexture, upscaler: Upscaler | None = None,
            target_resolution: int | tuple[int, int] | None = None) -> UvTexture:
    """Resample colours with ``upscaler`` (default Lanczos-3 x2); masks follow by nearest neighbour."""
    upscaler = LanczosUpscaler() if upscaler is None else upscaler
    f = upscaler.factor
    if target_resolution is not None:
        tw, th = (target_resolution, target_resolution) if np.isscalar(target_resolution) else target_resolution
        if (texture.width * f, texture.height * f) != (tw, th):
            raise UpscalerMismatch(f"{texture.resolution} x {f} does not reach {(tw, th)}")
    data = np.clip(upscaler(texture.data), 0.0, 1.0)
    if data.shape[:2] != (texture.height * f, texture.width * f):
        raise UpscalerMismatch(f"upscaler {upscaler.name} returned {data.shape[:2]}")
    valid = np.repeat(np.repeat(texture.valid_mask, f, axis=0), f, axis=1)
    return UvTexture(data, valid, valid.copy())
