"""UV textures, bilinear sampling and PNG input/output."""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image


@dataclass(frozen=True, eq=False)
class UvTexture:
    """H x W x C image over the UV square plus coverage masks.

    ``valid_mask`` marks texels covered by a chart, ``painted_mask`` the ones
    that carry real colour. ``weight_sum`` keeps the raw fusion weight per
    texel when the texture came out of multi-view fusion.
    """

    data: np.ndarray
    valid_mask: np.ndarray
    painted_mask: np.ndarray
    dilated_mask: np.ndarray | None = None
    weight_sum: np.ndarray | None = None

    def __post_init__(self):
        h, w = self.data.shape[:2]
        if self.data.ndim != 3:
            raise ValueError("texture data must be H x W x C")
        for m in (self.valid_mask, self.painted_mask):
            if m.shape != (h, w):
                raise ValueError(f"mask shape {m.shape} does not match texture {(h, w)}")
        if np.any(self.painted_mask & ~self.valid_mask):
            raise ValueError("painted texels must be valid")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def with_masks(self, valid_mask=None, painted_mask=None) -> "UvTexture":
        return replace(
            self,
            valid_mask=self.valid_mask if valid_mask is None else valid_mask,
            painted_mask=self.painted_mask if painted_mask is None else painted_mask,
        )

    @classmethod
    def blank(cls, valid_mask: np.ndarray, channels: int = 3) -> "UvTexture":
        h, w = valid_mask.shape
        return cls(np.zeros((h, w, channels)), valid_mask.copy(), np.zeros((h, w), bool))


def uv_to_pixel(uv: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """UV in [0,1]^2 (v up) -> continuous texel coordinates (col, row), centres at integers."""
    uv = np.asarray(uv)
    return uv[..., 0] * width - 0.5, (1.0 - uv[..., 1]) * height - 0.5


def sample_bilinear(image: np.ndarray, col: np.ndarray, row: np.ndarray,
                    mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear lookup with edge clamping.

    With ``mask`` (a boolean image, or a callable ``(rows, cols) -> bool``
    judging each tap per query), rejected taps are dropped and the remaining
    weights renormalized. Returns (values, ok) where ok is False where no
    usable tap existed (or the coordinate was NaN).
    """
    h, w = image.shape[:2]
    col = np.asarray(col, dtype=np.float64)
    row = np.asarray(row, dtype=np.float64)
    finite = np.isfinite(col) & np.isfinite(row)
    c = np.clip(np.where(finite, col, 0.0), 0, w - 1)
    r = np.clip(np.where(finite, row, 0.0), 0, h - 1)
    c0 = np.minimum(np.floor(c).astype(np.int64), w - 1)
    r0 = np.minimum(np.floor(r).astype(np.int64), h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    r1 = np.minimum(r0 + 1, h - 1)
    fc = c - c0
    fr = r - r0
    taps = ((r0, c0, (1 - fr) * (1 - fc)), (r0, c1, (1 - fr) * fc),
            (r1, c0, fr * (1 - fc)), (r1, c1, fr * fc))
    extra = image.shape[2:]
    out = np.zeros(col.shape + extra)
    total = np.zeros(col.shape)
    for rr, cc, wt in taps:
        if callable(mask):
            wt = wt * mask(rr, cc)
        elif mask is not None:
            wt = wt * mask[rr, cc]
        total += wt
        out += wt.reshape(wt.shape + (1,) * len(extra)) * image[rr, cc]
    ok = finite & (total > 1e-12)
    safe = np.where(ok, total, 1.0)
    out /= safe.reshape(safe.shape + (1,) * len(extra))
    return out, ok


def to_uint8(data: np.ndarray) -> np.ndarray:
    return np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_rgb(path, data: np.ndarray) -> None:
    Image.fromarray(to_uint8(data[..., :3]), "RGB").save(Path(path))


def load_rgb(path) -> np.ndarray:
    with Image.open(Path(path)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0


def save_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), "L").save(Path(path))


def load_mask(path) -> np.ndarray:
    with Image.open(Path(path)) as img:
        return np.asarray(img.convert("L")) >= 128


def save_depth16(path, depth: np.ndarray, depth_max: float | None = None) -> float:
    """Linear [0, depth_max] -> [0, 65535]; misses are written as 0. Returns depth_max."""
    finite = np.isfinite(depth)
    if depth_max is None:
        depth_max = float(depth[finite].max()) if finite.any() else 1.0
    q = np.where(finite, np.clip(depth / depth_max, 0, 1) * 65535.0, 0.0)
    Image.fromarray(np.round(q).astype(np.uint16)).save(Path(path))
    return depth_max


def save_normal8(path, normals: np.ndarray, mask: np.ndarray | None = None) -> None:
    enc = normals * 0.5 + 0.5
    if mask is not None:
        enc = np.where(mask[..., None], enc, 0.0)
    save_rgb(path, enc)


def save_texture(directory, texture: UvTexture, stem: str = "texture") -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_rgb(directory / f"{stem}.png", texture.data)
    save_mask(directory / f"{stem}_valid.png", texture.valid_mask)
    save_mask(directory / f"{stem}_painted.png", texture.painted_mask)


def load_texture(path, valid_mask: np.ndarray | None = None, painted_mask: np.ndarray | None = None) -> UvTexture:
    """Load an 8-bit RGB texture; masks default to all-valid / painted == valid."""
    data = load_rgb(path)
    h, w = data.shape[:2]
    valid = np.ones((h, w), bool) if valid_mask is None else valid_mask
    painted = valid.copy() if painted_mask is None else painted_mask & valid
    return UvTexture(data, valid, painted)
