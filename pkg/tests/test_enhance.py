import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from texweave.enhance import ExternalUpscaler, IdentityUpscaler, LanczosUpscaler, dilate, upscale
from texweave.errors import UpscalerMismatch
from texweave.texture import UvTexture, save_rgb


def tex_from_mask(mask, data=None):
    if data is None:
        data = np.where(mask[..., None], [0.25, 0.5, 0.75], 0.0)
    return UvTexture(np.asarray(data, float), mask, mask.copy())


def test_dilate_radius_zero_is_identity():
    mask = np.zeros((8, 8), bool)
    mask[3, 3] = True
    out = dilate(tex_from_mask(mask), 0)
    assert np.array_equal(out.data, tex_from_mask(mask).data)
    assert not out.dilated_mask.any()


def test_single_texel_fills_its_ring():
    mask = np.zeros((9, 9), bool)
    mask[4, 4] = True
    out = dilate(tex_from_mask(mask), 1)
    assert out.dilated_mask.sum() == 8
    assert np.all(out.data[3:6, 3:6] == [0.25, 0.5, 0.75])


def test_square_grows_by_radius():
    mask = np.zeros((32, 32), bool)
    mask[10:20, 10:20] = True
    assert dilate(tex_from_mask(mask), 2).dilated_mask.sum() == 14 * 14 - 100


def test_nearest_source_wins():
    mask = np.zeros((1, 7), bool)
    mask[0, 0] = mask[0, 6] = True
    data = np.zeros((1, 7, 3))
    data[0, 0], data[0, 6] = 1.0, 0.5
    out = dilate(tex_from_mask(mask, data), 3)
    assert out.data[0, 1:3, 0].tolist() == [1.0, 1.0]
    assert out.data[0, 4:6, 0].tolist() == [0.5, 0.5]
    # equidistant: the source earlier in scan order
    assert out.data[0, 3, 0] == 1.0


def test_negative_radius():
    with pytest.raises(ValueError):
        dilate(tex_from_mask(np.ones((4, 4), bool)), -1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_dilation_never_touches_valid_texels(seed, radius):
    rng = np.random.default_rng(seed)
    mask = rng.random((16, 16)) < 0.2
    tex = tex_from_mask(mask, rng.random((16, 16, 3)))
    out = dilate(tex, radius)
    assert np.array_equal(out.data[mask], tex.data[mask])
    assert not np.any(out.dilated_mask & mask)


def test_lanczos_constant_is_exact():
    data = np.full((16, 12, 3), 0.3)
    for f in (2, 3, 4):
        out = LanczosUpscaler(f)(data)
        assert out.shape == (16 * f, 12 * f, 3)
        assert np.all(out == 0.3)


def test_factor_one_and_identity():
    data = np.random.default_rng(0).random((8, 8, 3))
    assert np.array_equal(LanczosUpscaler(1)(data), data)
    assert np.array_equal(IdentityUpscaler()(data), data)


def test_bad_factor():
    with pytest.raises(ValueError):
        LanczosUpscaler(0)
    with pytest.raises(ValueError):
        LanczosUpscaler(1.5)


@pytest.mark.parametrize("factor", [2, 3, 4])
def test_translation_equivariance(factor):
    rng = np.random.default_rng(factor)
    data = rng.random((40, 40, 3)) * 0.5 + 0.25
    up = LanczosUpscaler(factor)
    a = up(data)
    b = up(np.roll(data, (3, 5), axis=(0, 1)))
    pad = 8 * factor  # stay clear of the clamped border
    shifted = np.roll(a, (3 * factor, 5 * factor), axis=(0, 1))
    np.testing.assert_array_equal(b[pad:-pad, pad:-pad], shifted[pad:-pad, pad:-pad])


def test_mean_drift():
    data = np.random.default_rng(1).random((64, 64, 3))
    assert abs(LanczosUpscaler(2)(data).mean() - data.mean()) <= 0.005


def test_upscale_texture_masks():
    mask = np.zeros((32, 32), bool)
    mask[4:20, 8:30] = True
    out = upscale(tex_from_mask(mask), LanczosUpscaler(2), target_resolution=64)
    assert out.resolution == (64, 64)
    assert np.array_equal(out.valid_mask, np.repeat(np.repeat(mask, 2, 0), 2, 1))
    assert out.data.min() >= 0 and out.data.max() <= 1


def test_target_resolution_mismatch():
    with pytest.raises(UpscalerMismatch):
        upscale(tex_from_mask(np.ones((32, 32), bool)), LanczosUpscaler(2), target_resolution=96)


def test_external_upscaler(tmp_path):
    img = np.random.default_rng(2).random((64, 64, 3))
    save_rgb(tmp_path / "up.png", img)
    tex = tex_from_mask(np.ones((32, 32), bool))
    out = upscale(tex, ExternalUpscaler(tmp_path / "up.png", 2))
    np.testing.assert_allclose(out.data, np.round(img * 255) / 255, atol=1e-12)
    with pytest.raises(UpscalerMismatch):
        upscale(tex, ExternalUpscaler(tmp_path / "up.png", 4))


@pytest.mark.slow
def test_full_resolution_path():
    mask = np.zeros((1024, 1024), bool)
    mask[16:1000, 16:1000] = True
    out = upscale(dilate(tex_from_mask(mask), 3), target_resolution=2048)
    assert out.resolution == (2048, 2048)
