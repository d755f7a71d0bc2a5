from collections import deque

import numpy as np
import pytest

from oracles import nearest_hit
from texweave import shapes
from texweave.camera import Camera
from texweave.errors import ResolutionTooSmall
from texweave.mesh import make_mesh, normalize_mesh
from texweave.project import default_delta
from texweave.raster import rasterize_uv, render_view
from texweave.texture import UvTexture


def components_4(mask):
    """Plain BFS component count."""
    seen = np.zeros_like(mask)
    count = 0
    h, w = mask.shape
    for r0, c0 in zip(*np.nonzero(mask)):
        if seen[r0, c0]:
            continue
        count += 1
        seen[r0, c0] = True
        queue = deque([(r0, c0)])
        while queue:
            r, c = queue.popleft()
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and not seen[rr, cc]:
                    seen[rr, cc] = True
                    queue.append((rr, cc))
    return count


def one_triangle(uv):
    return make_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], [uv])


def test_half_square_triangle_coverage():
    buf = rasterize_uv(one_triangle([[0, 0], [1, 0], [0, 1]]), 64)
    assert buf.valid_mask.mean() >= 0.49
    assert buf.overlap_count == 0


def test_quad_split_leaves_no_gap_or_overlap():
    mesh = make_mesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]],
                     [[[0, 0], [1, 0], [1, 1]], [[0, 0], [1, 1], [0, 1]]])
    buf = rasterize_uv(mesh, 37)
    assert buf.valid_mask.all()
    assert buf.overlap_count == 0


def test_overlapping_faces_last_writer_wins():
    uv = [[0.1, 0.1], [0.9, 0.1], [0.1, 0.9]]
    mesh = make_mesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], [[0, 1, 2], [0, 1, 3]], [uv, uv])
    buf = rasterize_uv(mesh, 32)
    assert buf.overlap_count == int(buf.valid_mask.sum())
    assert set(np.unique(buf.face_id_map[buf.valid_mask])) == {1}


def test_positions_interpolate_the_surface():
    mesh = normalize_mesh(shapes.uv_sphere(24, 48))
    buf = rasterize_uv(mesh, 128)
    r = np.linalg.norm(buf.position_map[buf.valid_mask], axis=1)
    assert r.max() <= 0.9 + 1e-9
    assert r.min() > 0.88
    n = buf.normal_map[buf.valid_mask]
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)
    assert np.all(np.abs(buf.position_map[~buf.valid_mask]) == 0)


def test_cube_six_components():
    buf = rasterize_uv(shapes.cube(), 96)
    assert components_4(buf.valid_mask) == 6


def test_too_small():
    with pytest.raises(ResolutionTooSmall):
        rasterize_uv(shapes.cube(), 8)


def test_rasterize_deterministic():
    mesh = shapes.cup()
    a, b = rasterize_uv(mesh, 96), rasterize_uv(mesh, 96)
    assert np.array_equal(a.position_map, b.position_map)
    assert np.array_equal(a.normal_map, b.normal_map)
    assert np.array_equal(a.face_id_map, b.face_id_map)


def test_empty_render_when_mesh_is_behind_camera():
    mesh = make_mesh([[0, 0, 5], [1, 0, 5], [0, 1, 5]], [[0, 1, 2]], [[[0, 0], [1, 0], [0, 1]]])
    r = render_view(mesh, Camera(0, 0, width=32, height=32))
    assert not r.hit_mask.any()
    assert np.all(np.isinf(r.depth_map))


def test_sphere_centre_depth():
    mesh = normalize_mesh(shapes.uv_sphere(32, 64))
    cam = Camera(0, 0, 2.2, 45, 64, 64)
    r = render_view(mesh, cam)
    texel = 2 * 1.3 * np.tan(np.radians(22.5)) / 64
    centre = r.depth_map[31:33, 31:33]
    assert np.all(np.abs(centre - 1.3) <= 2 * texel)


def test_constant_texture_renders_constant():
    mesh = normalize_mesh(shapes.cube())
    valid = np.ones((32, 32), bool)
    red = np.zeros((32, 32, 3))
    red[..., 0] = 1.0
    r = render_view(mesh, Camera(30, 20, width=48, height=48), texture=UvTexture(red, valid, valid))
    assert r.hit_mask.any()
    assert np.array_equal(r.color_mask, r.hit_mask)
    assert np.all(r.color_map[r.hit_mask] == [1.0, 0.0, 0.0])


def test_render_resolution_override():
    r = render_view(shapes.cube(), Camera(0, 0), resolution=(40, 30))
    assert r.depth_map.shape == (30, 40)


@pytest.mark.parametrize("name, build, cam", [
    ("icosphere", lambda: shapes.icosphere_charts(1), Camera(20, 25, 2.2, 45, 40, 40)),
    ("torus", lambda: shapes.torus(12, 6), Camera(-35, 50, 2.2, 45, 40, 40)),
    ("stack", shapes.stacked_quads, Camera(15, 10, 2.2, 45, 40, 40)),
    ("cup", lambda: shapes.cup(n_seg=8, n_h=2), Camera(60, 35, 2.2, 45, 40, 40)),
])
def test_depth_matches_brute_force_ray_cast(name, build, cam):
    mesh = normalize_mesh(build())
    assert mesh.face_count <= 200
    r = render_view(mesh, cam)
    tris = [tuple(tuple(map(float, p)) for p in tri) for tri in mesh.corners()]
    origin = tuple(map(float, cam.position))
    rays = cam.pixel_rays()
    oracle = np.array([[nearest_hit(tris, origin, tuple(map(float, rays[i, j]))) for j in range(cam.width)]
                       for i in range(cam.height)])
    hit_oracle = np.isfinite(oracle)
    # pixels on a silhouette (hit status differs from a 4-neighbour) are excluded
    pad = np.pad(hit_oracle, 1, mode="edge")
    edge = ((pad[1:-1, 1:-1] != pad[:-2, 1:-1]) | (pad[1:-1, 1:-1] != pad[2:, 1:-1])
            | (pad[1:-1, 1:-1] != pad[1:-1, :-2]) | (pad[1:-1, 1:-1] != pad[1:-1, 2:]))
    inner = ~edge
    assert (r.hit_mask[inner] == hit_oracle[inner]).mean() >= 0.99
    both = r.hit_mask & hit_oracle
    close = np.abs(r.depth_map[both] - oracle[both]) <= 1e-4
    assert close.mean() >= 0.99
    # z-buffer never reports a surface farther than the nearest one
    assert np.all(r.depth_map[both] <= oracle[both] + 1e-4)


def test_visible_texels_land_on_their_own_depth():
    mesh = normalize_mesh(shapes.uv_sphere())
    buf = rasterize_uv(mesh, 64)
    cam = Camera(40, 20, 2.2, 60, 128, 128)
    r = render_view(mesh, cam)
    p = buf.position_map[buf.valid_mask]
    n = buf.normal_map[buf.valid_mask]
    to_cam = cam.position - p
    dist = np.linalg.norm(to_cam, axis=1)
    facing = np.einsum("nk,nk->n", to_cam / dist[:, None], n) > 0.5  # convex: facing means unoccluded; steep slopes excluded
    col, row, _ = cam.project(p[facing])
    ci = np.rint(col).astype(int)
    ri = np.rint(row).astype(int)
    assert np.all(np.abs(r.depth_map[ri, ci] - dist[facing]) <= default_delta(cam))
