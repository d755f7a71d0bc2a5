"""Procedural test meshes with hand-built UV atlases."""
from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh, make_mesh


def _grid_cell(index: int, cols: int, rows: int, margin: float = 0.02) -> tuple[float, float, float, float]:
    """UV rectangle (u0, v0, u1, v1) of cell ``index`` in a cols x rows packing."""
    cu, cv = index % cols, index // cols
    du, dv = 1.0 / cols, 1.0 / rows
    return (cu * du + margin, 1 - (cv + 1) * dv + margin, (cu + 1) * du - margin, 1 - cv * dv - margin)


def uv_sphere(n_lat: int = 16, n_lon: int = 32, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Latitude/longitude sphere with the classic equirectangular atlas (one chart)."""
    center = np.asarray(center, dtype=np.float64)
    verts = [center + (0.0, radius, 0.0)]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append(center + radius * np.array([np.sin(theta) * np.sin(phi), np.cos(theta), np.sin(theta) * np.cos(phi)]))
    verts.append(center + (0.0, -radius, 0.0))
    south = len(verts) - 1

    def vid(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    faces, uvs = [], []
    for j in range(n_lon):
        u0, u1 = j / n_lon, (j + 1) / n_lon
        um = (j + 0.5) / n_lon
        v1 = 1 - 1 / n_lat
        faces.append([0, vid(1, j), vid(1, j + 1)])
        uvs.append([[um, 1.0], [u0, v1], [u1, v1]])
        for i in range(1, n_lat - 1):
            va, vb = 1 - i / n_lat, 1 - (i + 1) / n_lat
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces += [[a, b, c], [a, c, d]]
            uvs += [[[u0, va], [u0, vb], [u1, vb]], [[u0, va], [u1, vb], [u1, va]]]
        vl = 1 / n_lat
        faces.append([vid(n_lat - 1, j), south, vid(n_lat - 1, j + 1)])
        uvs.append([[u0, vl], [um, 0.0], [u1, vl]])
    normals = (np.asarray(verts) - center) / radius
    return make_mesh(verts, faces, uvs, normals, recompute_normals=False)


def cube(size: float = 1.0, margin: float = 0.04) -> TriangleMesh:
    """Axis-aligned cube, 8 shared corners, one UV island per side (3 x 2 packing).

    Every side is split along the diagonal joining its two even-parity
    corners, so each corner sees its three sides with equal area weight.
    """
    h = size / 2
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    idx = {tuple(np.sign(c).astype(int)): i for i, c in enumerate(corners)}
    # each side: outward axis, and its four corners counter-clockwise seen from outside
    sides = []
    for axis in range(3):
        for s in (1, -1):
            u_ax, v_ax = [a for a in range(3) if a != axis]
            quad = []
            for du, dv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
                key = [0, 0, 0]
                key[axis], key[u_ax], key[v_ax] = s, du, dv
                quad.append(key)
            n = np.zeros(3)
            n[axis] = s
            a, b = np.array(quad[1]) - quad[0], np.array(quad[2]) - quad[0]
            if np.cross(a, b) @ n < 0:
                quad = quad[::-1]
            sides.append(quad)
    faces, uvs = [], []
    for k, quad in enumerate(sides):
        u0, v0, u1, v1 = _grid_cell(k, 3, 2, margin)
        quv = [[u0, v0], [u1, v0], [u1, v1], [u0, v1]]
        start = next(i for i, c in enumerate(quad) if np.prod(c) > 0)
        order = [(start + i) % 4 for i in range(4)]
        for t in ((0, 1, 2), (0, 2, 3)):
            faces.append([idx[tuple(quad[order[i]])] for i in t])
            uvs.append([quv[order[i]] for i in t])
    return make_mesh(corners, faces, uvs)


def octahedron(radius: float = 1.0) -> TriangleMesh:
    """Regular octahedron, one UV island per face (4 x 2 packing)."""
    v = radius * np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)
    faces = []
    for x in (0, 1):
        for y in (2, 3):
            for z in (4, 5):
                tri = [x, y, z]
                n = np.cross(v[y] - v[x], v[z] - v[x])
                if n @ (v[x] + v[y] + v[z]) < 0:
                    tri = [x, z, y]
                faces.append(tri)
    uvs = []
    for k in range(8):
        u0, v0, u1, v1 = _grid_cell(k, 4, 2)
        uvs.append([[u0, v0], [u1, v0], [u0, v1]])
    return make_mesh(v, faces, uvs)


def quad_grid(origin, axis_u, axis_v, n: int, uv_rect) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertices, faces, UV corners of a planar n x n grid patch."""
    origin, axis_u, axis_v = (np.asarray(a, dtype=np.float64) for a in (origin, axis_u, axis_v))
    u0, v0, u1, v1 = uv_rect
    s = np.linspace(0.0, 1.0, n + 1)
    verts = origin + s[:, None, None] * axis_u + s[None, :, None] * axis_v
    verts = verts.reshape(-1, 3)
    faces, uvs = [], []

    def vid(i, j):
        return i * (n + 1) + j

    def uv(i, j):
        return [u0 + (u1 - u0) * s[i], v0 + (v1 - v0) * s[j]]

    for i in range(n):
        for j in range(n):
            a, b, c, d = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
            for tri in ((a, b, c), (a, c, d)):
                faces.append([vid(*p) for p in tri])
                uvs.append([uv(*p) for p in tri])
    return verts, np.asarray(faces), np.asarray(uvs)


def combine(parts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    verts, faces, uvs, offset = [], [], [], 0
    for v, f, t in parts:
        verts.append(v)
        faces.append(np.asarray(f) + offset)
        uvs.append(t)
        offset += len(v)
    return np.concatenate(verts), np.concatenate(faces), np.concatenate(uvs)


def stacked_quads(separation: float = 0.6, size: float = 1.0, n: int = 4) -> TriangleMesh:
    """Two parallel square patches facing +z, the front one at z = +separation/2.

    Front patch owns the left half of the atlas, back patch the right half.
    """
    h = size / 2
    front = quad_grid((-h, -h, separation / 2), (size, 0, 0), (0, size, 0), n, (0.02, 0.02, 0.48, 0.98))
    back = quad_grid((-h, -h, -separation / 2), (size, 0, 0), (0, size, 0), n, (0.52, 0.02, 0.98, 0.98))
    return make_mesh(*combine([front, back]))


def split_plane(n: int = 8, size: float = 1.0) -> TriangleMesh:
    """Flat square in z = 0 whose halves x < 0 and x > 0 live in separate UV charts.

    The middle column of vertices is shared, so the two charts abut in 3D
    along x = 0 while lying apart in UV.
    """
    h = size / 2
    left = quad_grid((-h, -h, 0), (h, 0, 0), (0, size, 0), n, (0.02, 0.02, 0.48, 0.98))
    right = quad_grid((0, -h, 0), (h, 0, 0), (0, size, 0), n, (0.52, 0.02, 0.98, 0.98))
    v, f, t = combine([left, right])
    v, f = _weld(v, f)
    return make_mesh(v, f, t)


def mirrored_split_plane(resolution: int, n: int = 8, size: float = 1.0) -> TriangleMesh:
    """Split square whose two charts are mirror images across the shared edge x = 0.

    Both charts start (in u) at the shared edge and their UV rectangles have
    corners on texel centres of a ``resolution`` atlas, so the first texel
    column of each chart lies on the edge (a thousandth of a texel inside,
    so the fill rule keeps it) and the texel grids of the two halves
    coincide under the mirror.
    """
    h = size / 2
    m = int(0.46 * resolution)
    r0, r1 = int(round(0.02 * resolution)), int(round(0.98 * resolution)) - 1
    v0, v1 = (r0 + 0.5) / resolution, (r1 + 0.5) / resolution
    rects = []
    for c0 in (int(round(0.02 * resolution)), resolution // 2 + int(round(0.02 * resolution))):
        rects.append(((c0 + 0.499) / resolution, v0, (c0 + m + 0.5) / resolution, v1))
    lv, lf, lt = quad_grid((0, -h, 0), (-h, 0, 0), (0, size, 0), n, rects[0])
    left = (lv, lf[:, [0, 2, 1]], lt[:, [0, 2, 1]])  # restore +z facing after the x flip
    right = quad_grid((0, -h, 0), (h, 0, 0), (0, size, 0), n, rects[1])
    v, f, t = combine([left, right])
    v, f = _weld(v, f)
    return make_mesh(v, f, t)


def l_planes(n: int = 8, size: float = 1.0) -> TriangleMesh:
    """Two square patches meeting at a right angle along the x axis.

    Patch A lies in y = 0 (z >= 0) facing +y, patch B in z = 0 (y >= 0)
    facing +z. Vertices on the shared edge are duplicated so each patch keeps
    its flat normal. Each patch is its own UV chart.
    """
    a = quad_grid((-size / 2, 0, size), (size, 0, 0), (0, 0, -size), n, (0.02, 0.02, 0.48, 0.98))
    b = quad_grid((-size / 2, 0, 0), (size, 0, 0), (0, size, 0), n, (0.52, 0.02, 0.98, 0.98))
    return make_mesh(*combine([a, b]))


def _weld(verts: np.ndarray, faces: np.ndarray, decimals: int = 9) -> tuple[np.ndarray, np.ndarray]:
    key = np.round(verts, decimals)
    uniq, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    remap = np.empty(len(uniq), dtype=np.int64)
    remap[order] = np.arange(len(uniq))
    return verts[first[order]], remap[inverse.ravel()][faces]


def cup(n_seg: int = 24, n_h: int = 6, radius: float = 0.35, height: float = 1.6, wall: float = 0.05) -> TriangleMesh:
    """Deep open cylinder cup: outer wall, inner wall, rim, outer and inner bottom.

    Every part is its own UV chart and keeps its own vertices (hard creases).
    """
    parts = []
    r_in = radius - wall
    y0, y1 = -height / 2, height / 2
    cells = [_grid_cell(k, 3, 2) for k in range(5)]

    def wall_part(r, y_top, outward, rect):
        u0, v0, u1, v1 = rect
        verts, faces, uvs = [], [], []
        for i in range(n_h + 1):
            y = y0 + (y_top - y0) * i / n_h if outward else (y0 + wall) + (y_top - y0 - wall) * i / n_h
            for j in range(n_seg + 1):
                phi = 2 * np.pi * j / n_seg
                verts.append([r * np.sin(phi), y, r * np.cos(phi)])
        for i in range(n_h):
            for j in range(n_seg):
                a, b = i * (n_seg + 1) + j, i * (n_seg + 1) + j + 1
                c, d = a + n_seg + 1, b + n_seg + 1
                uva = [u0 + (u1 - u0) * j / n_seg, v0 + (v1 - v0) * i / n_h]
                uvb = [u0 + (u1 - u0) * (j + 1) / n_seg, v0 + (v1 - v0) * i / n_h]
                uvc = [uva[0], v0 + (v1 - v0) * (i + 1) / n_h]
                uvd = [uvb[0], uvc[1]]
                if outward:
                    faces += [[a, b, d], [a, d, c]]
                    uvs += [[uva, uvb, uvd], [uva, uvd, uvc]]
                else:
                    faces += [[a, d, b], [a, c, d]]
                    uvs += [[uva, uvd, uvb], [uva, uvc, uvd]]
        # the seam column j = n_seg duplicates j = 0 in position only
        return np.asarray(verts), np.asarray(faces), np.asarray(uvs)

    def disk(r, y, up, rect):
        u0, v0, u1, v1 = rect
        cu, cv = (u0 + u1) / 2, (v0 + v1) / 2
        ru, rv = (u1 - u0) / 2, (v1 - v0) / 2
        verts = [[0.0, y, 0.0]] + [[r * np.sin(2 * np.pi * j / n_seg), y, r * np.cos(2 * np.pi * j / n_seg)] for j in range(n_seg)]
        uv_ring = [[cu, cv]] + [[cu + ru * np.sin(2 * np.pi * j / n_seg), cv + rv * np.cos(2 * np.pi * j / n_seg)] for j in range(n_seg)]
        faces, uvs = [], []
        for j in range(n_seg):
            a, b = 1 + j, 1 + (j + 1) % n_seg
            tri = [0, a, b] if up else [0, b, a]
            faces.append(tri)
            uvs.append([uv_ring[k] for k in tri])
        return np.asarray(verts), np.asarray(faces), np.asarray(uvs)

    def ring(r0, r1, y, rect):
        u0, v0, u1, v1 = rect
        cu, cv = (u0 + u1) / 2, (v0 + v1) / 2
        ru, rv = (u1 - u0) / 2, (v1 - v0) / 2
        verts, uv_list = [], []
        for r, s in ((r0, r0 / r1), (r1, 1.0)):
            for j in range(n_seg):
                phi = 2 * np.pi * j / n_seg
                verts.append([r * np.sin(phi), y, r * np.cos(phi)])
                uv_list.append([cu + ru * s * np.sin(phi), cv + rv * s * np.cos(phi)])
        faces, uvs = [], []
        for j in range(n_seg):
            a, b = j, (j + 1) % n_seg
            c, d = a + n_seg, b + n_seg
            for tri in ([a, c, d], [a, d, b]):
                faces.append(tri)
                uvs.append([uv_list[k] for k in tri])
        return np.asarray(verts), np.asarray(faces), np.asarray(uvs)

    parts.append(wall_part(radius, y1, True, cells[0]))
    parts.append(wall_part(r_in, y1, False, cells[1]))
    parts.append(ring(r_in, radius, y1, cells[2]))
    parts.append(disk(radius, y0, False, cells[3]))
    parts.append(disk(r_in, y0 + wall, True, cells[4]))
    return make_mesh(*combine(parts))


def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    t = (1 + 5 ** 0.5) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0], [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=np.float64)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11], [1, 5, 9], [5, 11, 4], [11, 10, 2],
                  [10, 7, 6], [7, 1, 8], [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9], [4, 9, 5],
                  [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere_charts(subdivisions: int = 2, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron on a sphere; each of the 20 base faces is one UV chart.

    Positions are welded across charts, so normals are smooth while the atlas
    is fragmented into 20 islands (5 x 4 packing).
    """
    base_v, base_f = _icosahedron()
    m = 2 ** subdivisions
    verts, faces, uvs = [], [], []
    for k, (ia, ib, ic) in enumerate(base_f):
        A, B, C = base_v[ia], base_v[ib], base_v[ic]
        u0, v0, u1, v1 = _grid_cell(k, 5, 4, margin=0.015)
        ua, ub, uc = np.array([u0, v0]), np.array([u1, v0]), np.array([u0, v1])
        local = {}
        for i in range(m + 1):
            for j in range(m + 1 - i):
                a, b = i / m, j / m
                p = A + a * (B - A) + b * (C - A)
                local[(i, j)] = (len(verts), ua + a * (ub - ua) + b * (uc - ua))
                verts.append(radius * p / np.linalg.norm(p))
        for i in range(m):
            for j in range(m - i):
                tris = [((i, j), (i + 1, j), (i, j + 1))]
                if i + j + 1 < m:
                    tris.append(((i + 1, j), (i + 1, j + 1), (i, j + 1)))
                for tri in tris:
                    faces.append([local[p][0] for p in tri])
                    uvs.append([local[p][1] for p in tri])
    v, f = _weld(np.asarray(verts), np.asarray(faces))
    return make_mesh(v, f, np.asarray(uvs), v / radius, recompute_normals=False)


def torus(n_major: int = 32, n_minor: int = 16, major: float = 0.65, minor: float = 0.25) -> TriangleMesh:
    """Torus around the y axis with a single rectangular chart."""
    verts, faces, uvs, normals = [], [], [], []
    for i in range(n_major):
        a = 2 * np.pi * i / n_major
        for j in range(n_minor):
            b = 2 * np.pi * j / n_minor
            n = np.array([np.cos(b) * np.sin(a), np.sin(b), np.cos(b) * np.cos(a)])
            c = np.array([np.sin(a), 0.0, np.cos(a)]) * major
            verts.append(c + minor * n)
            normals.append(n)
    for i in range(n_major):
        for j in range(n_minor):
            ids = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            vid = [(p % n_major) * n_minor + (q % n_minor) for p, q in ids]
            uv = [[0.02 + 0.96 * p / n_major, 0.02 + 0.96 * q / n_minor] for p, q in ids]
            for t in ((0, 1, 2), (0, 2, 3)):
                faces.append([vid[k] for k in t])
                uvs.append([uv[k] for k in t])
    return make_mesh(verts, faces, uvs, normals, recompute_normals=False)
