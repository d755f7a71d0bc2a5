"""Triangle meshes with corner-attributed UVs: loading, validation, normalization."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EmptyMesh, MissingUv, ParseError

log = logging.getLogger(__name__)

TARGET_RADIUS = 0.9
DEGENERATE_AREA = 1e-12
UV_SLACK = 1e-4


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray  # (F, 3) int64
    uv_corners: np.ndarray  # (F, 3, 2) float64, v=0 at the bottom of the image
    vertex_normals: np.ndarray  # (V, 3) float64, unit

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def corners(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def face_normals(self) -> np.ndarray:
        c = self.corners()
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        length = np.linalg.norm(n, axis=1, keepdims=True)
        return n / np.where(length > 0, length, 1.0)

    def face_areas(self) -> np.ndarray:
        c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)


@dataclass(frozen=True)
class MeshStats:
    face_count: int
    vertex_count: int
    chart_count: int
    bounding_sphere: tuple[tuple[float, float, float], float]


def bounding_sphere(vertices: np.ndarray) -> tuple[np.ndarray, float]:
    """Sphere centred on the bounding-box centre, enclosing every vertex.

    Not the minimal enclosing sphere, but cheap, deterministic and stable
    under repeated normalization.
    """
    if len(vertices) == 0:
        raise EmptyMesh("mesh has no vertices")
    center = 0.5 * (vertices.min(axis=0) + vertices.max(axis=0))
    radius = float(np.linalg.norm(vertices - center, axis=1).max())
    return center, radius


def make_mesh(vertices, faces, uv_corners, vertex_normals=None, *, recompute_normals=True) -> TriangleMesh:
    """Validate raw arrays and build a mesh.

    Degenerate faces (area below 1e-12 once scaled to the normalized frame)
    are dropped with a warning. Normals are recomputed unless
    ``recompute_normals`` is False and usable normals were supplied.
    """
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    uv = np.asarray(uv_corners, dtype=np.float64).reshape(-1, 3, 2)
    if len(faces) == 0 or len(vertices) == 0:
        raise EmptyMesh("mesh has no faces")
    if len(uv) != len(faces):
        raise MissingUv(f"{len(faces)} faces but {len(uv)} UV triplets")
    if faces.min() < 0 or faces.max() >= len(vertices):
        raise ParseError("face references a vertex index outside the vertex table")
    if not np.all(np.isfinite(vertices)) or not np.all(np.isfinite(uv)):
        raise ParseError("non-finite coordinate")
    if uv.min() < -UV_SLACK or uv.max() > 1 + UV_SLACK:
        raise ParseError("UV coordinates outside [0, 1]; tiled or multi-atlas UVs are not supported")
    uv = np.clip(uv, 0.0, 1.0)

    _, radius = bounding_sphere(vertices)
    scale = TARGET_RADIUS / radius if radius > 0 else 1.0
    c = vertices[faces]
    areas = 0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1) * scale**2
    keep = areas >= DEGENERATE_AREA
    if not keep.all():
        log.warning("dropping %d degenerate faces", int((~keep).sum()))
        faces, uv = faces[keep], uv[keep]
    if len(faces) == 0:
        raise EmptyMesh("every face is degenerate")

    mesh = TriangleMesh(vertices, faces, uv, np.zeros_like(vertices))
    if vertex_normals is not None and not recompute_normals:
        n = np.asarray(vertex_normals, dtype=np.float64).reshape(-1, 3)
        length = np.linalg.norm(n, axis=1)
        if len(n) == len(vertices) and np.all(length > 1e-12):
            return replace(mesh, vertex_normals=n / length[:, None])
        log.warning("supplied normals unusable, recomputing")
    return compute_vertex_normals(mesh)


def compute_vertex_normals(mesh: TriangleMesh) -> TriangleMesh:
    """Area-weighted vertex normals; vertices without faces, or whose face normals cancel, get +z."""
    c = mesh.corners()
    fn = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])  # length = 2 * area
    acc = np.zeros_like(mesh.vertices)
    area = np.zeros(len(mesh.vertices))
    fn_len = np.linalg.norm(fn, axis=1)
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], fn)
        np.add.at(area, mesh.faces[:, k], fn_len)
    length = np.linalg.norm(acc, axis=1)
    # a sum that cancels to rounding noise has no meaningful direction
    isolated = (length <= 1e-300) | (length <= 1e-9 * area)
    if isolated.any():
        log.warning("%d vertices have no net incident area; defaulting their normal to +z", int(isolated.sum()))
    acc[isolated] = (0.0, 0.0, 1.0)
    length[isolated] = 1.0
    return replace(mesh, vertex_normals=acc / length[:, None])


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Translate the bounding sphere to the origin and scale it to radius 0.9."""
    center, radius = bounding_sphere(mesh.vertices)
    if radius == 0:
        raise EmptyMesh("mesh collapses to a point")
    return replace(mesh, vertices=(mesh.vertices - center) * (TARGET_RADIUS / radius))


def chart_labels(mesh: TriangleMesh) -> tuple[int, np.ndarray]:
    """Connected components of faces linked by identical UV edges."""
    n = mesh.face_count
    # quantize so that bit-identical exporter UVs compare equal as integers
    q = np.round(mesh.uv_corners * 2**24).astype(np.int64)
    edges = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        pa, pb = q[:, a], q[:, b]
        swap = (pa[:, 0] > pb[:, 0]) | ((pa[:, 0] == pb[:, 0]) & (pa[:, 1] > pb[:, 1]))
        lo = np.where(swap[:, None], pb, pa)
        hi = np.where(swap[:, None], pa, pb)
        edges.append(np.concatenate([lo, hi], axis=1))
    keys = np.concatenate(edges)  # (3F, 4)
    owner = np.tile(np.arange(n), 3)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    inv_sorted = inverse[order]
    same = inv_sorted[1:] == inv_sorted[:-1]
    a = owner[order][:-1][same]
    b = owner[order][1:][same]
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    return int(count), labels


def mesh_stats(mesh: TriangleMesh) -> MeshStats:
    center, radius = bounding_sphere(mesh.vertices)
    charts, _ = chart_labels(mesh)
    return MeshStats(
        face_count=mesh.face_count,
        vertex_count=mesh.vertex_count,
        chart_count=charts,
        bounding_sphere=(tuple(float(x) for x in center), radius),
    )


def _parse_index(token: str, size: int, lineno: int) -> int:
    i = int(token)
    if i < 0:
        i += size
    else:
        i -= 1
    if not 0 <= i < size:
        raise ParseError(f"line {lineno}: index {token} outside table of size {size}")
    return i


def load_mesh(path, *, recompute_normals: bool = True) -> TriangleMesh:
    """Read a Wavefront-style OBJ with positions, UVs and (optionally) normals.

    Quads are fan-triangulated at corner 0; larger polygons are rejected.
    """
    path = Path(path)
    positions, texcoords, normals = [], [], []
    faces, uvs, face_normals = [], [], []
    ignored: set[str] = set()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        try:
            if tag == "v":
                positions.append([float(x) for x in rest[:3]])
                if len(positions[-1]) != 3:
                    raise ValueError("vertex needs three coordinates")
            elif tag == "vt":
                texcoords.append([float(x) for x in rest[:2]])
                if len(texcoords[-1]) != 2:
                    raise ValueError("texcoord needs two coordinates")
            elif tag == "vn":
                normals.append([float(x) for x in rest[:3]])
                if len(normals[-1]) != 3:
                    raise ValueError("normal needs three coordinates")
            elif tag == "f":
                if len(rest) not in (3, 4):
                    raise ParseError(f"line {lineno}: {len(rest)}-gon faces are not supported")
                corners = []
                for tok in rest:
                    parts = tok.split("/")
                    vi = _parse_index(parts[0], len(positions), lineno)
                    if len(parts) < 2 or not parts[1]:
                        raise MissingUv(f"line {lineno}: face corner without a UV index")
                    ti = _parse_index(parts[1], len(texcoords), lineno)
                    ni = _parse_index(parts[2], len(normals), lineno) if len(parts) > 2 and parts[2] else -1
                    corners.append((vi, ti, ni))
                for a, b, c in [(0, 1, 2)] + ([(0, 2, 3)] if len(corners) == 4 else []):
                    tri = (corners[a], corners[b], corners[c])
                    faces.append([t[0] for t in tri])
                    uvs.append([texcoords[t[1]] for t in tri])
                    face_normals.append([t[2] for t in tri])
            else:
                ignored.add(tag)
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    for tag in sorted(ignored):
        log.warning("ignoring unsupported directive %r", tag)
    if not faces:
        raise EmptyMesh(f"{path} contains no faces")

    vertex_normals = None
    if normals and not recompute_normals:
        fidx = np.asarray(faces)
        nidx = np.asarray(face_normals)
        ok = nidx >= 0
        acc = np.zeros((len(positions), 3))
        np.add.at(acc, fidx[ok], np.asarray(normals)[nidx[ok]])
        vertex_normals = acc
    return make_mesh(positions, faces, uvs, vertex_normals, recompute_normals=recompute_normals)


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write the mesh as OBJ with one ``vt`` per face corner."""
    lines = ["# texweave mesh"]
    lines += [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines += [f"vt {u:.17g} {v:.17g}" for u, v in mesh.uv_corners.reshape(-1, 2)]
    lines += [f"vn {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertex_normals]
    for i, (a, b, c) in enumerate(mesh.faces + 1):
        t = 3 * i + 1
        lines.append(f"f {a}/{t}/{a} {b}/{t + 1}/{b} {c}/{t + 2}/{c}")
    Path(path).write_text("\n".join(lines) + "\n")
