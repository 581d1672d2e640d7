"""Simplicial meshes: generators, strict readers and topology checks.

Surfaces are triangle meshes in R^3 (cells of 3 vertices); curves are
closed polylines in R^2 (cells of 2 vertices).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from ..errors import GeometryError, InputError, TopologyError

DEGENERATE_RATIO = 1e-12


@dataclass(frozen=True)
class EmbeddedMesh:
    vertices: np.ndarray  # (V, n) float
    cells: np.ndarray  # (C, m + 1) int

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        c = np.ascontiguousarray(self.cells, dtype=np.int64)
        if v.ndim != 2 or c.ndim != 2:
            raise InputError("vertices and cells must be 2-D arrays")
        if c.size and (c.min() < 0 or c.max() >= len(v)):
            raise InputError("cell index out of range")
        v.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "cells", c)

    @property
    def intrinsic_dim(self) -> int:
        return self.cells.shape[1] - 1

    @property
    def ambient_dim(self) -> int:
        return self.vertices.shape[1]

    def cell_measures(self) -> np.ndarray:
        """Edge lengths (m=1) or triangle areas (m=2)."""
        x = self.vertices
        if self.intrinsic_dim == 1:
            return np.linalg.norm(x[self.cells[:, 1]] - x[self.cells[:, 0]], axis=1)
        a, b, c = (x[self.cells[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted (i, j) pairs, i < j, lexicographic."""
        if self.intrinsic_dim == 1:
            e = np.sort(self.cells, axis=1)
        else:
            t = self.cells
            e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def adjacency(self) -> sparse.csr_matrix:
        e = self.edges()
        n = len(self.vertices)
        ones = np.ones(len(e))
        a = sparse.coo_matrix((ones, (e[:, 0], e[:, 1])), shape=(n, n))
        a = (a + a.T).tocsr()
        a.data[:] = 1.0
        return a

    def validate(self) -> None:
        """Raise unless this is a closed, consistently oriented, non-degenerate manifold."""
        m = self.intrinsic_dim
        if m == 1:
            if self.ambient_dim != 2:
                raise InputError("curves must live in R^2")
            deg = np.bincount(self.cells.ravel(), minlength=len(self.vertices))
            if np.any(deg != 2):
                raise TopologyError("polyline is not closed: vertex valence != 2")
            heads = np.bincount(self.cells[:, 1], minlength=len(self.vertices))
            if np.any(heads != 1):
                raise TopologyError("polyline edges are not consistently oriented")
        elif m == 2:
            if self.ambient_dim != 3:
                raise InputError("surfaces must live in R^3")
            t = self.cells
            directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            undirected = np.sort(directed, axis=1)
            _, counts = np.unique(undirected, axis=0, return_counts=True)
            if np.any(counts == 1):
                raise TopologyError("mesh has boundary edges (not closed)")
            if np.any(counts > 2):
                raise TopologyError("mesh is non-manifold (edge shared by >2 faces)")
            _, dcounts = np.unique(directed, axis=0, return_counts=True)
            if np.any(dcounts > 1):
                raise TopologyError("mesh faces are not consistently oriented")
            used = np.zeros(len(self.vertices), dtype=bool)
            used[t.ravel()] = True
            if not used.all():
                raise TopologyError("mesh has isolated vertices")
        else:
            raise InputError(f"unsupported cell size {m + 1}")
        meas = self.cell_measures()
        if np.any(meas <= DEGENERATE_RATIO * meas.mean()):
            raise GeometryError("degenerate element (measure below 1e-12 of mean)")

    def euler_characteristic(self) -> int:
        v = len(self.vertices)
        if self.intrinsic_dim == 1:
            return v - len(self.cells)
        return v - len(self.edges()) + len(self.cells)


def icosphere(level: int = 3, radius: float = 1.0) -> EmbeddedMesh:
    """Subdivided icosahedron with 10 * 4**level + 2 vertices, outward oriented."""
    if level < 0:
        raise InputError("level must be >= 0")
    g = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, g, 0), (1, g, 0), (-1, -g, 0), (1, -g, 0),
        (0, -1, g), (0, 1, g), (0, -1, -g), (0, 1, -g),
        (g, 0, -1), (g, 0, 1), (-g, 0, -1), (-g, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = np.array(verts, dtype=float)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f = np.array(faces, dtype=np.int64)
    for _ in range(level):
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        inv = inv.reshape(3, -1).T + len(v)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        v = np.vstack([v, mid])
        a, b, c = f[:, 0], f[:, 1], f[:, 2]
        ab, bc, ca = inv[:, 0], inv[:, 1], inv[:, 2]
        f = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ])
    return EmbeddedMesh(radius * v, f)


def regular_polygon(n: int, radius: float = 1.0, phase: float = 0.0) -> EmbeddedMesh:
    """Counter-clockwise regular n-gon inscribed in the circle of given radius."""
    if n < 3:
        raise InputError("polygon needs at least 3 vertices")
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    v = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    idx = np.arange(n)
    return EmbeddedMesh(v, np.column_stack([idx, (idx + 1) % n]))


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def read_off(path) -> EmbeddedMesh:
    lines = list(_data_lines(Path(path).read_text()))
    if not lines or not lines[0].startswith("OFF"):
        raise InputError(f"{path}: missing OFF header")
    header = lines[0][3:].split()
    body = lines[1:]
    if not header:
        header, body = body[0].split(), body[1:]
    try:
        nv, nf = int(header[0]), int(header[1])
    except (IndexError, ValueError) as exc:
        raise InputError(f"{path}: bad OFF counts line") from exc
    if len(body) < nv + nf:
        raise InputError(f"{path}: truncated OFF file")
    try:
        verts = np.array([[float(t) for t in body[i].split()[:3]] for i in range(nv)])
    except ValueError as exc:
        raise InputError(f"{path}: bad vertex line") from exc
    faces = []
    for line in body[nv:nv + nf]:
        tok = line.split()
        k = int(tok[0])
        if k != 3:
            raise InputError(f"{path}: non-triangular face with {k} vertices")
        faces.append([int(t) for t in tok[1:4]])
    return EmbeddedMesh(verts.reshape(nv, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


def read_obj(path) -> EmbeddedMesh:
    verts, faces = [], []
    for line in _data_lines(Path(path).read_text()):
        tok = line.split()
        if tok[0] == "v":
            verts.append([float(t) for t in tok[1:4]])
        elif tok[0] == "f":
            if len(tok) != 4:
                raise InputError(f"{path}: non-triangular face with {len(tok) - 1} vertices")
            face = []
            for t in tok[1:]:
                i = int(t.split("/")[0])
                face.append(i - 1 if i > 0 else len(verts) + i)
            faces.append(face)
    return EmbeddedMesh(np.array(verts, dtype=float).reshape(-1, 3),
                        np.array(faces, dtype=np.int64).reshape(-1, 3))


def read_polyline(path) -> EmbeddedMesh:
    """One "x y" pair per line; the last point connects back to the first."""
    pts = []
    for line in _data_lines(Path(path).read_text()):
        tok = line.split()
        if len(tok) != 2:
            raise InputError(f"{path}: expected 'x y', got {line!r}")
        pts.append([float(tok[0]), float(tok[1])])
    if len(pts) < 3:
        raise InputError(f"{path}: polyline needs at least 3 points")
    n = len(pts)
    idx = np.arange(n)
    return EmbeddedMesh(np.array(pts), np.column_stack([idx, (idx + 1) % n]))


def read_mesh(path) -> EmbeddedMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".off":
        return read_off(path)
    if suffix == ".obj":
        return read_obj(path)
    if suffix in (".txt", ".xy", ".poly", ".polyline"):
        return read_polyline(path)
    raise InputError(f"unrecognized mesh format {suffix!r}")


def write_off(path, mesh: EmbeddedMesh) -> None:
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(mesh.vertices)} {len(mesh.cells)} 0\n")
        for x in mesh.vertices:
            fh.write(" ".join(repr(float(c)) for c in x) + "\n")
        for c in mesh.cells:
            fh.write("3 " + " ".join(str(int(i)) for i in c) + "\n")


def mixed_voronoi_areas(mesh: EmbeddedMesh) -> np.ndarray:
    """Per-vertex mixed Voronoi areas of a triangle mesh (sum = total area).

    Circumcentric Voronoi regions for non-obtuse triangles; for an obtuse
    triangle the obtuse corner receives half the area and the others a quarter.
    """
    x, t = mesh.vertices, mesh.cells
    nv = len(x)
    p = [x[t[:, k]] for k in range(3)]
    area = mesh.cell_measures()
    out = np.zeros(nv)
    cots = triangle_cotangents(mesh)
    obtuse = np.zeros(len(t), dtype=bool)
    for k in range(3):
        i, j, l = k, (k + 1) % 3, (k + 2) % 3
        obtuse |= np.einsum("ij,ij->i", p[j] - p[i], p[l] - p[i]) < 0
    for k in range(3):
        i, j, l = k, (k + 1) % 3, (k + 2) % 3
        # Voronoi share of corner i: (|e_ij|^2 cot l + |e_il|^2 cot j) / 8
        eij = np.sum((p[j] - p[i]) ** 2, axis=1)
        eil = np.sum((p[l] - p[i]) ** 2, axis=1)
        vor = (eij * cots[:, l] + eil * cots[:, j]) / 8.0
        corner_obtuse = np.einsum("ij,ij->i", p[j] - p[i], p[l] - p[i]) < 0
        share = np.where(obtuse, np.where(corner_obtuse, area / 2.0, area / 4.0), vor)
        np.add.at(out, t[:, i], share)
    return out


def triangle_cotangents(mesh: EmbeddedMesh) -> np.ndarray:
    """(F, 3) cotangent of the interior angle at each corner."""
    x, t = mesh.vertices, mesh.cells
    p = [x[t[:, k]] for k in range(3)]
    out = np.empty((len(t), 3))
    for k in range(3):
        u = p[(k + 1) % 3] - p[k]
        w = p[(k + 2) % 3] - p[k]
        out[:, k] = np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)
    return out
