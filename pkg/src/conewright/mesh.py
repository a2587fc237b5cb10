"""Closed triangle meshes with intrinsic edge lengths and their curvature.

A surface is stored combinatorially: faces as vertex triples and one
positive length per undirected edge.  Nothing here assumes an embedding;
angles come from the law of cosines and curvature is the angle defect
2*pi - (angle sum) concentrated at vertices.  Meshes may be unorientable;
only the developing machinery insists on an orientation.
"""

from __future__ import annotations

import json
import math
import re

import numpy as np

from .errors import DomainError, GeometryError, MeshStructureError

__all__ = [
    "TriangleMesh",
    "CurvatureField",
    "euler_characteristic",
    "angle_defects",
    "check_gauss_bonnet",
    "load_mesh",
    "load_mesh_json",
    "load_mesh_obj",
    "mesh_to_json_obj",
]


class TriangleMesh:
    """Closed triangulated surface with intrinsic edge lengths.

    ``faces``: sequence of vertex index triples covering vertices 0..V-1.
    ``edge_lengths``: mapping from unordered vertex pairs (either tuple
    order, or "i-j" strings) to positive lengths, or an array aligned with
    the canonical ``edges`` order.  ``marked``: vertices designated to carry
    cone singularities.

    Construction validates the surface axioms: every edge lies in exactly
    two faces, every face satisfies the strict triangle inequality, and
    every vertex link is a single cycle.
    """

    def __init__(self, faces, edge_lengths, marked=(), _fast_from=None):
        if _fast_from is not None:
            src = _fast_from
            self.faces = src.faces
            self.edges = src.edges
            self.num_vertices = src.num_vertices
            self._edge_index = src._edge_index
            self._face_edges = src._face_edges
            self._vertex_faces = src._vertex_faces
            self.marked = frozenset(marked)
            self.lengths = np.asarray(edge_lengths, dtype=float).copy()
            self._check_lengths()
            return

        faces = np.asarray(faces, dtype=np.int64)
        if faces.size == 0:
            raise MeshStructureError("mesh has no faces")
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshStructureError("faces must be triples of vertex indices")
        self.faces = faces
        for f, (i, j, k) in enumerate(faces):
            if i == j or j == k or i == k:
                raise MeshStructureError(f"face {f} repeats a vertex: {(i, j, k)}")
        verts = np.unique(faces)
        if verts[0] < 0:
            raise MeshStructureError("negative vertex index")
        self.num_vertices = int(verts[-1]) + 1
        if len(verts) != self.num_vertices:
            missing = sorted(set(range(self.num_vertices)) - set(verts.tolist()))
            raise MeshStructureError(
                f"vertex indices must be contiguous; unused: {missing[:5]}")

        # Canonical undirected edge list, each required in exactly 2 faces.
        raw = np.sort(
            np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]),
            axis=1)
        edges, inverse, counts = np.unique(
            raw, axis=0, return_inverse=True, return_counts=True)
        bad_open = np.nonzero(counts == 1)[0]
        if len(bad_open):
            i, j = edges[bad_open[0]]
            raise MeshStructureError(f"open edge ({i}, {j}): surface has boundary")
        bad_many = np.nonzero(counts > 2)[0]
        if len(bad_many):
            i, j = edges[bad_many[0]]
            raise MeshStructureError(
                f"non-manifold edge ({i}, {j}) shared by {counts[bad_many[0]]} faces")
        self.edges = edges
        # Edge index opposite corner k of each face is the (F*k + f)-th row
        # of the flattened raw list, in blocks [01, 12, 20]; corner 0 is
        # opposite edge (1,2), i.e. block 1, etc.
        F = len(faces)
        inv = inverse.reshape(3, F)
        self._face_edges = np.stack([inv[1], inv[2], inv[0]], axis=1)
        self._edge_index = {(int(i), int(j)): e for e, (i, j) in enumerate(edges)}

        self._vertex_faces = [[] for _ in range(self.num_vertices)]
        for f, tri in enumerate(faces):
            for v in tri:
                self._vertex_faces[v].append(f)

        self._check_links()

        self.marked = frozenset(int(v) for v in marked)
        for v in self.marked:
            if not 0 <= v < self.num_vertices:
                raise MeshStructureError(f"marked vertex {v} not in mesh")

        self.lengths = self._resolve_lengths(edge_lengths)
        self._check_lengths()

    # -- construction helpers ------------------------------------------------

    def _resolve_lengths(self, edge_lengths):
        if isinstance(edge_lengths, dict):
            out = np.full(len(self.edges), -1.0)
            seen = set()
            for key, val in edge_lengths.items():
                if isinstance(key, str):
                    m = re.fullmatch(r"\s*(\d+)\s*-\s*(\d+)\s*", key)
                    if not m:
                        raise DomainError(f"bad edge key {key!r}; expected 'i-j'")
                    i, j = int(m.group(1)), int(m.group(2))
                else:
                    i, j = key
                pair = (min(i, j), max(i, j))
                e = self._edge_index.get(pair)
                if e is None:
                    raise DomainError(f"length given for non-edge {pair}")
                if pair in seen:
                    raise DomainError(f"duplicate length for edge {pair}")
                seen.add(pair)
                out[e] = float(val)
            if len(seen) != len(self.edges):
                pair = next(tuple(e) for e in self.edges
                            if tuple(e) not in seen)
                raise DomainError(f"missing length for edge {pair}")
            return out
        arr = np.asarray(edge_lengths, dtype=float)
        if arr.shape != (len(self.edges),):
            raise DomainError(
                f"expected {len(self.edges)} edge lengths, got shape {arr.shape}")
        return arr.copy()

    def _check_lengths(self):
        if not np.all(np.isfinite(self.lengths)):
            raise GeometryError("non-finite edge length")
        if np.any(self.lengths <= 0):
            e = int(np.argmax(self.lengths <= 0))
            i, j = self.edges[e]
            raise GeometryError(
                f"edge ({i}, {j}) has non-positive length {self.lengths[e]}")
        L = self.lengths[self._face_edges]  # (F,3): length opposite corner k
        slack = L.sum(axis=1) - 2 * L.max(axis=1)  # >0 iff strict inequality
        bad = np.nonzero(slack <= 0)[0]
        if len(bad):
            f = int(bad[0])
            raise GeometryError(
                f"face {f} {tuple(self.faces[f])} violates the triangle "
                f"inequality with lengths {tuple(L[f])}", face=f)

    def _check_links(self):
        # Each vertex link must be one cycle: every link neighbour of v has
        # exactly two incident link edges and the walk closes up once.
        for v in range(self.num_vertices):
            fs = self._vertex_faces[v]
            if not fs:
                raise MeshStructureError(f"vertex {v} lies in no face")
            adj = {}
            for f in fs:
                others = [int(w) for w in self.faces[f] if w != v]
                a, b = others
                adj.setdefault(a, []).append(b)
                adj.setdefault(b, []).append(a)
            for w, nb in adj.items():
                if len(nb) != 2:
                    raise MeshStructureError(
                        f"link of vertex {v} is not a cycle at neighbour {w}")
            start = min(adj)
            prev, cur = None, start
            steps = 0
            while True:
                nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
                prev, cur = cur, nxt
                steps += 1
                if cur == start:
                    break
                if steps > len(adj):
                    raise MeshStructureError(
                        f"link of vertex {v} does not close up")
            if steps != len(adj):
                raise MeshStructureError(
                    f"link of vertex {v} splits into several cycles")

    # -- basic queries ---------------------------------------------------------

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def num_faces(self):
        return len(self.faces)

    def edge_length(self, i, j):
        e = self._edge_index.get((min(i, j), max(i, j)))
        if e is None:
            raise DomainError(f"({i}, {j}) is not an edge")
        return float(self.lengths[e])

    def edge_id(self, i, j):
        e = self._edge_index.get((min(i, j), max(i, j)))
        if e is None:
            raise DomainError(f"({i}, {j}) is not an edge")
        return e

    def faces_at(self, v):
        return tuple(self._vertex_faces[v])

    def corner_angles(self):
        """(F,3) interior angles; column k is the angle at faces[:,k].

        Law of cosines with the arccos argument clamped to [-1, 1] so that
        nearly degenerate faces round instead of producing NaN.
        """
        L = self.lengths[self._face_edges]
        a, b, c = L[:, 0], L[:, 1], L[:, 2]
        ang = np.empty_like(L)
        ang[:, 0] = np.arccos(np.clip((b**2 + c**2 - a**2) / (2 * b * c), -1, 1))
        ang[:, 1] = np.arccos(np.clip((c**2 + a**2 - b**2) / (2 * c * a), -1, 1))
        ang[:, 2] = np.arccos(np.clip((a**2 + b**2 - c**2) / (2 * a * b), -1, 1))
        return ang

    # -- derived meshes ---------------------------------------------------------

    def with_lengths(self, new_lengths):
        """Same combinatorics and marks, new edge lengths (revalidated)."""
        return TriangleMesh(None, new_lengths, marked=self.marked, _fast_from=self)

    def with_marked(self, marked):
        return TriangleMesh(None, self.lengths, marked=marked, _fast_from=self)


class CurvatureField:
    """Per-vertex angle defects (discrete Gaussian curvature measure)."""

    def __init__(self, defect):
        self.defect = np.asarray(defect, dtype=float)

    def total(self):
        return float(self.defect.sum())

    def __getitem__(self, v):
        return float(self.defect[v])

    def __len__(self):
        return len(self.defect)


def euler_characteristic(mesh):
    """V - E + F."""
    return mesh.num_vertices - mesh.num_edges + mesh.num_faces


def angle_defects(mesh):
    """Angle defect 2*pi - (sum of incident angles) at every vertex."""
    ang = mesh.corner_angles()
    acc = np.zeros(mesh.num_vertices)
    np.add.at(acc, mesh.faces.reshape(-1), ang.reshape(-1))
    return CurvatureField(2 * math.pi - acc)


def check_gauss_bonnet(mesh):
    """|sum of defects - 2*pi*chi|; anything above 1e-9 means trouble."""
    chi = euler_characteristic(mesh)
    return abs(angle_defects(mesh).total() - 2 * math.pi * chi)


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def load_mesh_json(source):
    """Mesh from the JSON format
    {"faces": [[i,j,k],...], "edge_lengths": {"i-j": l,...}, "marked": [...]}.

    ``source`` is a path or an already-parsed dict; indices are 0-based.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            data = json.load(fh)
    else:
        data = source
    if not isinstance(data, dict) or "faces" not in data:
        raise DomainError("mesh JSON must be an object with a 'faces' array")
    if "edge_lengths" not in data:
        raise DomainError("mesh JSON lacks 'edge_lengths'")
    return TriangleMesh(data["faces"], data["edge_lengths"],
                        marked=data.get("marked", ()))


def load_mesh_obj(path, marked=()):
    """Mesh from a Wavefront OBJ; lengths from vertex positions.

    Only ``v`` and ``f`` records are used; faces must be triangles.  OBJ's
    1-based indices are shifted to 0-based.
    """
    positions = []
    faces = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise DomainError(f"{path}:{lineno}: bad vertex record")
                positions.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(tok.split("/")[0]) for tok in parts[1:]]
                if len(idx) != 3:
                    raise DomainError(
                        f"{path}:{lineno}: only triangular faces supported")
                faces.append([i - 1 for i in idx])
    if not faces:
        raise DomainError(f"{path}: no faces found")
    pos = np.asarray(positions)
    faces = np.asarray(faces, dtype=np.int64)
    pairs = np.sort(
        np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]),
        axis=1)
    lengths = {}
    for i, j in np.unique(pairs, axis=0):
        lengths[(int(i), int(j))] = float(np.linalg.norm(pos[i] - pos[j]))
    return TriangleMesh(faces, lengths, marked=marked)


def load_mesh(path, marked=()):
    """Dispatch on extension: .obj or .json."""
    p = str(path)
    if p.lower().endswith(".obj"):
        return load_mesh_obj(p, marked=marked)
    return load_mesh_json(p) if not marked else (
        load_mesh_json(p).with_marked(marked))


def mesh_to_json_obj(mesh):
    """Plain dict in the JSON mesh format (floats left as Python floats)."""
    return {
        "faces": [[int(v) for v in f] for f in mesh.faces],
        "edge_lengths": {
            f"{int(i)}-{int(j)}": float(l)
            for (i, j), l in zip(mesh.edges, mesh.lengths)
        },
        "marked": sorted(mesh.marked),
    }
