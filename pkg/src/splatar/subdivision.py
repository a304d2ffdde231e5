"""Midpoint triangle subdivision that carries per-vertex attributes along.

Each pass inserts one vertex at the center of every unique undirected edge
and splits each face 1-to-4; attribute channels of a new vertex are the mean
of the two endpoint rows. Old vertices, attribute rows, and indices are
preserved verbatim, so subdivision results are deterministic and original
data survives any number of passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshValidationError


@dataclass
class AttributedMesh:
    """Triangle mesh with named (V, k) attribute channels.

    Channels listed in ``normalized_channels`` (e.g. skinning weights) have
    their rows re-normalized to sum 1 after midpoint averaging.
    """

    vertices: np.ndarray
    faces: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)
    normalized_channels: frozenset[str] = frozenset()

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.channels = {
            k: np.ascontiguousarray(v, dtype=np.float64) for k, v in self.channels.items()
        }
        V = self.vertices.shape[0]
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshValidationError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise MeshValidationError("faces must be (F, 3)")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= V:
                raise MeshValidationError("face index out of range")
            if np.any(
                (self.faces[:, 0] == self.faces[:, 1])
                | (self.faces[:, 1] == self.faces[:, 2])
                | (self.faces[:, 0] == self.faces[:, 2])
            ):
                raise MeshValidationError("degenerate face (repeated vertex index)")
            canon = np.sort(self.faces, axis=1)
            if np.unique(canon, axis=0).shape[0] != self.faces.shape[0]:
                raise MeshValidationError("duplicate faces")
        for name, ch in self.channels.items():
            if ch.ndim != 2 or ch.shape[0] != V:
                raise MeshValidationError(f"channel {name!r} must have V rows")
        unknown = self.normalized_channels - set(self.channels)
        if unknown:
            raise MeshValidationError(f"normalized_channels not present: {sorted(unknown)}")

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_faces(self) -> int:
        return self.faces.shape[0]


def unique_edges(faces: np.ndarray) -> np.ndarray:
    """Unique undirected edges as (E, 2) sorted-endpoint pairs, in
    lexicographic order (the canonical edge ordering for new vertices)."""
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0)
    e.sort(axis=1)
    return np.unique(e, axis=0)


def subdivide_once(mesh: AttributedMesh) -> AttributedMesh:
    """One midpoint pass: V' = V + E, F' = 4F.

    New vertex positions are edge midpoints; each attribute channel row of a
    new vertex is the mean of the endpoint rows (normalized channels are
    re-normalized against float drift). Edge-to-new-vertex numbering follows
    the sorted unique-edge order, so output is byte-deterministic.
    """
    V = mesh.num_vertices
    edges = unique_edges(mesh.faces)
    E = edges.shape[0]

    new_vertices = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.concatenate([mesh.vertices, new_vertices], axis=0)

    channels: dict[str, np.ndarray] = {}
    for name, ch in mesh.channels.items():
        new_rows = 0.5 * (ch[edges[:, 0]] + ch[edges[:, 1]])
        if name in mesh.normalized_channels:
            new_rows = new_rows / new_rows.sum(axis=1, keepdims=True)
        channels[name] = np.concatenate([ch, new_rows], axis=0)

    # edge (a, b) with a < b -> midpoint vertex index V + rank of (a, b)
    edge_index = {(int(a), int(b)): V + i for i, (a, b) in enumerate(edges)}

    faces = np.empty((4 * mesh.num_faces, 3), dtype=np.int64)
    for fi, (a, b, c) in enumerate(mesh.faces):
        a, b, c = int(a), int(b), int(c)
        mab = edge_index[(a, b) if a < b else (b, a)]
        mbc = edge_index[(b, c) if b < c else (c, b)]
        mca = edge_index[(c, a) if c < a else (a, c)]
        faces[4 * fi + 0] = (a, mab, mca)
        faces[4 * fi + 1] = (mab, b, mbc)
        faces[4 * fi + 2] = (mca, mbc, c)
        faces[4 * fi + 3] = (mab, mbc, mca)

    return AttributedMesh(vertices, faces, channels, mesh.normalized_channels)


def subdivide(mesh: AttributedMesh, iterations: int) -> AttributedMesh:
    """Iterated midpoint subdivision; iterations = 0 returns the input."""
    if iterations < 0:
        raise MeshValidationError("iterations must be >= 0")
    for _ in range(iterations):
        mesh = subdivide_once(mesh)
    return mesh
