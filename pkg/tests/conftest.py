"""Shared fixtures and reference-geometry builders used across the suite."""
from __future__ import annotations

import numpy as np
import pytest

from bodymod.mesh import TriangleMesh, VertexRegion
from bodymod.shapemodel import (
    AnthroVector,
    generate_synthetic_corpus,
    train_shape_model,
)


def build_icosphere(subdivisions: int) -> TriangleMesh:
    """Unit icosphere by repeated edge-midpoint subdivision of an icosahedron."""
    phi = (1.0 + 5.0 ** 0.5) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [tuple(p) for p in v]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = np.array(verts[a]) + np.array(verts[b])
                p /= np.linalg.norm(p)
                verts.append(tuple(p))
                cache[key] = len(verts) - 1
            return cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = next_faces
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64))


def planar_grid(n: int, jitter: float = 0.0, seed: int = 0) -> TriangleMesh:
    """Regular triangulated n x n grid in the z=0 plane."""
    rng = np.random.default_rng(seed)
    xs, ys = np.meshgrid(np.arange(n, dtype=np.float64),
                         np.arange(n, dtype=np.float64))
    verts = np.stack([xs.ravel(), ys.ravel(), np.zeros(n * n)], axis=1)
    if jitter:
        verts[:, :2] += rng.uniform(-jitter, jitter, (n * n, 2))
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j
            b = a + 1
            c = a + n
            d = c + 1
            faces.append([a, b, c])
            faces.append([b, d, c])
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def grid_interior(n: int) -> VertexRegion:
    idx = [i * n + j for i in range(1, n - 1) for j in range(1, n - 1)]
    return VertexRegion(np.array(idx, dtype=np.int64), n * n)


@pytest.fixture(scope="session")
def icosphere3() -> TriangleMesh:
    return build_icosphere(3)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(8, seed=11, rings=20, segments=20)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    model = train_shape_model(small_corpus)
    model.base_anthro = AnthroVector(
        *small_corpus.measurement_matrix().mean(axis=0))
    return model
