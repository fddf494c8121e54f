"""Triangle mesh container, OBJ I/O, cotangent Laplacian, and constrained reconstruction.

Geometry is stored as plain numpy arrays. All operations are pure: they never
mutate an existing mesh, only return new arrays. Topology is fixed at load time;
morphing only moves vertices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import splu

DEGENERATE_AREA = 1e-12
COT_CLAMP = 1e4


class MeshError(Exception):
    """Invalid mesh data (parse failure, degenerate faces, bad indices)."""


class SolveError(Exception):
    """Reconstruction system is rank-deficient or otherwise unsolvable."""


@dataclass(frozen=True)
class TriangleMesh:
    """Shared-topology vertex/face container.

    vertices: (N, 3) float64 positions in meters.
    faces: (F, 3) int32 vertex index triples.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (N, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        bad = np.nonzero(face_areas(v, f) <= DEGENERATE_AREA)[0]
        if bad.size:
            raise MeshError(f"degenerate faces (area <= {DEGENERATE_AREA}): {bad.tolist()[:20]}")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices: np.ndarray) -> "TriangleMesh":
        """Same topology, new positions."""
        return TriangleMesh(vertices, self.faces)

    def total_area(self) -> float:
        return float(face_areas(self.vertices, self.faces).sum())


def face_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    if f.size == 0:
        return np.zeros(0)
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@dataclass(frozen=True)
class VertexRegion:
    """Sorted duplicate-free vertex index set over a mesh with ``vertex_count`` vertices."""

    indices: np.ndarray
    vertex_count: int

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        if idx.size and (idx[0] < 0 or idx[-1] >= self.vertex_count):
            raise MeshError("region index out of range")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def complement(self) -> "VertexRegion":
        mask = np.ones(self.vertex_count, dtype=bool)
        mask[self.indices] = False
        return VertexRegion(np.nonzero(mask)[0], self.vertex_count)

    def mask(self) -> np.ndarray:
        m = np.zeros(self.vertex_count, dtype=bool)
        m[self.indices] = True
        return m

    def union(self, other: "VertexRegion") -> "VertexRegion":
        if other.vertex_count != self.vertex_count:
            raise MeshError("region size mismatch")
        return VertexRegion(np.union1d(self.indices, other.indices), self.vertex_count)


def load_region(path, vertex_count: int) -> VertexRegion:
    """Read a region file: one 0-based vertex index per line, '#' comments."""
    indices = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                indices.append(int(text))
            except ValueError as exc:
                raise MeshError(f"{path}:{lineno}: bad region index {text!r}") from exc
    return VertexRegion(np.array(indices, dtype=np.int64), vertex_count)


def save_region(region: VertexRegion, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for i in region.indices:
            fh.write(f"{int(i)}\n")


def load_mesh(path) -> TriangleMesh:
    """Parse an ASCII Wavefront OBJ with triangle faces.

    Only 'v' and 'f' records are honored; normals/UVs in face specs are ignored.
    Raises MeshError with the offending line number on malformed input.
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
                try:
                    vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
                except ValueError as exc:
                    raise MeshError(f"{path}:{lineno}: bad vertex coordinate") from exc
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise MeshError(f"{path}:{lineno}: non-triangular face ({len(refs)} vertices)")
                tri = []
                for ref in refs:
                    head = ref.split("/", 1)[0]
                    try:
                        idx = int(head)
                    except ValueError as exc:
                        raise MeshError(f"{path}:{lineno}: bad face index {ref!r}") from exc
                    if idx == 0:
                        raise MeshError(f"{path}:{lineno}: OBJ indices are 1-based")
                    tri.append(idx - 1 if idx > 0 else len(vertices) + idx)
                faces.append(tri)
            # other record types (vn, vt, o, g, s, mtllib, usemtl) are skipped
    try:
        return TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                            np.array(faces, dtype=np.int64).reshape(-1, 3))
    except MeshError:
        raise
    except ValueError as exc:
        raise MeshError(f"{path}: malformed OBJ data: {exc}") from exc


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write an ASCII OBJ. Positions keep enough digits to round-trip to 1e-9 m."""
    try:
        with open(path, "w", encoding="ascii") as fh:
            for p in mesh.vertices:
                fh.write(f"v {p[0]:.12g} {p[1]:.12g} {p[2]:.12g}\n")
            for f in mesh.faces:
                fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")
    except OSError as exc:
        raise IOError(f"cannot write mesh to {path}: {exc}") from exc


def vertex_adjacency(mesh: TriangleMesh) -> csr_matrix:
    """Boolean vertex-vertex adjacency from shared edges."""
    f = mesh.faces
    n = mesh.vertex_count
    rows = np.concatenate([f[:, 0], f[:, 1], f[:, 1], f[:, 2], f[:, 2], f[:, 0]])
    cols = np.concatenate([f[:, 1], f[:, 0], f[:, 2], f[:, 1], f[:, 0], f[:, 2]])
    data = np.ones(len(rows), dtype=bool)
    adj = csr_matrix((data, (rows, cols)), shape=(n, n), dtype=bool)
    adj.sum_duplicates()
    return adj


def expand_one_ring(mesh: TriangleMesh, region: VertexRegion) -> VertexRegion:
    """Region plus every vertex sharing an edge with it."""
    if region.vertex_count != mesh.vertex_count:
        raise MeshError("region does not match mesh")
    if len(region) == 0:
        return region
    adj = vertex_adjacency(mesh)
    neighbors = np.unique(adj[region.indices].indices)
    return VertexRegion(np.union1d(region.indices, neighbors), mesh.vertex_count)


@dataclass
class LaplacianRows:
    """Sparse per-vertex rows of the area-scaled cotangent Laplacian.

    For a row i: entry over neighbor j is (cot a_ij + cot b_ij) / (2 A_i) and the
    diagonal is minus the off-diagonal sum, so each row annihilates translations.
    ``geometry`` records which position array the row weights/targets were built
    from; mixed-geometry rows make the assembled matrix asymmetric, which
    ``reconstruct`` handles via normal equations.
    """

    rows: np.ndarray                 # row (vertex) indices, shape (R,)
    matrix: csr_matrix               # (R, N) row-slice of L
    voronoi_area: np.ndarray         # (R,) mixed Voronoi areas, m^2
    geometry: np.ndarray             # (N, 3) positions the rows were computed from

    def deltas(self) -> np.ndarray:
        """Laplacian (differential) coordinates of the rows' own geometry."""
        return differential_coordinates(self, self.geometry)


def _mixed_voronoi_areas(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Per-vertex mixed Voronoi areas (Voronoi region for non-obtuse triangles,
    area/2 at the obtuse corner and area/4 elsewhere otherwise). Partitions each
    triangle exactly, so the per-vertex areas sum to the total surface area."""
    n = len(vertices)
    areas = np.zeros(n)
    tri = vertices[faces]                       # (F, 3, 3)
    full = face_areas(vertices, faces)          # (F,)

    # squared edge lengths opposite each corner
    d2 = np.empty((len(faces), 3))
    for c in range(3):
        e = tri[:, (c + 1) % 3] - tri[:, (c + 2) % 3]
        d2[:, c] = np.einsum("ij,ij->i", e, e)

    # cotangents at each corner
    cots = np.empty((len(faces), 3))
    for c in range(3):
        u = tri[:, (c + 1) % 3] - tri[:, c]
        v = tri[:, (c + 2) % 3] - tri[:, c]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        cross = np.maximum(cross, 1e-300)
        cots[:, c] = np.einsum("ij,ij->i", u, v) / cross

    obtuse_corner = np.argmin(cots, axis=1)
    any_obtuse = cots.min(axis=1) < 0.0

    contrib = np.empty((len(faces), 3))
    # non-obtuse: Voronoi area at corner c is (|e_b|^2 cot(b) + |e_c|^2 cot(c)) / 8
    for c in range(3):
        b, a = (c + 1) % 3, (c + 2) % 3
        contrib[:, c] = (d2[:, b] * cots[:, b] + d2[:, a] * cots[:, a]) / 8.0
    for c in range(3):
        is_ob = any_obtuse
        at_c = obtuse_corner == c
        contrib[is_ob & at_c, c] = full[is_ob & at_c] / 2.0
        contrib[is_ob & ~at_c, c] = full[is_ob & ~at_c] / 4.0

    for c in range(3):
        np.add.at(areas, faces[:, c], contrib[:, c])
    return areas


def cotangent_laplacian(positions: np.ndarray, faces: np.ndarray,
                        rows: VertexRegion) -> LaplacianRows:
    """Build the requested rows of the cotangent Laplacian at the given geometry.

    Off-diagonal weight: (cot a + cot b) / 2 over the two triangles sharing the
    edge, scaled by the inverse mixed Voronoi area of the row vertex. Cotangents
    are clamped to +-1e4 to survive near-degenerate triangles.
    """
    positions = np.asarray(positions, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    if not np.isfinite(positions).all():
        raise MeshError("non-finite vertex positions")
    row_mask = rows.mask()
    # degenerate-triangle check restricted to the support of the requested rows
    touched = row_mask[faces].any(axis=1)
    bad = np.nonzero(touched & (face_areas(positions, faces) <= DEGENERATE_AREA))[0]
    if bad.size:
        raise MeshError(f"degenerate faces in Laplacian support: {bad.tolist()[:20]}")

    n = len(positions)
    tri = positions[faces]
    cots = np.empty((len(faces), 3))
    for c in range(3):
        u = tri[:, (c + 1) % 3] - tri[:, c]
        v = tri[:, (c + 2) % 3] - tri[:, c]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        cross = np.maximum(cross, 1e-300)
        cots[:, c] = np.einsum("ij,ij->i", u, v) / cross
    cots = np.clip(cots, -COT_CLAMP, COT_CLAMP)

    # edge (i, j) opposite corner c gets cot(c) / 2, accumulated from both sides
    ii, jj, ww = [], [], []
    for c in range(3):
        i = faces[:, (c + 1) % 3]
        j = faces[:, (c + 2) % 3]
        w = cots[:, c] / 2.0
        ii.append(i); jj.append(j); ww.append(w)
        ii.append(j); jj.append(i); ww.append(w)
    ii = np.concatenate(ii); jj = np.concatenate(jj); ww = np.concatenate(ww)

    keep = row_mask[ii]
    ii, jj, ww = ii[keep], jj[keep], ww[keep]

    areas = _mixed_voronoi_areas(positions, faces)
    if np.any(areas[rows.indices] <= 0):
        raise MeshError("non-positive Voronoi area in requested rows")

    scale = 1.0 / areas[ii]
    off = csr_matrix((ww * scale, (ii, jj)), shape=(n, n))
    off.sum_duplicates()
    diag = np.asarray(off.sum(axis=1)).ravel()
    lap = off - csr_matrix((diag, (np.arange(n), np.arange(n))), shape=(n, n))
    return LaplacianRows(
        rows=rows.indices.copy(),
        matrix=lap[rows.indices],
        voronoi_area=areas[rows.indices],
        geometry=positions.copy(),
    )


def merge_rows(parts: list[tuple[LaplacianRows, np.ndarray]]
               ) -> tuple[LaplacianRows, np.ndarray]:
    """Stack disjoint row sets (possibly built from different geometries) into one
    operator plus aligned per-row delta targets, sorted by vertex index."""
    from scipy.sparse import vstack
    all_rows = np.concatenate([p.rows for p, _ in parts])
    if len(np.unique(all_rows)) != len(all_rows):
        raise MeshError("row sets overlap")
    order = np.argsort(all_rows, kind="stable")
    mat = vstack([p.matrix for p, _ in parts]).tocsr()[order]
    areas = np.concatenate([p.voronoi_area for p, _ in parts])[order]
    deltas = np.vstack([d for _, d in parts])[order]
    merged = LaplacianRows(rows=all_rows[order], matrix=mat, voronoi_area=areas,
                           geometry=parts[-1][0].geometry)
    return merged, deltas


def differential_coordinates(lap: LaplacianRows, positions: np.ndarray) -> np.ndarray:
    """delta_i = sum_j L_ij p_j for each stored row."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.shape != (lap.matrix.shape[1], 3):
        raise MeshError(f"positions shape {positions.shape} incompatible with operator")
    return lap.matrix @ positions


def reconstruct(lap: LaplacianRows, target_deltas: np.ndarray,
                hard_constraints: dict[int, np.ndarray]) -> np.ndarray:
    """Solve row-wise L p = delta with hard vertex constraints.

    Constrained vertices are eliminated (their columns move to the right-hand
    side) and appear bit-identically in the output. Because rows may come from
    different geometries the assembled matrix is not guaranteed symmetric, so the
    free block is solved in the least-squares sense via normal equations with a
    sparse direct factorization.
    """
    if not hard_constraints:
        raise SolveError("rank-deficient: constraints required")
    n = lap.matrix.shape[1]
    target_deltas = np.asarray(target_deltas, dtype=np.float64)
    if target_deltas.shape != (len(lap.rows), 3):
        raise MeshError("target deltas shape mismatch")

    fixed_idx = np.array(sorted(hard_constraints), dtype=np.int64)
    if fixed_idx.size and (fixed_idx[0] < 0 or fixed_idx[-1] >= n):
        raise MeshError("constraint index out of range")
    fixed_pos = np.array([hard_constraints[int(i)] for i in fixed_idx], dtype=np.float64)

    free_mask = np.ones(n, dtype=bool)
    free_mask[fixed_idx] = False
    free_idx = np.nonzero(free_mask)[0]

    out = np.empty((n, 3))
    out[fixed_idx] = fixed_pos
    if free_idx.size == 0:
        return out

    A = lap.matrix[:, free_idx].tocsc()
    rhs = target_deltas - lap.matrix[:, fixed_idx] @ fixed_pos

    ata = (A.T @ A).tocsc()
    try:
        factor = splu(ata)
    except RuntimeError as exc:
        raise SolveError(f"singular reconstruction system: {exc}") from exc
    sol = factor.solve(A.T @ rhs)
    if not np.isfinite(sol).all():
        raise SolveError("reconstruction produced non-finite positions")
    residual = np.linalg.norm(A @ sol - rhs)
    scale = max(np.linalg.norm(rhs), 1e-30)
    if residual / scale > 1e-6 and np.linalg.norm(ata @ sol - A.T @ rhs) > 1e-8 * max(
            np.linalg.norm(A.T @ rhs), 1e-30):
        raise SolveError(f"reconstruction did not converge (relative residual {residual / scale:.2e})")
    out[free_idx] = sol
    return out
