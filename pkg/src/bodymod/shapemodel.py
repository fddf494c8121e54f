"""Statistical body-shape model: PCA over the non-face region, a linear map from
anthropometric measurements to shape coefficients, and weight modification with
face-preserving Laplacian stitching.

The model treats a body as stacked vertex positions. Training extracts principal
shape directions from a registered corpus restricted to the non-face region, then
regresses (weight, height, armspan, inseam, bias) onto the per-subject shape
coefficients. Changing weight alone moves the non-face vertices along the learned
direction; the face is re-attached by solving a Laplacian system with the face
vertices as hard constraints.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mesh import (
    MeshError,
    TriangleMesh,
    VertexRegion,
    cotangent_laplacian,
    expand_one_ring,
    load_mesh,
    load_region,
    merge_rows,
    reconstruct,
    save_mesh,
    save_region,
)

MODEL_MAGIC = b"BWMM"
MODEL_VERSION = 1

MEASUREMENT_NAMES = ("weight_kg", "height_m", "armspan_m", "inseam_m")


class ModelError(Exception):
    """Training or model-file failure."""


@dataclass(frozen=True)
class AnthroVector:
    """Anthropometric measurements of one subject."""

    weight: float   # kg
    height: float   # m
    armspan: float  # m
    inseam: float   # m

    def __post_init__(self):
        vals = (self.weight, self.height, self.armspan, self.inseam)
        if not all(np.isfinite(vals)) or any(v <= 0 for v in vals):
            raise ValueError(f"measurements must be positive and finite: {vals}")
        if self.weight >= 500 or self.height >= 3:
            raise ValueError(f"implausible measurements: {vals}")

    def as_array(self) -> np.ndarray:
        return np.array([self.weight, self.height, self.armspan, self.inseam])


@dataclass(frozen=True)
class AnthroDelta:
    """Desired change in measurements; the bias entry is always zero."""

    d_weight: float = 0.0
    d_height: float = 0.0
    d_armspan: float = 0.0
    d_inseam: float = 0.0

    def as_array(self) -> np.ndarray:
        # 5th entry is the bias column of the measurement map, fixed at 0
        return np.array([self.d_weight, self.d_height, self.d_armspan,
                         self.d_inseam, 0.0])

    @classmethod
    def weight_only(cls, d_weight: float) -> "AnthroDelta":
        return cls(d_weight=d_weight)


@dataclass
class Corpus:
    """Registered meshes sharing one topology, with per-subject measurements."""

    meshes: list[TriangleMesh]
    anthro: list[AnthroVector]
    face_region: VertexRegion | None = None

    def __post_init__(self):
        if len(self.meshes) < 2:
            raise ModelError("corpus needs at least 2 meshes")
        if len(self.meshes) != len(self.anthro):
            raise ModelError("mesh/measurement count mismatch")
        first = self.meshes[0]
        for m in self.meshes[1:]:
            if m.vertex_count != first.vertex_count or not np.array_equal(m.faces, first.faces):
                raise ModelError("corpus meshes do not share topology")

    @property
    def size(self) -> int:
        return len(self.meshes)

    def measurement_matrix(self) -> np.ndarray:
        return np.array([a.as_array() for a in self.anthro])

    def save(self, directory) -> None:
        directory = Path(directory)
        (directory / "meshes").mkdir(parents=True, exist_ok=True)
        for i, m in enumerate(self.meshes):
            save_mesh(m, directory / "meshes" / f"{i:03d}.obj")
        with open(directory / "measurements.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(MEASUREMENT_NAMES)
            for a in self.anthro:
                writer.writerow([repr(a.weight), repr(a.height),
                                 repr(a.armspan), repr(a.inseam)])
        if self.face_region is not None:
            save_region(self.face_region, directory / "face_region.txt")

    @classmethod
    def load(cls, directory) -> "Corpus":
        directory = Path(directory)
        mesh_paths = sorted((directory / "meshes").glob("*.obj"))
        if not mesh_paths:
            raise ModelError(f"no meshes under {directory}/meshes")
        meshes = [load_mesh(p) for p in mesh_paths]
        anthro = []
        with open(directory / "measurements.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                anthro.append(AnthroVector(
                    weight=float(row["weight_kg"]), height=float(row["height_m"]),
                    armspan=float(row["armspan_m"]), inseam=float(row["inseam_m"])))
        face_region = None
        region_path = directory / "face_region.txt"
        if region_path.exists():
            face_region = load_region(region_path, meshes[0].vertex_count)
        return cls(meshes, anthro, face_region)


def _select(positions: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Stacked coordinates of the selected vertices, interleaved xyz."""
    return positions[indices].reshape(-1)


def train_pca(corpus: Corpus, face_region: VertexRegion, k: int
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """PCA of the corpus restricted to the non-face region.

    Returns (mean positions (N,3), basis P (3V,k), coefficients W (k,M)).
    Basis columns are orthonormal principal directions by descending variance;
    W[:, j] are the coefficients of training mesh j.
    """
    n = corpus.meshes[0].vertex_count
    if face_region.vertex_count != n:
        raise ModelError("face region does not match corpus topology")
    m = corpus.size
    if not 1 <= k <= m - 1:
        raise ModelError(f"k={k} out of range [1, {m - 1}]")
    body = face_region.complement().indices
    if k > 3 * len(body):
        raise ModelError("k exceeds non-face coordinate count")

    stack = np.stack([mesh.vertices for mesh in corpus.meshes])   # (M, N, 3)
    mean = stack.mean(axis=0)
    data = np.stack([_select(v - mean, body) for v in stack], axis=1)  # (3V, M)
    u, _, _ = np.linalg.svd(data, full_matrices=False)
    p = u[:, :k]
    w = p.T @ data
    return mean, p, w


def fit_measurement_map(d: np.ndarray, w: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares map from (measurements | 1) to shape coefficients.

    Solves (D|1) C = W^T via normal equations; returns C (5,k) and the residual
    norm per coefficient column.
    """
    d = np.asarray(d, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if d.ndim != 2 or d.shape[1] != 4:
        raise ModelError(f"measurement matrix must be (M, 4), got {d.shape}")
    m = d.shape[0]
    if m < 5:
        raise ModelError(f"need at least 5 subjects to fit the map, got {m}")
    if w.shape[1] != m:
        raise ModelError("coefficient/measurement subject count mismatch")
    a = np.hstack([d, np.ones((m, 1))])
    if np.linalg.matrix_rank(a) < 5:
        raise ModelError("rank-deficient measurement matrix (constant or dependent column)")
    ata = a.T @ a
    c = np.linalg.solve(ata, a.T @ w.T)
    residuals = np.linalg.norm(a @ c - w.T, axis=0)
    return c, residuals


@dataclass
class ShapeModel:
    """Trained weight-modification model."""

    faces: np.ndarray             # (F, 3) template topology
    mean: np.ndarray              # (N, 3) mean positions
    face_region: VertexRegion     # fixed region F; complement is the modeled region
    basis: np.ndarray             # P, (3V, k), orthonormal columns
    coeff_map: np.ndarray         # C, (5, k)
    train_count: int              # M
    base_anthro: AnthroVector | None = None

    def __post_init__(self):
        v = len(self.face_region.complement())
        k = self.basis.shape[1]
        if self.basis.shape[0] != 3 * v:
            raise ModelError("basis row count does not match non-face region")
        if self.coeff_map.shape != (5, k):
            raise ModelError("coefficient map shape mismatch")
        gram = self.basis.T @ self.basis
        if np.abs(gram - np.eye(k)).max() > 1e-8:
            raise ModelError("basis columns are not orthonormal")

    @property
    def component_count(self) -> int:
        return self.basis.shape[1]

    @property
    def vertex_count(self) -> int:
        return len(self.mean)

    def mean_mesh(self) -> TriangleMesh:
        return TriangleMesh(self.mean, self.faces)

    def _check_mesh(self, mesh: TriangleMesh) -> None:
        if mesh.vertex_count != self.vertex_count or not np.array_equal(mesh.faces, self.faces):
            raise ModelError("mesh does not share model topology")

    def project(self, mesh: TriangleMesh) -> np.ndarray:
        """Shape coefficients w = P^T (Sx - Sx_mean)."""
        self._check_mesh(mesh)
        body = self.face_region.complement().indices
        return self.basis.T @ _select(mesh.vertices - self.mean, body)

    def morph_region(self, mesh: TriangleMesh, delta: AnthroDelta) -> np.ndarray:
        """New positions of the non-face region only: Sx + P (C^T delta_d)."""
        self._check_mesh(mesh)
        dd = delta.as_array()
        if not np.isfinite(dd).all():
            raise ModelError("non-finite measurement delta")
        body = self.face_region.complement().indices
        flat = _select(mesh.vertices, body) + self.basis @ (self.coeff_map.T @ dd)
        return flat.reshape(-1, 3)

    def modify_weight(self, mesh: TriangleMesh, d_weight: float) -> TriangleMesh:
        """Full weight-modification pipeline.

        Moves the non-face region along the weight direction, then re-attaches
        the untouched face: Laplacian rows of the face region and its 1-ring are
        built from the unmodified geometry, all other rows from the modified
        geometry, and the face vertices enter the solve as hard constraints.
        """
        self._check_mesh(mesh)
        body_idx = self.face_region.complement().indices
        modified = np.array(mesh.vertices)
        modified[body_idx] = self.morph_region(mesh, AnthroDelta.weight_only(d_weight))

        near_face = expand_one_ring(mesh, self.face_region)
        rest = near_face.complement()
        lap_fixed = cotangent_laplacian(mesh.vertices, self.faces, near_face)
        lap_moved = cotangent_laplacian(modified, self.faces, rest)
        merged, deltas = merge_rows([
            (lap_fixed, lap_fixed.deltas()),
            (lap_moved, lap_moved.deltas()),
        ])
        constraints = {int(i): mesh.vertices[i] for i in self.face_region.indices}
        out = reconstruct(merged, deltas, constraints)
        return mesh.with_vertices(out)


def train_shape_model(corpus: Corpus, face_region: VertexRegion | None = None,
                      k: int | None = None) -> ShapeModel:
    """Train PCA and the measurement map in one step.

    k defaults to min(30, M-1) and is capped at M-1.
    """
    if face_region is None:
        face_region = corpus.face_region
    if face_region is None:
        raise ModelError("no face region given and corpus carries none")
    m = corpus.size
    if k is None:
        k = min(30, m - 1)
    k = min(k, m - 1)
    mean, p, w = train_pca(corpus, face_region, k)
    c, _ = fit_measurement_map(corpus.measurement_matrix(), w)
    return ShapeModel(faces=corpus.meshes[0].faces, mean=mean, face_region=face_region,
                      basis=p, coeff_map=c, train_count=m)


# ---------------------------------------------------------------------------
# volume oracle

def _check_closed(mesh: TriangleMesh) -> None:
    f = mesh.faces
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    keys = np.sort(edges, axis=1)
    uniq, counts = np.unique(keys, axis=0, return_counts=True)
    if np.any(counts != 2):
        raise MeshError("mesh is not closed (boundary or non-manifold edges)")
    # each undirected edge must appear once per direction
    directed, dcounts = np.unique(edges, axis=0, return_counts=True)
    if np.any(dcounts != 1):
        raise MeshError("mesh is not consistently oriented")


def mesh_volume(mesh: TriangleMesh) -> float:
    """Signed enclosed volume by the divergence theorem."""
    tri = mesh.vertices[mesh.faces]
    return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


def weight_from_volume(mesh: TriangleMesh, base_mesh: TriangleMesh,
                       base_weight: float) -> float:
    """Weight implied by volume relative to a calibration mesh of known weight."""
    _check_closed(mesh)
    _check_closed(base_mesh)
    return base_weight * mesh_volume(mesh) / mesh_volume(base_mesh)


# ---------------------------------------------------------------------------
# morph-target table

@dataclass
class MorphTable:
    """Precomputed vertex buffers at sampled weight deltas, for cheap interpolation."""

    samples: np.ndarray     # (T,) sorted delta-weights, kg
    buffers: np.ndarray     # (T, N, 3)

    def query(self, d_weight: float) -> np.ndarray:
        """Linear interpolation between the two bracketing samples; clamped at ends."""
        s = self.samples
        if d_weight <= s[0]:
            return self.buffers[0]
        if d_weight >= s[-1]:
            return self.buffers[-1]
        hi = int(np.searchsorted(s, d_weight))
        lo = hi - 1
        if s[hi] == d_weight:
            return self.buffers[hi]
        alpha = (d_weight - s[lo]) / (s[hi] - s[lo])
        return (1.0 - alpha) * self.buffers[lo] + alpha * self.buffers[hi]


def precompute_morph_targets(model: ShapeModel, mesh: TriangleMesh,
                             samples) -> MorphTable:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1 or len(samples) == 0:
        raise ModelError("need at least one sample delta")
    if np.any(np.diff(samples) <= 0):
        raise ModelError("samples must be strictly increasing")
    buffers = np.stack([model.modify_weight(mesh, float(dw)).vertices for dw in samples])
    return MorphTable(samples=samples, buffers=buffers)


# ---------------------------------------------------------------------------
# synthetic registered corpus
#
# Each subject is the same closed surface-of-revolution body template with
# per-vertex coordinates that are exact affine functions of the measurement
# vector (weight, height, armspan, inseam):
#   x = tx * (tau * w/70 + (1 - tau) - beta * mu) + shear * inseam * ty
#   y = ty * height
#   z = tz * (z0 + z1 * armspan)
# tau tapers the weight influence to zero well below the face region so weight
# morphs never touch the face or its neighborhood. The inseam term is a shear
# along the body axis, which changes no volume on a closed mesh. beta*mu removes
# the weight-independent volume of the head/neck (computed numerically from the
# template), leaving the enclosed volume exactly proportional to weight for a
# fixed subject.

FACE_Y_THRESHOLD = 0.86   # template height above which vertices belong to the face
_TAPER_LO, _TAPER_HI = 0.70, 0.80
_WEIGHT_SCALE = 1.0 / 70.0   # body width per kg
_DEPTH_BASE, _DEPTH_SPAN = 0.55, 0.25
_INSEAM_SHEAR = 0.05


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _body_profile(y: np.ndarray) -> np.ndarray:
    """Radius of the unit body template as a function of normalized height."""
    envelope = (4.0 * y * (1.0 - y)) ** 0.3
    torso = 0.155 * np.exp(-(((y - 0.40) / 0.22) ** 2))
    head = 0.020 * np.exp(-(((y - 0.93) / 0.045) ** 2))
    return envelope * (torso + head + 0.008)


def _x_volume(x: np.ndarray, template: np.ndarray, faces: np.ndarray) -> float:
    """Enclosed-volume functional evaluated with a substituted x-coordinate field."""
    pos = np.stack([x, template[:, 1], template[:, 2]], axis=1)
    tri = pos[faces]
    return float(np.einsum("ij,ij->i", tri[:, 0],
                           np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)


@dataclass(frozen=True)
class _Template:
    vertices: np.ndarray
    faces: np.ndarray
    taper: np.ndarray
    leg_field: np.ndarray
    beta: float
    face_indices: np.ndarray


_template_cache: dict[tuple[int, int], _Template] = {}


def _template(rings: int, segments: int) -> _Template:
    key = (rings, segments)
    cached = _template_cache.get(key)
    if cached is not None:
        return cached
    ys = np.arange(1, rings + 1) / (rings + 1)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    radii = _body_profile(ys)
    verts = [np.zeros((1, 3))]
    for y, r in zip(ys, radii):
        verts.append(np.stack([r * np.cos(theta), np.full(segments, y),
                               r * np.sin(theta)], axis=1))
    verts.append(np.array([[0.0, 1.0, 0.0]]))
    vertices = np.vstack(verts)

    def ring_index(k: int, s: int) -> int:
        return 1 + k * segments + s % segments

    faces = []
    for s in range(segments):
        faces.append([0, ring_index(0, s), ring_index(0, s + 1)])
    for k in range(rings - 1):
        for s in range(segments):
            a, b = ring_index(k, s), ring_index(k, s + 1)
            c, d = ring_index(k + 1, s), ring_index(k + 1, s + 1)
            faces.append([a, c, b])
            faces.append([b, c, d])
    top = len(vertices) - 1
    for s in range(segments):
        faces.append([top, ring_index(rings - 1, s + 1), ring_index(rings - 1, s)])
    faces = np.array(faces, dtype=np.int64)
    if mesh_volume(TriangleMesh(vertices, faces)) < 0:
        faces = faces[:, ::-1].copy()

    ty = vertices[:, 1]
    taper = 1.0 - _smoothstep((ty - _TAPER_LO) / (_TAPER_HI - _TAPER_LO))
    leg_field = 1.0 - _smoothstep((ty - 0.45) / 0.10)
    tx = vertices[:, 0]
    head_volume = _x_volume(tx * (1.0 - taper), vertices, faces)
    leg_volume = _x_volume(tx * leg_field, vertices, faces)
    beta = head_volume / leg_volume
    tpl = _Template(vertices=vertices, faces=faces, taper=taper,
                    leg_field=leg_field, beta=beta,
                    face_indices=np.nonzero(ty > FACE_Y_THRESHOLD)[0])
    _template_cache[key] = tpl
    return tpl


def _subject_positions(tpl: _Template, anthro: AnthroVector) -> np.ndarray:
    """Vertex positions for one subject; affine in every measurement."""
    tx, ty, tz = tpl.vertices.T
    x_scale = (tpl.taper * _WEIGHT_SCALE * anthro.weight
               + (1.0 - tpl.taper) - tpl.beta * tpl.leg_field)
    x = tx * x_scale + _INSEAM_SHEAR * anthro.inseam * ty
    y = ty * anthro.height
    z = tz * (_DEPTH_BASE + _DEPTH_SPAN * anthro.armspan)
    return np.stack([x, y, z], axis=1)


def sample_anthro(rng: np.random.Generator) -> AnthroVector:
    """Body-like correlated measurements (taller subjects have longer spans)."""
    w = float(rng.uniform(55.0, 95.0))
    h = 1.45 + 0.004 * w + float(rng.uniform(-0.03, 0.03))
    a = 0.20 + 0.90 * h + float(rng.uniform(-0.06, 0.06))
    i = 0.45 * h + float(rng.uniform(-0.04, 0.04))
    return AnthroVector(weight=w, height=h, armspan=a, inseam=i)


def generate_synthetic_corpus(subject_count: int, seed: int, rings: int = 48,
                              segments: int = 48, noise: float = 0.0) -> Corpus:
    """Procedural registered corpus with known measurement-to-shape ground truth.

    Deterministic per seed. With noise=0 the corpus is an exact affine function
    of the sampled measurements and per-subject volume is exactly proportional
    to weight; a positive noise adds seeded Gaussian jitter to every vertex.
    """
    if subject_count < 5:
        raise ModelError("need at least 5 subjects")
    tpl = _template(rings, segments)
    face_region = VertexRegion(tpl.face_indices, len(tpl.vertices))
    if len(face_region) == 0 or len(face_region) >= 0.2 * len(tpl.vertices):
        raise ModelError("face region size out of contract")
    rng = np.random.default_rng(seed)
    meshes, anthro = [], []
    for _ in range(subject_count):
        a = sample_anthro(rng)
        pos = _subject_positions(tpl, a)
        if noise > 0:
            pos = pos + rng.normal(0.0, noise, pos.shape)
        meshes.append(TriangleMesh(pos, faces=tpl.faces))
        anthro.append(a)
    return Corpus(meshes, anthro, face_region)


def synthetic_subject(anthro: AnthroVector, rings: int = 48,
                      segments: int = 48) -> tuple[TriangleMesh, VertexRegion]:
    """Ground-truth mesh of one subject from the generator's affine family."""
    tpl = _template(rings, segments)
    face_region = VertexRegion(tpl.face_indices, len(tpl.vertices))
    return TriangleMesh(_subject_positions(tpl, anthro), tpl.faces), face_region


# ---------------------------------------------------------------------------
# model file format (.bwmm)
#
# 64-byte header: magic "BWMM", u32 version, u32 N, V, k, M, F, base-anthro flag,
# zero padding. Then little-endian float64 arrays, row-major: mean (3N), face
# region indices (N-V), basis P (3V*k), coefficient map C (5*k), optional base
# anthro (4), then the face list as u32 (3F).

_HEADER = struct.Struct("<4sIIIIIII32x")
assert _HEADER.size == 64


def save_model(model: ShapeModel, path) -> None:
    n = model.vertex_count
    v = n - len(model.face_region)
    k = model.component_count
    f = len(model.faces)
    has_base = 1 if model.base_anthro is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, n, v, k,
                              model.train_count, f, has_base))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.face_region.indices, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.basis, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.coeff_map, dtype="<f8").tobytes())
        if has_base:
            fh.write(np.ascontiguousarray(model.base_anthro.as_array(), dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.faces, dtype="<u4").tobytes())


def load_model(path) -> ShapeModel:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ModelError(f"{path}: truncated model file")
        magic, version, n, v, k, m, f, has_base = _HEADER.unpack(raw)
        if magic != MODEL_MAGIC:
            raise ModelError(f"{path}: not a model file (bad magic)")
        if version != MODEL_VERSION:
            raise ModelError(f"{path}: unsupported model version {version}")

        def read_f8(count: int) -> np.ndarray:
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ModelError(f"{path}: truncated model file")
            return np.frombuffer(buf, dtype="<f8").copy()

        mean = read_f8(3 * n).reshape(n, 3)
        region = read_f8(n - v).astype(np.int64)
        basis = read_f8(3 * v * k).reshape(3 * v, k)
        coeff = read_f8(5 * k).reshape(5, k)
        base = None
        if has_base:
            b = read_f8(4)
            base = AnthroVector(*b)
        buf = fh.read(4 * 3 * f)
        if len(buf) != 4 * 3 * f:
            raise ModelError(f"{path}: truncated model file")
        faces = np.frombuffer(buf, dtype="<u4").astype(np.int64).reshape(f, 3)
    return ShapeModel(faces=faces, mean=mean,
                      face_region=VertexRegion(region, n), basis=basis,
                      coeff_map=coeff, train_count=m, base_anthro=base)
