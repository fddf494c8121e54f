"""Rigid spatial calibration: optimal rotation/translation between corresponding
point sets, plus scalar ground-height calibration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CONTROLLER_RADIUS = 0.03  # meters


class AlignmentError(Exception):
    """Degenerate point configuration."""


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid motion p -> R p + t."""

    rotation: np.ndarray     # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise AlignmentError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise AlignmentError("rotation is not proper (det != +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)


def kabsch_align(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Least-squares rigid transform mapping src onto dst.

    Minimizes sum ||R src_i + t - dst_i||^2 over proper rotations; reflections
    are never returned, even when the best orthogonal map would be one.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != dst.shape:
        raise AlignmentError(f"point sets must both be (n, 3), got {src.shape} and {dst.shape}")
    n = len(src)
    if n < 3:
        raise AlignmentError("need at least 3 point correspondences")

    src_c = src - src.mean(axis=0)
    dst_c = dst - dst.mean(axis=0)

    # collinear sources leave the rotation about the line undetermined
    s = np.linalg.svd(src_c, compute_uv=False)
    if s[1] <= 1e-12 * max(s[0], 1.0):
        raise AlignmentError("source points are collinear")

    cov = dst_c.T @ src_c
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(u @ vt))
    rot = u @ np.diag([1.0, 1.0, d]) @ vt
    t = dst.mean(axis=0) - rot @ src.mean(axis=0)
    return RigidTransform(rot, t)


def alignment_rmsd(transform: RigidTransform, src: np.ndarray, dst: np.ndarray) -> float:
    res = transform.apply(src) - np.asarray(dst)
    return float(np.sqrt((res ** 2).sum(axis=1).mean()))


def ground_offset(contact_height: float,
                  controller_radius: float = DEFAULT_CONTROLLER_RADIUS) -> float:
    """Offset mapping a measured controller-on-ground height to virtual ground 0."""
    if not np.isfinite(contact_height):
        raise ValueError("contact height must be finite")
    return contact_height - controller_radius
