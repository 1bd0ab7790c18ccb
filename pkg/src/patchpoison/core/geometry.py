"""Two-view epipolar geometry: normalized 8-point, Sampson residuals, RANSAC and pose recovery.

Conventions: a camera maps world points with ``x_cam = R X + t``; pixel
coordinates are ``(x, y)`` with the origin at the top-left pixel centre;
every fundamental matrix satisfies ``x_b^T F x_a = 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from patchpoison.core.errors import (
    AmbiguousPoseError,
    DegenerateConfigurationError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
)

logger = logging.getLogger(__name__)

MIN_MATCHES = 8
DEGENERACY_TOL = 1e-9
MAX_REFITS = 10


@dataclass(frozen=True, slots=True, eq=False)
class CameraModel:
    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.intrinsics, dtype=np.float64)
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if k.shape != (3, 3) or r.shape != (3, 3):
            raise InvalidParameterError("intrinsics and rotation must be 3x3")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise InvalidParameterError("focal lengths must be > 0")
        if k[0, 1] != 0 or k[1, 0] != 0 or k[2, 0] != 0 or k[2, 1] != 0 or k[2, 2] != 1:
            raise InvalidParameterError("intrinsics must be upper-triangular with zero skew")
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-9, rtol=0) or np.linalg.det(r) <= 0:
            raise InvalidParameterError("rotation must be orthonormal with det +1")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def project(self, points: np.ndarray) -> np.ndarray:
        cam = self.to_camera(points) @ self.intrinsics.T
        return cam[:, :2] / cam[:, 2:3]


@dataclass(frozen=True, slots=True, eq=False)
class RelativePose:
    """Motion from view A to view B: ``x_b = R x_a + t`` with ``|t| = 1`` when estimated."""

    rotation: np.ndarray
    translation: np.ndarray
    in_front: int = 0


@dataclass(frozen=True, slots=True, eq=False)
class GroundTruth:
    intrinsics_a: np.ndarray
    intrinsics_b: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    fundamental: np.ndarray | None


@dataclass(frozen=True, slots=True, eq=False)
class FundamentalEstimate:
    F: np.ndarray | None
    inliers: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    residual_median: float = math.nan
    residual_max: float = math.nan
    total: int = 0
    success: bool = True
    message: str | None = None
    iterations: int = 0

    @property
    def inlier_fraction(self) -> float:
        return len(self.inliers) / self.total if self.total else 0.0


def _points(values: np.ndarray) -> np.ndarray:
    pts = np.asarray(values, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidInputError(f"expected an (n, 2) point array, got shape {pts.shape}")
    return pts


def _homogeneous(points: np.ndarray) -> np.ndarray:
    return np.hstack([points, np.ones((points.shape[0], 1))])


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = np.asarray(v, dtype=np.float64).reshape(3)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def canonical_fundamental(F: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm, sign fixed so the largest-magnitude entry is positive."""
    F = np.asarray(F, dtype=np.float64)
    norm = np.linalg.norm(F)
    if norm == 0:
        raise DegenerateConfigurationError("fundamental matrix is zero")
    F = F / norm
    if F.flat[np.argmax(np.abs(F))] < 0:
        F = -F
    return F


def _rank2(F: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(F)
    s[2] = 0.0
    return u @ np.diag(s) @ vt


def relative_pose(camera_a: CameraModel, camera_b: CameraModel) -> RelativePose:
    rotation = camera_b.rotation @ camera_a.rotation.T
    return RelativePose(rotation, camera_b.translation - rotation @ camera_a.translation)


def fundamental_from_pose(
    intrinsics_a: np.ndarray, intrinsics_b: np.ndarray, rotation: np.ndarray, translation: np.ndarray
) -> np.ndarray:
    essential = skew(translation) @ rotation
    F = np.linalg.inv(intrinsics_b).T @ essential @ np.linalg.inv(intrinsics_a)
    return canonical_fundamental(F)


def ground_truth(camera_a: CameraModel, camera_b: CameraModel) -> GroundTruth:
    pose = relative_pose(camera_a, camera_b)
    fundamental = None
    if np.linalg.norm(pose.translation) > 1e-12:
        fundamental = fundamental_from_pose(camera_a.intrinsics, camera_b.intrinsics, pose.rotation, pose.translation)
    return GroundTruth(camera_a.intrinsics, camera_b.intrinsics, pose.rotation, pose.translation, fundamental)


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Closest proper rotation in the Frobenius sense."""
    u, _, vt = np.linalg.svd(np.asarray(matrix, dtype=np.float64))
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] *= -1
    return u @ vt


def normalize_points(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity moving the centroid to the origin with mean radius sqrt(2)."""
    pts = _points(points)
    if pts.shape[0] == 0:
        raise InsufficientDataError("no points to normalize")
    centroid = pts.mean(axis=0)
    mean_radius = float(np.mean(np.linalg.norm(pts - centroid, axis=1)))
    if mean_radius <= 0:
        raise DegenerateConfigurationError("all points coincide")
    scale = math.sqrt(2.0) / mean_radius
    transform = np.array(
        [[scale, 0.0, -scale * centroid[0]], [0.0, scale, -scale * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return (pts - centroid) * scale, transform


def sampson_distance(F: np.ndarray, x_a: np.ndarray, x_b: np.ndarray) -> float | np.ndarray:
    """First-order epipolar distance in pixels; vectorised over ``(n, 2)`` inputs."""
    single = np.ndim(x_a) == 1
    pa = _homogeneous(np.atleast_2d(np.asarray(x_a, dtype=np.float64)))
    pb = _homogeneous(np.atleast_2d(np.asarray(x_b, dtype=np.float64)))
    F = np.asarray(F, dtype=np.float64)
    fx = pa @ F.T
    ftx = pb @ F
    algebraic = np.sum(pb * fx, axis=1)
    denom = fx[:, 0] ** 2 + fx[:, 1] ** 2 + ftx[:, 0] ** 2 + ftx[:, 1] ** 2
    squared = np.zeros_like(algebraic)
    np.divide(algebraic * algebraic, denom, out=squared, where=denom > 0)
    squared[(denom <= 0) & (algebraic != 0)] = np.inf
    distance = np.sqrt(squared)
    return float(distance[0]) if single else distance


def _solve_eight_point(pts_a: np.ndarray, pts_b: np.ndarray) -> np.ndarray:
    na, ta = normalize_points(pts_a)
    nb, tb = normalize_points(pts_b)
    ha = _homogeneous(na)
    hb = _homogeneous(nb)
    design = (hb[:, :, None] * ha[:, None, :]).reshape(-1, 9)
    _, s, vt = np.linalg.svd(design, full_matrices=True)
    # a second vanishing singular value means the null space is not unique
    if s[7] <= DEGENERACY_TOL * s[0]:
        raise DegenerateConfigurationError("design matrix has a multi-dimensional null space")
    F = _rank2(vt[-1].reshape(3, 3))
    F = tb.T @ F @ ta
    return canonical_fundamental(_rank2(F))


def eight_point(pts_a: np.ndarray, pts_b: np.ndarray) -> FundamentalEstimate:
    """Normalized 8-point least squares over every pair, rank 2 enforced."""
    a = _points(pts_a)
    b = _points(pts_b)
    if a.shape[0] != b.shape[0]:
        raise InvalidInputError(f"point count mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < MIN_MATCHES:
        raise InsufficientDataError(f"8-point needs >= {MIN_MATCHES} pairs, got {a.shape[0]}")
    F = _solve_eight_point(a, b)
    residuals = np.asarray(sampson_distance(F, a, b))
    return FundamentalEstimate(
        F=F,
        inliers=np.arange(a.shape[0]),
        residual_median=float(np.median(residuals)),
        residual_max=float(np.max(residuals)),
        total=a.shape[0],
    )


def required_iterations(inlier_ratio: float, confidence: float, sample_size: int = MIN_MATCHES) -> float:
    """Draws needed to hit an all-inlier sample with probability ``confidence``."""
    p = inlier_ratio**sample_size
    if p >= 1.0:
        return 1
    if p <= 0.0:
        return math.inf
    return math.ceil(math.log(1.0 - confidence) / math.log(1.0 - p))


def ransac_fundamental(
    pts_a: np.ndarray,
    pts_b: np.ndarray,
    threshold_px: float = 1.0,
    max_iters: int = 2000,
    seed: int = 0,
    confidence: float = 0.999,
) -> FundamentalEstimate:
    """8-sample RANSAC with Sampson inlier test, adaptive stop and inlier re-fit.

    A model with fewer than eight inliers yields an unsuccessful estimate
    rather than an exception.
    """
    a = _points(pts_a)
    b = _points(pts_b)
    if a.shape[0] != b.shape[0]:
        raise InvalidInputError(f"point count mismatch: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if n < MIN_MATCHES:
        raise InsufficientDataError(f"RANSAC needs >= {MIN_MATCHES} matches, got {n}")
    if threshold_px <= 0 or max_iters < 1 or not 0 < confidence < 1:
        raise InvalidParameterError("threshold must be > 0, max_iters >= 1 and confidence in (0, 1)")

    rng = np.random.default_rng(seed)
    best_F: np.ndarray | None = None
    best_inliers = np.zeros(0, dtype=np.int64)
    needed: float = max_iters
    iterations = 0
    while iterations < min(max_iters, needed):
        iterations += 1
        sample = rng.choice(n, MIN_MATCHES, replace=False)
        try:
            F = _solve_eight_point(a[sample], b[sample])
        except DegenerateConfigurationError:
            continue
        inliers = np.flatnonzero(np.asarray(sampson_distance(F, a, b)) <= threshold_px)
        if len(inliers) > len(best_inliers):
            best_F, best_inliers = F, inliers
            needed = required_iterations(len(inliers) / n, confidence)

    if best_F is None or len(best_inliers) < MIN_MATCHES:
        logger.debug("RANSAC found no model with %s inliers after %s draws", MIN_MATCHES, iterations)
        return FundamentalEstimate(
            F=None,
            total=n,
            success=False,
            message=f"no model with >= {MIN_MATCHES} inliers",
            iterations=iterations,
        )

    F, inliers = best_F, best_inliers
    for _ in range(MAX_REFITS):
        try:
            candidate = _solve_eight_point(a[inliers], b[inliers])
        except DegenerateConfigurationError:
            break
        refined = np.flatnonzero(np.asarray(sampson_distance(candidate, a, b)) <= threshold_px)
        if len(refined) < MIN_MATCHES:
            break
        converged = np.array_equal(refined, inliers)
        F, inliers = candidate, refined
        if converged:
            break

    residuals = np.asarray(sampson_distance(F, a[inliers], b[inliers]))
    return FundamentalEstimate(
        F=F,
        inliers=inliers,
        residual_median=float(np.median(residuals)),
        residual_max=float(np.max(residuals)),
        total=n,
        iterations=iterations,
    )


def triangulate(
    rotation: np.ndarray, translation: np.ndarray, rays_a: np.ndarray, rays_b: np.ndarray
) -> np.ndarray:
    """Linear triangulation with ``P_a = [I|0]`` and ``P_b = [R|t]`` on normalized image points."""
    proj_a = np.hstack([np.eye(3), np.zeros((3, 1))])
    proj_b = np.hstack([rotation, translation.reshape(3, 1)])
    rows = np.stack(
        [
            rays_a[:, 0:1] * proj_a[2] - proj_a[0],
            rays_a[:, 1:2] * proj_a[2] - proj_a[1],
            rays_b[:, 0:1] * proj_b[2] - proj_b[0],
            rays_b[:, 1:2] * proj_b[2] - proj_b[1],
        ],
        axis=1,
    )
    _, _, vt = np.linalg.svd(rows)
    return vt[:, -1, :]


def _in_front(rotation: np.ndarray, translation: np.ndarray, rays_a: np.ndarray, rays_b: np.ndarray) -> int:
    X = triangulate(rotation, translation, rays_a, rays_b)
    w = X[:, 3]
    finite = np.abs(w) > 1e-12
    if not np.any(finite):
        return 0
    pts = X[finite, :3] / w[finite, None]
    depth_a = pts[:, 2]
    depth_b = (pts @ rotation.T + translation)[:, 2]
    return int(np.count_nonzero((depth_a > 0) & (depth_b > 0)))


def recover_pose(
    F: np.ndarray,
    intrinsics_a: np.ndarray,
    pts_a: np.ndarray,
    pts_b: np.ndarray,
    intrinsics_b: np.ndarray | None = None,
) -> RelativePose:
    """Factor ``E = K_b^T F K_a`` and keep the candidate with most points in front of both views."""
    a = _points(pts_a)
    b = _points(pts_b)
    if a.shape[0] != b.shape[0] or a.shape[0] == 0:
        raise InvalidInputError("pose recovery needs matching, non-empty point sets")
    k_a = np.asarray(intrinsics_a, dtype=np.float64)
    k_b = k_a if intrinsics_b is None else np.asarray(intrinsics_b, dtype=np.float64)
    essential = k_b.T @ np.asarray(F, dtype=np.float64) @ k_a
    if not np.all(np.isfinite(essential)) or np.linalg.norm(essential) < 1e-12:
        raise DegenerateConfigurationError("essential matrix vanishes (no baseline)")

    u, _, vt = np.linalg.svd(essential)
    if np.linalg.det(u) < 0:
        u = -u
    if np.linalg.det(vt) < 0:
        vt = -vt
    w = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    r1 = u @ w @ vt
    r2 = u @ w.T @ vt
    t = u[:, 2]
    candidates = [(r1, t), (r1, -t), (r2, t), (r2, -t)]

    rays_a = _homogeneous(a) @ np.linalg.inv(k_a).T
    rays_b = _homogeneous(b) @ np.linalg.inv(k_b).T
    rays_a = rays_a[:, :2] / rays_a[:, 2:3]
    rays_b = rays_b[:, :2] / rays_b[:, 2:3]
    votes = [_in_front(r, tv, rays_a, rays_b) for r, tv in candidates]
    order = sorted(range(4), key=lambda i: -votes[i])
    if votes[order[0]] == 0:
        raise DegenerateConfigurationError("no pose candidate puts points in front of both cameras")
    if votes[order[0]] == votes[order[1]]:
        raise AmbiguousPoseError(f"cheirality tie between pose candidates ({votes[order[0]]} points)")
    rotation, translation = candidates[order[0]]
    return RelativePose(rotation, translation / np.linalg.norm(translation), votes[order[0]])


def rotation_error_deg(estimated: np.ndarray, truth: np.ndarray) -> float:
    """Angle of ``R_est R_gt^T`` in degrees."""
    delta = np.asarray(estimated) @ np.asarray(truth).T
    axis = np.array([delta[2, 1] - delta[1, 2], delta[0, 2] - delta[2, 0], delta[1, 0] - delta[0, 1]])
    return math.degrees(math.atan2(0.5 * float(np.linalg.norm(axis)), 0.5 * (float(np.trace(delta)) - 1.0)))


def translation_error_deg(estimated: np.ndarray, truth: np.ndarray) -> float:
    """Angle between translation directions in degrees."""
    a = np.asarray(estimated, dtype=np.float64).reshape(3)
    b = np.asarray(truth, dtype=np.float64).reshape(3)
    return math.degrees(math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b)))
