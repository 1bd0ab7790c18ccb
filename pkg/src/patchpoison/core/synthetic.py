"""Synthetic two-view scenes with known geometry.

``synth_two_view`` produces point correspondences for the estimators;
``render_two_view`` produces an image pair of a textured room corner, traced
from both cameras, so the whole detect/match/estimate chain can be checked
against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial.transform import Rotation

from patchpoison.core.errors import InvalidParameterError
from patchpoison.core.geometry import (
    CameraModel,
    GroundTruth,
    fundamental_from_pose,
    relative_pose,
)
from patchpoison.core.image import ImageBuffer, round_half_up
from patchpoison.schemas.manifest import Region

MAX_SAMPLING_ROUNDS = 200

# rendered room: camera B converges on the crease at this depth
CONVERGENCE_DEPTH = 6.0
WALL_HALF_EXTENT = 5.0
WALL_CELLS = 250
TEXTURE_SIGMA_CELLS = 2.0
SHADE_MEAN = 128.0
SHADE_GAIN = 70.0
RAMP_PX = 3.0
# how far B's view of the empty corner may drift toward the origin
RESERVED_SLACK = 56


def intrinsics(focal: float, width: int, height: int) -> np.ndarray:
    return np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, slots=True, eq=False)
class SyntheticTwoView:
    camera_a: CameraModel
    camera_b: CameraModel
    points: np.ndarray
    pts_a: np.ndarray
    pts_b: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    fundamental: np.ndarray | None
    width: int
    height: int
    degenerate: bool = False
    region: Region | None = None
    spurious_a: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    spurious_b: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def truth(self) -> GroundTruth:
        return GroundTruth(
            intrinsics_a=self.camera_a.intrinsics,
            intrinsics_b=self.camera_b.intrinsics,
            rotation=self.rotation,
            translation=self.translation,
            fundamental=self.fundamental,
        )


def _second_camera(
    rng: np.random.Generator, k: np.ndarray, baseline: float, min_deg: float, max_deg: float
) -> CameraModel:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.uniform(min_deg, max_deg))
    rotation = Rotation.from_rotvec(axis * angle).as_matrix()
    direction = np.array([1.0, rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)])
    direction *= rng.choice([-1.0, 1.0]) / np.linalg.norm(direction)
    centre = baseline * direction
    return CameraModel(k, rotation, -rotation @ centre)


def synth_two_view(
    n_points: int,
    baseline: float = 1.0,
    noise_px: float = 0.0,
    seed: int = 0,
    *,
    width: int = 640,
    height: int = 480,
    focal: float = 500.0,
    min_rotation_deg: float = 3.0,
    max_rotation_deg: float = 12.0,
    margin_px: float = 10.0,
) -> SyntheticTwoView:
    """Seeded points in front of two cameras with a known relative pose.

    Camera A sits at the origin looking down +z; camera B is rotated by a
    random angle and displaced by ``baseline`` mostly sideways. Points are
    rejection-sampled so both projections stay ``margin_px`` inside the image.
    """
    if n_points < 8:
        raise InvalidParameterError(f"n_points must be >= 8, got {n_points}")
    if baseline < 0 or noise_px < 0:
        raise InvalidParameterError("baseline and noise must be >= 0")
    rng = np.random.default_rng(seed)
    k = intrinsics(focal, width, height)
    camera_a = CameraModel(k, np.eye(3), np.zeros(3))
    camera_b = _second_camera(rng, k, baseline, min_rotation_deg, max_rotation_deg)

    accepted: list[np.ndarray] = []
    count = 0
    for _ in range(MAX_SAMPLING_ROUNDS):
        batch = np.column_stack(
            [rng.uniform(-3.0, 3.0, 4 * n_points), rng.uniform(-2.5, 2.5, 4 * n_points), rng.uniform(4.0, 8.0, 4 * n_points)]
        )
        ok = np.ones(len(batch), dtype=bool)
        for camera in (camera_a, camera_b):
            depth = camera.to_camera(batch)[:, 2]
            proj = camera.project(batch)
            ok &= (depth > 0) & (proj[:, 0] >= margin_px) & (proj[:, 0] <= width - 1 - margin_px)
            ok &= (proj[:, 1] >= margin_px) & (proj[:, 1] <= height - 1 - margin_px)
        accepted.append(batch[ok])
        count += int(ok.sum())
        if count >= n_points:
            break
    else:
        raise InvalidParameterError(f"could not place {n_points} points visible from both cameras")
    points = np.vstack(accepted)[:n_points]

    pts_a = camera_a.project(points)
    pts_b = camera_b.project(points)
    if noise_px > 0:
        pts_a = np.clip(pts_a + rng.normal(0.0, noise_px, pts_a.shape), 0, [width - 1, height - 1])
        pts_b = np.clip(pts_b + rng.normal(0.0, noise_px, pts_b.shape), 0, [width - 1, height - 1])

    pose = relative_pose(camera_a, camera_b)
    degenerate = bool(np.linalg.norm(pose.translation) < 1e-12)
    fundamental = None if degenerate else fundamental_from_pose(k, k, pose.rotation, pose.translation)
    return SyntheticTwoView(
        camera_a=camera_a,
        camera_b=camera_b,
        points=points,
        pts_a=pts_a,
        pts_b=pts_b,
        rotation=pose.rotation,
        translation=pose.translation,
        fundamental=fundamental,
        width=width,
        height=height,
        degenerate=degenerate,
    )


def spurious_count(n_genuine: int, contamination: float) -> int:
    """Number of spurious pairs making up ``contamination`` of the final match list."""
    if not 0.0 <= contamination < 1.0:
        raise InvalidParameterError(f"contamination must lie in [0, 1), got {contamination}")
    return int(round(contamination * n_genuine / (1.0 - contamination)))


def inject_spurious_matches(
    scene: SyntheticTwoView, region: Region, contamination: float, seed: int = 0
) -> SyntheticTwoView:
    """Append identical-coordinate pairs drawn uniformly inside ``region``."""
    count = spurious_count(len(scene.pts_a), contamination)
    rng = np.random.default_rng(seed)
    spurious = np.column_stack(
        [rng.uniform(region.x, region.x + region.w, count), rng.uniform(region.y, region.y + region.h, count)]
    ).reshape(-1, 2)
    return SyntheticTwoView(
        camera_a=scene.camera_a,
        camera_b=scene.camera_b,
        points=scene.points,
        pts_a=np.vstack([scene.pts_a, spurious]),
        pts_b=np.vstack([scene.pts_b, spurious]),
        rotation=scene.rotation,
        translation=scene.translation,
        fundamental=scene.fundamental,
        width=scene.width,
        height=scene.height,
        degenerate=scene.degenerate,
        region=region,
        spurious_a=spurious,
        spurious_b=spurious.copy(),
    )


@dataclass(frozen=True, slots=True, eq=False)
class Wall:
    """Textured plane ``normal . X = offset`` in world (camera A) coordinates."""

    normal: np.ndarray
    origin: np.ndarray
    texture: np.ndarray

    @property
    def offset(self) -> float:
        return float(self.normal @ self.origin)

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        ref = np.array([0.0, 1.0, 0.0]) if abs(self.normal[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        first = np.cross(self.normal, ref)
        first /= np.linalg.norm(first)
        return first, np.cross(self.normal, first)

    def shade(self, points: np.ndarray) -> np.ndarray:
        first, second = self.basis()
        rel = points - self.origin
        scale = self.texture.shape[0] / (2.0 * WALL_HALF_EXTENT)
        cols = (rel @ first + WALL_HALF_EXTENT) * scale
        rows = (rel @ second + WALL_HALF_EXTENT) * scale
        return ndimage.map_coordinates(self.texture, [rows, cols], order=3, mode="mirror")


@dataclass(frozen=True, slots=True, eq=False)
class RenderedPair:
    image_a: ImageBuffer
    image_b: ImageBuffer
    camera_a: CameraModel
    camera_b: CameraModel
    rotation: np.ndarray
    translation: np.ndarray
    fundamental: np.ndarray
    reserved: Region

    def truth(self) -> GroundTruth:
        return GroundTruth(
            intrinsics_a=self.camera_a.intrinsics,
            intrinsics_b=self.camera_b.intrinsics,
            rotation=self.rotation,
            translation=self.translation,
            fundamental=self.fundamental,
        )


def _unit(vector) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64)
    return vector / np.linalg.norm(vector)


def _wall_texture(rng: np.random.Generator) -> np.ndarray:
    noise = ndimage.gaussian_filter(rng.standard_normal((WALL_CELLS, WALL_CELLS)), TEXTURE_SIGMA_CELLS, mode="wrap")
    return (noise - noise.mean()) / (noise.std() + 1e-12)


def _room(rng: np.random.Generator) -> list[Wall]:
    """Two walls meeting in a vertical crease ahead of the cameras plus a sloping floor.

    Both cameras sit inside the convex room, so every wall point either view
    sees is unoccluded in the other.
    """
    crease = np.array([rng.uniform(-0.3, 0.3), 0.0, rng.uniform(6.6, 7.2)])
    left = math.radians(rng.uniform(35.0, 45.0))
    right = math.radians(rng.uniform(25.0, 35.0))
    floor = np.array([0.0, rng.uniform(1.3, 1.6), CONVERGENCE_DEPTH])
    return [
        Wall(_unit([-math.sin(left), 0.0, math.cos(left)]), crease, _wall_texture(rng)),
        Wall(_unit([math.sin(right), 0.0, math.cos(right)]), crease, _wall_texture(rng)),
        Wall(_unit([0.0, 1.0, rng.uniform(0.2, 0.3)]), floor, _wall_texture(rng)),
    ]


def _trace(walls: list[Wall], centre: np.ndarray, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First wall hit along each ray; rays that leave the room get index -1."""
    depth = np.full(len(directions), np.inf)
    index = np.full(len(directions), -1)
    for i, wall in enumerate(walls):
        facing = directions @ wall.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            reach = np.where(facing > 1e-9, (wall.offset - wall.normal @ centre) / facing, np.inf)
        nearer = (reach > 0) & (reach < depth)
        depth[nearer] = reach[nearer]
        index[nearer] = i
    depth[index < 0] = 0.0
    return centre + depth[:, None] * directions, index


def _ramp(distance: np.ndarray) -> np.ndarray:
    t = np.clip(distance / RAMP_PX, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _coverage(pixels_a: np.ndarray, width: int, height: int, corner_px: int) -> np.ndarray:
    """Texture weight of a wall point from its position in view A.

    Points projecting into A's top-left ``corner_px`` square or outside the
    inset box are empty, so the black areas follow the scene in view B.
    """
    u, v = pixels_a[:, 0], pixels_a[:, 1]
    inside = (
        _ramp(u - width // 16)
        * _ramp(width - width // 6 - u)
        * _ramp(v - height // 6)
        * _ramp(height - height // 6 - v)
    )
    return inside * (1.0 - (1.0 - _ramp(u - corner_px)) * (1.0 - _ramp(v - corner_px)))


def _render(
    walls: list[Wall], camera: CameraModel, camera_a: CameraModel, width: int, height: int, corner_px: int
) -> ImageBuffer:
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    pixels = np.stack([cols.ravel(), rows.ravel(), np.ones(cols.size)], axis=1)
    directions = pixels @ np.linalg.inv(camera.intrinsics).T @ camera.rotation
    points, index = _trace(walls, camera.center, directions)

    canvas = np.zeros(len(points))
    for i, wall in enumerate(walls):
        hit = index == i
        canvas[hit] = np.clip(SHADE_MEAN + SHADE_GAIN * wall.shade(points[hit]), 8.0, 248.0)
    canvas *= _coverage(camera_a.project(points), width, height, corner_px)
    canvas[index < 0] = 0.0
    grey = round_half_up(canvas.reshape(height, width))
    return ImageBuffer(np.repeat(grey[:, :, None], 3, axis=2))


def _look_at(centre: np.ndarray, target: np.ndarray) -> np.ndarray:
    forward = _unit(target - centre)
    right = _unit(np.cross([0.0, 1.0, 0.0], forward))
    return np.vstack([right, np.cross(forward, right), forward])


def render_two_view(
    seed: int = 0,
    *,
    width: int = 640,
    height: int = 480,
    focal: float = 560.0,
    baseline: float = 0.7,
    tilt_deg: float = 2.5,
    corner_px: int = 184,
) -> RenderedPair:
    """Render a grey RGB pair looking into a textured room corner.

    Camera B moves left and turns back toward the crease, then tilts by
    ``tilt_deg`` mostly about its x axis so that identical image coordinates
    disagree with the true epipolar geometry. A's top-left ``corner_px``
    square is empty; ``reserved`` is the part of it that stays black in both
    views, where patches land at identical coordinates.
    """
    if corner_px <= RESERVED_SLACK:
        raise InvalidParameterError(f"corner_px must exceed {RESERVED_SLACK}, got {corner_px}")
    rng = np.random.default_rng(seed)
    k = intrinsics(focal, width, height)
    walls = _room(rng)

    centre = baseline * _unit([-1.0, rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)])
    axis = rng.choice([-1.0, 1.0]) * _unit([1.0, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)])
    tilt = Rotation.from_rotvec(axis * math.radians(tilt_deg)).as_matrix()
    rotation = tilt @ _look_at(centre, np.array([0.0, 0.0, CONVERGENCE_DEPTH]))
    camera_a = CameraModel(k, np.eye(3), np.zeros(3))
    camera_b = CameraModel(k, rotation, -rotation @ centre)
    pose = relative_pose(camera_a, camera_b)

    side = corner_px - RESERVED_SLACK
    return RenderedPair(
        image_a=_render(walls, camera_a, camera_a, width, height, corner_px),
        image_b=_render(walls, camera_b, camera_a, width, height, corner_px),
        camera_a=camera_a,
        camera_b=camera_b,
        rotation=pose.rotation,
        translation=pose.translation,
        fundamental=fundamental_from_pose(k, k, pose.rotation, pose.translation),
        reserved=Region(x=0, y=0, w=side, h=side),
    )
