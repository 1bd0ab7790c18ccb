"""Scene discovery for flat image folders and NeRF-Synthetic style layouts."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from patchpoison.core.errors import DatasetError, InvalidInputError, InvalidParameterError, parse_model
from patchpoison.core.geometry import CameraModel, nearest_rotation
from patchpoison.core.image import ImageBuffer
from patchpoison.dataset.codecs import image_size, is_image_path, load_image
from patchpoison.schemas.patch import BackgroundPolicy
from patchpoison.schemas.transforms import TransformsFile

logger = logging.getLogger(__name__)

TRANSFORMS_GLOB = "transforms*.json"


@dataclass(slots=True)
class SceneDataset:
    name: str
    root: Path
    relative_paths: list[str]
    background: BackgroundPolicy
    cameras: list[CameraModel] | None = None
    metadata_source: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.relative_paths)

    @property
    def paths(self) -> list[Path]:
        return [self.root / rel for rel in self.relative_paths]

    def read(self, index: int) -> ImageBuffer:
        return load_image(self.root / self.relative_paths[index], self.background)


def discover_images(root: Path) -> list[str]:
    """Image files below ``root`` as relative POSIX paths in lexicographic order."""
    found = [p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file() and is_image_path(p)]
    return sorted(found)


def camera_from_frame(matrix: list[list[float]], camera_angle_x: float, width: int, height: int) -> CameraModel:
    """Blender camera-to-world -> ``x_cam = R X + t`` with x right, y down, z forward."""
    c2w = np.asarray(matrix, dtype=np.float64)
    c2w[:3, 1:3] *= -1.0
    rotation = nearest_rotation(c2w[:3, :3]).T
    focal = 0.5 * width / math.tan(0.5 * camera_angle_x)
    intrinsics = np.array([[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]])
    return CameraModel(intrinsics, rotation, -rotation @ c2w[:3, 3])


def _frame_key(file_path: str, base: Path, root: Path) -> str | None:
    candidate = (base / file_path).resolve()
    if not candidate.suffix:
        candidate = candidate.with_suffix(".png")
    try:
        return candidate.relative_to(root.resolve()).as_posix()
    except ValueError:
        return None


Frames = dict[str, tuple[list[list[float]], float]]


def read_frames(transforms_paths: list[Path], root: Path) -> tuple[Frames | None, int, list[str]]:
    """Frame poses keyed by image path relative to ``root``, the frame total and warnings.

    Frame paths resolve against each metadata file's folder; a malformed
    file yields ``None``.
    """
    by_image: Frames = {}
    frame_total = 0
    for path in transforms_paths:
        try:
            parsed = parse_model(TransformsFile, json.loads(path.read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError, InvalidParameterError) as exc:
            return None, 0, [f"ignored camera metadata: {path.name} is malformed ({exc})"]
        for frame in parsed.frames:
            frame_total += 1
            key = _frame_key(frame.file_path, path.parent, root)
            if key is not None:
                by_image[key] = (frame.transform_matrix, parsed.camera_angle_x)
    return by_image, frame_total, []


def frame_images(transforms_paths: list[Path], root: Path) -> list[str]:
    """Existing images the frames point at, in lexicographic order."""
    by_image, _, _ = read_frames(transforms_paths, root)
    if not by_image:
        return []
    return sorted(rel for rel in by_image if (root / rel).is_file() and is_image_path(root / rel))


def read_cameras(
    transforms_paths: list[Path], root: Path, relative_paths: list[str], image_root: Path | None = None
) -> tuple[list[CameraModel] | None, list[str]]:
    """Cameras aligned with ``relative_paths``, or ``None`` plus warnings when anything disagrees.

    Image sizes are read below ``image_root`` (``root`` when omitted).
    """
    by_image, frame_total, warnings = read_frames(transforms_paths, root)
    if by_image is None:
        return None, warnings

    if frame_total != len(relative_paths):
        warnings.append(
            f"ignored camera metadata: {frame_total} frames for {len(relative_paths)} images"
        )
        return None, warnings
    missing = [rel for rel in relative_paths if rel not in by_image]
    if missing:
        warnings.append(f"ignored camera metadata: no frame for {missing[0]}")
        return None, warnings

    cameras = []
    try:
        for rel in relative_paths:
            width, height = image_size((image_root or root) / rel)
            matrix, angle = by_image[rel]
            cameras.append(camera_from_frame(matrix, angle, width, height))
    except (InvalidInputError, InvalidParameterError) as exc:
        warnings.append(f"ignored camera metadata: {exc}")
        return None, warnings
    return cameras, warnings


def load_scene(directory: Path | str, background: BackgroundPolicy | str | None = None) -> SceneDataset:
    """Discover images and optional camera metadata below ``directory``.

    With ``transforms*.json`` present the views are the images its frames
    reference, so depth and normal maps next to them are skipped; without
    usable frames every image below ``directory`` is a view. Without an
    explicit policy, scenes carrying metadata are composited onto black and
    flat folders keep their alpha plane.
    """
    root = Path(directory)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    relative_paths = discover_images(root)
    if not relative_paths:
        raise DatasetError(f"no images found under {root}")

    transforms = sorted(root.glob(TRANSFORMS_GLOB))
    if background is None:
        policy = BackgroundPolicy.BLACK if transforms else BackgroundPolicy.KEEP
    else:
        policy = BackgroundPolicy(background)

    cameras = None
    warnings: list[str] = []
    if transforms:
        referenced = frame_images(transforms, root)
        if referenced:
            skipped = len(relative_paths) - len(referenced)
            if skipped:
                logger.debug("%s: %s images not referenced by any frame", root, skipped)
            relative_paths = referenced
        cameras, warnings = read_cameras(transforms, root, relative_paths)
        for warning in warnings:
            logger.warning("%s: %s", root, warning)
    if not any(_decodable(root / rel) for rel in relative_paths):
        raise DatasetError(f"no decodable images under {root}")

    logger.info("Loaded scene %s with %s images (background=%s)", root.name, len(relative_paths), policy.value)
    return SceneDataset(
        name=root.name,
        root=root,
        relative_paths=relative_paths,
        background=policy,
        cameras=cameras,
        metadata_source=[p.name for p in transforms],
        warnings=warnings,
    )


def _decodable(path: Path) -> bool:
    try:
        image_size(path)
    except InvalidInputError:
        return False
    return True
