"""Scale-space keypoints, gradient-histogram descriptors and ratio-test matching.

Intensities are luma in ``[0, 1]``. Octave coordinates are pixel indices of
the octave raster; ``ScaleSpacePyramid.to_image`` maps them back to the
input image.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from patchpoison.core.config import FeatureConfig
from patchpoison.core.errors import InvalidInputError, InvalidParameterError
from patchpoison.core.image import ImageBuffer

logger = logging.getLogger(__name__)

ASSUMED_BLUR = 0.5
BORDER = 5
MAX_REFINE_STEPS = 5
ORI_BINS = 36
ORI_SIGMA_FACTOR = 1.5
ORI_RADIUS_FACTOR = 3.0
ORI_PEAK_RATIO = 0.8
DESC_WIDTH = 4
DESC_BINS = 8
DESC_SCALE_FACTOR = 3.0
DESC_CLAMP = 0.2
DESCRIPTOR_SIZE = DESC_WIDTH * DESC_WIDTH * DESC_BINS


@dataclass(frozen=True, slots=True, eq=False)
class ScaleSpacePyramid:
    gaussians: list[np.ndarray]
    dogs: list[np.ndarray]
    sigmas: np.ndarray
    scales_per_octave: int
    sigma0: float
    upsampled: bool
    image_shape: tuple[int, int]

    @property
    def octaves(self) -> int:
        return len(self.gaussians)

    def octave_shape(self, octave: int) -> tuple[int, int]:
        return self.gaussians[octave].shape[1:]

    def to_image(self, octave: int, x: float, y: float) -> tuple[float, float]:
        factor = 2.0**octave
        if not self.upsampled:
            return x * factor, y * factor
        # doubled raster is pixel-area aligned with the input
        return (x * factor + 0.5) / 2.0 - 0.5, (y * factor + 0.5) / 2.0 - 0.5

    def image_scale(self, octave: int, sigma: float) -> float:
        return sigma * 2.0**octave / (2.0 if self.upsampled else 1.0)


@dataclass(frozen=True, slots=True)
class Keypoint:
    x: float
    y: float
    scale: float
    orientation: float
    response: float
    octave: int
    layer: int
    octave_x: float
    octave_y: float
    octave_sigma: float


@dataclass(frozen=True, slots=True, eq=False)
class Descriptors:
    """Descriptor rows and the index of the keypoint each row belongs to."""

    vectors: np.ndarray
    keypoint_indices: np.ndarray

    def __len__(self) -> int:
        return int(self.vectors.shape[0])


@dataclass(frozen=True, slots=True)
class MatchPair:
    index_a: int
    index_b: int
    distance: float
    ratio: float


@dataclass(frozen=True, slots=True, eq=False)
class FeatureSet:
    """Described keypoints aligned row-for-row with their descriptors."""

    keypoints: list[Keypoint]
    descriptors: np.ndarray

    def points(self) -> np.ndarray:
        return np.array([[kp.x, kp.y] for kp in self.keypoints], dtype=np.float64).reshape(-1, 2)


def _as_gray(image: ImageBuffer | np.ndarray) -> np.ndarray:
    if isinstance(image, ImageBuffer):
        return image.to_gray()
    gray = np.asarray(image, dtype=np.float64)
    if gray.ndim != 2:
        raise InvalidInputError(f"expected a single-channel image, got shape {gray.shape}")
    return gray


def build_pyramid(
    image: ImageBuffer | np.ndarray,
    octaves: int = 4,
    scales_per_octave: int = 3,
    sigma0: float = 1.6,
    *,
    upsample: bool = False,
) -> ScaleSpacePyramid:
    """Gaussian and DoG stacks; each octave holds ``s + 3`` blur levels and ``s + 2`` DoG levels."""
    if octaves < 1:
        raise InvalidParameterError(f"octaves must be >= 1, got {octaves}")
    if scales_per_octave < 2:
        raise InvalidParameterError(f"scales_per_octave must be >= 2, got {scales_per_octave}")
    if sigma0 <= 0:
        raise InvalidParameterError(f"sigma0 must be > 0, got {sigma0}")
    gray = _as_gray(image)
    if min(gray.shape) < 2**octaves:
        raise InvalidInputError(f"image {gray.shape[1]}x{gray.shape[0]} too small for {octaves} octaves")

    current = ASSUMED_BLUR
    base = gray
    if upsample:
        base = ndimage.zoom(gray, 2, order=1, mode="nearest", grid_mode=True)
        current = 2.0 * ASSUMED_BLUR
    base = ndimage.gaussian_filter(base, math.sqrt(max(sigma0 * sigma0 - current * current, 0.01)), mode="mirror")

    s = scales_per_octave
    k = 2.0 ** (1.0 / s)
    sigmas = sigma0 * k ** np.arange(s + 3)
    increments = np.sqrt(sigmas[1:] ** 2 - sigmas[:-1] ** 2)

    gaussians: list[np.ndarray] = []
    dogs: list[np.ndarray] = []
    for octave in range(octaves):
        levels = [base]
        for inc in increments:
            levels.append(ndimage.gaussian_filter(levels[-1], inc, mode="mirror"))
        stack = np.stack(levels)
        gaussians.append(stack)
        dogs.append(stack[1:] - stack[:-1])
        base = stack[s][::2, ::2]
        if octave + 1 < octaves and min(base.shape) < 2:
            break
    return ScaleSpacePyramid(
        gaussians=gaussians,
        dogs=dogs,
        sigmas=sigmas,
        scales_per_octave=s,
        sigma0=sigma0,
        upsampled=upsample,
        image_shape=(int(gray.shape[0]), int(gray.shape[1])),
    )


def _refine(
    dog: np.ndarray, level: int, y: int, x: int, contrast_thresh: float, edge_ratio: float
) -> tuple[float, float, float, float] | None:
    """Quadratic fit around a DoG extremum; ``(x, y, level, response)`` in octave units."""
    n_levels, height, width = dog.shape
    for _ in range(MAX_REFINE_STEPS):
        if not (1 <= level <= n_levels - 2 and BORDER <= y < height - BORDER and BORDER <= x < width - BORDER):
            return None
        cube = dog[level - 1 : level + 2, y - 1 : y + 2, x - 1 : x + 2]
        centre = cube[1, 1, 1]
        grad = 0.5 * np.array(
            [cube[1, 1, 2] - cube[1, 1, 0], cube[1, 2, 1] - cube[1, 0, 1], cube[2, 1, 1] - cube[0, 1, 1]]
        )
        dxx = cube[1, 1, 2] + cube[1, 1, 0] - 2 * centre
        dyy = cube[1, 2, 1] + cube[1, 0, 1] - 2 * centre
        dss = cube[2, 1, 1] + cube[0, 1, 1] - 2 * centre
        dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
        dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
        dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
        hessian = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        try:
            offset = -np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(offset)):
            return None
        if np.all(np.abs(offset) < 0.6):
            break
        x += int(np.rint(offset[0]))
        y += int(np.rint(offset[1]))
        level += int(np.rint(offset[2]))
    else:
        return None

    response = float(centre + 0.5 * grad @ offset)
    if abs(response) < contrast_thresh:
        return None
    trace = dxx + dyy
    det = dxx * dyy - dxy * dxy
    if det <= 0 or trace * trace * edge_ratio >= (edge_ratio + 1) ** 2 * det:
        return None
    return x + float(offset[0]), y + float(offset[1]), level + float(offset[2]), response


def _orientations(level_image: np.ndarray, x: float, y: float, sigma: float) -> list[float]:
    """Dominant gradient directions from a smoothed 36-bin histogram."""
    height, width = level_image.shape
    weight_sigma = ORI_SIGMA_FACTOR * sigma
    radius = int(round(ORI_RADIUS_FACTOR * weight_sigma))
    cx, cy = int(round(x)), int(round(y))
    x0, x1 = max(cx - radius, 1), min(cx + radius, width - 2)
    y0, y1 = max(cy - radius, 1), min(cy + radius, height - 2)
    if x0 > x1 or y0 > y1:
        return []
    window = level_image[y0 - 1 : y1 + 2, x0 - 1 : x1 + 2]
    dx = window[1:-1, 2:] - window[1:-1, :-2]
    dy = window[2:, 1:-1] - window[:-2, 1:-1]
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    weight = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * weight_sigma * weight_sigma))
    magnitude = np.hypot(dx, dy)
    angle = np.arctan2(dy, dx)
    bins = np.floor(angle * ORI_BINS / (2 * np.pi) + 0.5).astype(np.int64) % ORI_BINS
    hist = np.bincount(bins.ravel(), weights=(weight * magnitude).ravel(), minlength=ORI_BINS)
    hist = (
        np.roll(hist, 2) + np.roll(hist, -2) + 4.0 * (np.roll(hist, 1) + np.roll(hist, -1)) + 6.0 * hist
    ) / 16.0
    peak = hist.max()
    if peak <= 0:
        return []
    left = np.roll(hist, 1)
    right = np.roll(hist, -1)
    result = []
    for i in np.flatnonzero((hist > left) & (hist >= right) & (hist >= ORI_PEAK_RATIO * peak)):
        denom = left[i] - 2.0 * hist[i] + right[i]
        shift = 0.5 * (left[i] - right[i]) / denom if denom != 0 else 0.0
        result.append(float((2 * np.pi * (i + shift) / ORI_BINS) % (2 * np.pi)))
    return result


def detect_keypoints(
    pyr: ScaleSpacePyramid, contrast_thresh: float = 0.03, edge_ratio: float = 10.0
) -> list[Keypoint]:
    """3x3x3 DoG extrema refined to sub-pixel accuracy, edge-filtered and oriented."""
    if contrast_thresh <= 0 or edge_ratio <= 0:
        raise InvalidParameterError("contrast threshold and edge ratio must be > 0")
    s = pyr.scales_per_octave
    keypoints: list[Keypoint] = []
    height, width = pyr.image_shape
    for octave, dog in enumerate(pyr.dogs):
        n_levels, oh, ow = dog.shape
        if oh <= 2 * BORDER or ow <= 2 * BORDER:
            continue
        maxima = ndimage.maximum_filter(dog, size=3, mode="nearest")
        minima = ndimage.minimum_filter(dog, size=3, mode="nearest")
        floor = 0.5 * contrast_thresh
        candidates = ((dog == maxima) & (dog > floor)) | ((dog == minima) & (dog < -floor))
        candidates[0] = False
        candidates[-1] = False
        candidates[:, :BORDER, :] = False
        candidates[:, oh - BORDER :, :] = False
        candidates[:, :, :BORDER] = False
        candidates[:, :, ow - BORDER :] = False

        seen: set[tuple[int, int, int]] = set()
        for level, y, x in np.argwhere(candidates):
            refined = _refine(dog, int(level), int(y), int(x), contrast_thresh, edge_ratio)
            if refined is None:
                continue
            ox, oy, olevel, response = refined
            # plateau extrema refine onto the same point
            key = (int(round(2 * ox)), int(round(2 * oy)), int(round(2 * olevel)))
            if key in seen:
                continue
            seen.add(key)
            layer = min(max(int(round(olevel)), 0), n_levels - 1)
            sigma = pyr.sigma0 * 2.0 ** (olevel / s)
            ix, iy = pyr.to_image(octave, ox, oy)
            if not (0 <= ix < width and 0 <= iy < height):
                continue
            for theta in _orientations(pyr.gaussians[octave][layer], ox, oy, sigma):
                keypoints.append(
                    Keypoint(
                        x=ix,
                        y=iy,
                        scale=pyr.image_scale(octave, sigma),
                        orientation=theta,
                        response=abs(response),
                        octave=octave,
                        layer=layer,
                        octave_x=ox,
                        octave_y=oy,
                        octave_sigma=sigma,
                    )
                )
    logger.debug("Detected %s keypoints over %s octaves", len(keypoints), pyr.octaves)
    return keypoints


def _descriptor(level_image: np.ndarray, kp: Keypoint) -> np.ndarray | None:
    height, width = level_image.shape
    d, n = DESC_WIDTH, DESC_BINS
    hist_width = DESC_SCALE_FACTOR * kp.octave_sigma
    radius = int(round(hist_width * math.sqrt(2.0) * (d + 1) * 0.5))
    cx, cy = int(round(kp.octave_x)), int(round(kp.octave_y))
    if cx - radius < 1 or cy - radius < 1 or cx + radius > width - 2 or cy + radius > height - 2:
        return None

    cos_t, sin_t = math.cos(kp.orientation), math.sin(kp.orientation)
    offsets = np.arange(-radius, radius + 1)
    iy, ix = np.meshgrid(offsets, offsets, indexing="ij")
    # sample offsets expressed in the keypoint frame, in histogram-cell units
    u = (ix * cos_t + iy * sin_t) / hist_width
    v = (-ix * sin_t + iy * cos_t) / hist_width
    rbin = v + d / 2.0 - 0.5
    cbin = u + d / 2.0 - 0.5
    inside = (rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
    if not np.any(inside):
        return None

    ys = cy + iy[inside]
    xs = cx + ix[inside]
    dx = level_image[ys, xs + 1] - level_image[ys, xs - 1]
    dy = level_image[ys + 1, xs] - level_image[ys - 1, xs]
    magnitude = np.hypot(dx, dy)
    angle = (np.arctan2(dy, dx) - kp.orientation) % (2 * np.pi)
    weight = np.exp(-(u[inside] ** 2 + v[inside] ** 2) / (2.0 * (0.5 * d) ** 2))
    value = magnitude * weight

    r = rbin[inside]
    c = cbin[inside]
    o = angle * n / (2 * np.pi)
    r0, c0, o0 = np.floor(r), np.floor(c), np.floor(o)
    fr, fc, fo = r - r0, c - c0, o - o0
    r0 = r0.astype(np.int64) + 1
    c0 = c0.astype(np.int64) + 1
    o0 = o0.astype(np.int64)

    hist = np.zeros((d + 2, d + 2, n))
    for dr, wr in ((0, 1.0 - fr), (1, fr)):
        for dc, wc in ((0, 1.0 - fc), (1, fc)):
            for do, wo in ((0, 1.0 - fo), (1, fo)):
                np.add.at(hist, (r0 + dr, c0 + dc, (o0 + do) % n), value * wr * wc * wo)

    vector = hist[1:-1, 1:-1, :].ravel()
    norm = np.linalg.norm(vector)
    if norm <= 0:
        return None
    vector = np.minimum(vector / norm, DESC_CLAMP)
    return vector / np.linalg.norm(vector)


def describe(
    image: ImageBuffer | np.ndarray,
    keypoints: list[Keypoint],
    *,
    pyramid: ScaleSpacePyramid | None = None,
    config: FeatureConfig | None = None,
) -> Descriptors:
    """128-d descriptors; keypoints whose support window leaves the image are dropped."""
    if pyramid is None:
        cfg = config or FeatureConfig()
        pyramid = build_pyramid(image, cfg.octaves, cfg.scales_per_octave, cfg.sigma0, upsample=cfg.upsample)
    vectors: list[np.ndarray] = []
    kept: list[int] = []
    for index, kp in enumerate(keypoints):
        if kp.octave >= pyramid.octaves:
            continue
        vector = _descriptor(pyramid.gaussians[kp.octave][kp.layer], kp)
        if vector is not None:
            vectors.append(vector)
            kept.append(index)
    matrix = np.array(vectors, dtype=np.float64).reshape(-1, DESCRIPTOR_SIZE)
    return Descriptors(vectors=matrix, keypoint_indices=np.array(kept, dtype=np.int64))


def match(
    desc_a: Descriptors | np.ndarray,
    desc_b: Descriptors | np.ndarray,
    ratio_thresh: float = 0.75,
    cross_check: bool = True,
) -> list[MatchPair]:
    """Nearest-neighbour matches passing the ratio test; ties go to the lower index."""
    if not 0 < ratio_thresh <= 1:
        raise InvalidParameterError(f"ratio threshold must lie in (0, 1], got {ratio_thresh}")
    a = desc_a.vectors if isinstance(desc_a, Descriptors) else np.asarray(desc_a, dtype=np.float64)
    b = desc_b.vectors if isinstance(desc_b, Descriptors) else np.asarray(desc_b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return []
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    dist = cdist(a, b)
    rows = np.arange(a.shape[0])
    order = np.argsort(dist, axis=1, kind="stable")
    best = order[:, 0]
    d1 = dist[rows, best]
    d2 = dist[rows, order[:, 1]] if b.shape[0] > 1 else np.full(a.shape[0], np.inf)
    # both distances zero means an exact duplicate among the candidates
    ratio = np.ones_like(d1)
    np.divide(d1, d2, out=ratio, where=d2 > 0)
    keep = ratio < ratio_thresh
    if cross_check:
        reverse = np.argmin(dist, axis=0)
        keep &= reverse[best] == rows
    return [
        MatchPair(index_a=int(i), index_b=int(best[i]), distance=float(d1[i]), ratio=float(ratio[i]))
        for i in np.flatnonzero(keep)
    ]


def extract_features(image: ImageBuffer | np.ndarray, config: FeatureConfig | None = None) -> FeatureSet:
    cfg = config or FeatureConfig()
    pyramid = build_pyramid(image, cfg.octaves, cfg.scales_per_octave, cfg.sigma0, upsample=cfg.upsample)
    keypoints = detect_keypoints(pyramid, cfg.contrast_threshold, cfg.edge_ratio)
    described = describe(image, keypoints, pyramid=pyramid)
    return FeatureSet(
        keypoints=[keypoints[i] for i in described.keypoint_indices],
        descriptors=described.vectors,
    )
