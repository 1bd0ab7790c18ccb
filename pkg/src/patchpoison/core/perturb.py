"""Baseline perturbations the patch attack is compared against.

Blur and noise act on color channels only. Geometric transforms resample
every channel about the image centre with bilinear interpolation; samples
that fall outside the source are black.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from patchpoison.core.errors import InvalidParameterError
from patchpoison.core.image import ImageBuffer, round_half_up


def blur_sigma(kernel: int) -> float:
    """Sigma implied by an odd kernel size: ``0.3 * ((k - 1) / 2 - 1) + 0.8``."""
    return 0.3 * ((kernel - 1) / 2 - 1) + 0.8


def gaussian_kernel(kernel: int) -> np.ndarray:
    sigma = blur_sigma(kernel)
    offsets = np.arange(kernel) - (kernel - 1) / 2
    weights = np.exp(-(offsets**2) / (2 * sigma * sigma))
    return weights / weights.sum()


class Perturbation(ABC):
    NAME = "base"

    @abstractmethod
    def apply(self, image: ImageBuffer) -> ImageBuffer: ...

    def parameters(self) -> dict[str, float | int]:
        return asdict(self)  # type: ignore[call-overload]


@dataclass(frozen=True, slots=True)
class GaussianBlur(Perturbation):
    NAME = "gaussian_blur"

    kernel: int = 3

    def __post_init__(self) -> None:
        if self.kernel < 3 or self.kernel % 2 == 0:
            raise InvalidParameterError(f"blur kernel must be odd and >= 3, got {self.kernel}")

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        weights = gaussian_kernel(self.kernel)
        pixels = np.array(image.pixels, copy=True)
        colors = image.color_channels
        samples = pixels[:, :, :colors].astype(np.float64)
        for axis in (0, 1):
            samples = ndimage.convolve1d(samples, weights, axis=axis, mode="mirror")
        pixels[:, :, :colors] = round_half_up(samples)
        return ImageBuffer(pixels)


@dataclass(frozen=True, slots=True)
class GaussianNoise(Perturbation):
    NAME = "gaussian_noise"

    stddev: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.stddev < 0:
            raise InvalidParameterError(f"noise stddev must be >= 0, got {self.stddev}")

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        pixels = np.array(image.pixels, copy=True)
        colors = image.color_channels
        if self.stddev == 0:
            return ImageBuffer(pixels)
        rng = np.random.default_rng(self.seed)
        noise = rng.normal(0.0, self.stddev, size=pixels[:, :, :colors].shape)
        pixels[:, :, :colors] = round_half_up(pixels[:, :, :colors].astype(np.float64) + noise)
        return ImageBuffer(pixels)


def _warp(image: ImageBuffer, forward: np.ndarray, shift: tuple[float, float] = (0.0, 0.0)) -> ImageBuffer:
    """Resample with ``out = A (in - c) + c + shift`` in ``(x, y)`` pixel coordinates."""
    height, width = image.height, image.width
    centre = np.array([(height - 1) / 2.0, (width - 1) / 2.0])
    # swap to (row, col) order for ndimage
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    forward_rc = swap @ forward @ swap
    inverse = np.linalg.inv(forward_rc)
    shift_rc = np.array([shift[1], shift[0]])
    offset = centre - inverse @ (centre + shift_rc)
    planes = []
    for channel in range(image.channels):
        plane = ndimage.affine_transform(
            image.pixels[:, :, channel].astype(np.float64),
            inverse,
            offset=offset,
            order=1,
            mode="constant",
            cval=0.0,
        )
        planes.append(plane)
    return ImageBuffer(round_half_up(np.stack(planes, axis=2)))


def _rotation(degrees: float) -> np.ndarray:
    # counter-clockwise as displayed (y axis points down)
    theta = math.radians(degrees)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True, slots=True)
class Rotate(Perturbation):
    NAME = "rotate"

    degrees: float = 0.0

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return _warp(image, _rotation(self.degrees))


@dataclass(frozen=True, slots=True)
class Shear(Perturbation):
    NAME = "shear"

    x: float = 0.0
    y: float = 0.0

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return _warp(image, np.array([[1.0, self.x], [self.y, 1.0]]))


@dataclass(frozen=True, slots=True)
class Scale(Perturbation):
    NAME = "scale"

    factor: float = 1.0

    def __post_init__(self) -> None:
        if self.factor <= 0:
            raise InvalidParameterError(f"scale factor must be > 0, got {self.factor}")

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return _warp(image, np.eye(2) * self.factor)


@dataclass(frozen=True, slots=True)
class Translate(Perturbation):
    NAME = "translate"

    dx: int = 0
    dy: int = 0

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return _warp(image, np.eye(2), (float(self.dx), float(self.dy)))


@dataclass(frozen=True, slots=True)
class RandomRotate(Perturbation):
    NAME = "random_rotate"

    max_degrees: float = 45.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_degrees < 0:
            raise InvalidParameterError(f"max_degrees must be >= 0, got {self.max_degrees}")

    def draw(self) -> Rotate:
        rng = np.random.default_rng(self.seed)
        return Rotate(float(rng.uniform(-self.max_degrees, self.max_degrees)))

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return self.draw().apply(image)


@dataclass(frozen=True, slots=True)
class RandomShear(Perturbation):
    NAME = "random_shear"

    max_shear: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_shear < 0:
            raise InvalidParameterError(f"max_shear must be >= 0, got {self.max_shear}")

    def draw(self) -> Shear:
        rng = np.random.default_rng(self.seed)
        sx, sy = rng.uniform(-self.max_shear, self.max_shear, size=2)
        return Shear(float(sx), float(sy))

    def apply(self, image: ImageBuffer) -> ImageBuffer:
        return self.draw().apply(image)


PERTURBATION_MAP: dict[str, type[Perturbation]] = {
    GaussianBlur.NAME: GaussianBlur,
    GaussianNoise.NAME: GaussianNoise,
    Rotate.NAME: Rotate,
    Shear.NAME: Shear,
    Scale.NAME: Scale,
    Translate.NAME: Translate,
    RandomRotate.NAME: RandomRotate,
    RandomShear.NAME: RandomShear,
}


def build_perturbation(name: str, **params: float | int) -> Perturbation:
    cls = PERTURBATION_MAP.get(name)
    if cls is None:
        choices = ", ".join(sorted(PERTURBATION_MAP))
        raise InvalidParameterError(f"unknown perturbation {name!r}; available: {choices}")
    try:
        return cls(**params)  # type: ignore[call-arg]
    except TypeError as exc:
        raise InvalidParameterError(f"bad parameters for {name}: {exc}") from exc


def baseline_perturb(image: ImageBuffer, kind: Perturbation) -> ImageBuffer:
    return kind.apply(image)
