"""8-bit raster container used across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from patchpoison.core.errors import InvalidInputError

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, slots=True, eq=False)
class ImageBuffer:
    """Row-major ``(height, width, channels)`` uint8 raster with 1, 3 or 4 channels.

    The pixel array is copied on construction and marked read-only.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        array = np.asarray(self.pixels)
        if array.ndim == 2:
            array = array[:, :, None]
        if array.ndim != 3 or array.shape[2] not in (1, 3, 4):
            raise InvalidInputError(f"expected HxW, HxWx1, HxWx3 or HxWx4 samples, got shape {array.shape}")
        if array.shape[0] == 0 or array.shape[1] == 0:
            raise InvalidInputError("image has zero width or height")
        if array.dtype != np.uint8:
            if not np.issubdtype(array.dtype, np.integer) or array.min() < 0 or array.max() > 255:
                raise InvalidInputError(f"expected 8-bit samples, got dtype {array.dtype}")
            array = array.astype(np.uint8)
        array = np.array(array, dtype=np.uint8, copy=True, order="C")
        array.flags.writeable = False
        object.__setattr__(self, "pixels", array)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    @property
    def color_channels(self) -> int:
        """Channels carrying color; the alpha plane of RGBA images is excluded."""
        return 3 if self.channels == 4 else self.channels

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    def same_shape(self, other: ImageBuffer) -> bool:
        return self.pixels.shape == other.pixels.shape

    def equals(self, other: ImageBuffer) -> bool:
        return self.same_shape(other) and bool(np.array_equal(self.pixels, other.pixels))

    def to_gray(self) -> np.ndarray:
        """Luma in ``[0, 1]`` as float64; alpha is ignored."""
        samples = self.pixels.astype(np.float64) / 255.0
        if self.channels == 1:
            return samples[:, :, 0]
        return samples[:, :, :3] @ LUMA_WEIGHTS


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round non-negative samples half away from zero and clamp to the 8-bit range."""
    return np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)


def from_float(values: np.ndarray) -> ImageBuffer:
    return ImageBuffer(round_half_up(np.asarray(values, dtype=np.float64)))


def gray_buffer(values: np.ndarray) -> ImageBuffer:
    """Quantize a ``[0, 1]`` grayscale array into a single-channel buffer."""
    return from_float(np.asarray(values, dtype=np.float64) * 255.0)
