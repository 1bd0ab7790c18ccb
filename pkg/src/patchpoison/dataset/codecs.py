"""PNG / PPM / PGM decoding and encoding via Pillow, plus alpha compositing."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from patchpoison.core.errors import InvalidInputError, InvalidParameterError
from patchpoison.core.image import ImageBuffer, round_half_up
from patchpoison.schemas.patch import BackgroundPolicy

IMAGE_SUFFIXES = frozenset({".png", ".ppm", ".pgm"})

_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}

# Fixed encoder settings so re-encoding the same pixels yields the same bytes.
PNG_COMPRESS_LEVEL = 6


def is_image_path(path: Path) -> bool:
    return path.suffix.lower() in IMAGE_SUFFIXES


def decode_image(payload: bytes, name: str = "<memory>") -> ImageBuffer:
    try:
        with Image.open(io.BytesIO(payload)) as img:
            img.load()
            return _to_buffer(img, name)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise InvalidInputError(f"cannot decode image {name}: {exc}") from exc


def read_image(path: Path | str) -> ImageBuffer:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc
    return decode_image(payload, str(path))


def image_size(path: Path | str) -> tuple[int, int]:
    """``(width, height)`` from the file header without decoding pixels."""
    try:
        with Image.open(path) as img:
            return img.size
    except (UnidentifiedImageError, OSError) as exc:
        raise InvalidInputError(f"cannot read image header {path}: {exc}") from exc


def _to_buffer(img: Image.Image, name: str) -> ImageBuffer:
    mode = img.mode
    if mode in {"1", "L"}:
        converted = img.convert("L")
    elif mode == "LA":
        converted = img.convert("RGBA")
    elif mode == "P":
        converted = img.convert("RGBA" if "transparency" in img.info else "RGB")
    elif mode in {"RGB", "RGBA"}:
        converted = img
    else:
        raise InvalidInputError(f"unsupported pixel mode {mode!r} in {name}; only 8-bit images are handled")
    return ImageBuffer(np.asarray(converted, dtype=np.uint8))


def encode_image(image: ImageBuffer, suffix: str) -> bytes:
    fmt = _FORMATS.get(suffix.lower())
    if fmt is None:
        raise InvalidParameterError(f"unsupported output format {suffix!r}")
    pixels = image.pixels
    if fmt == "PPM" and image.channels == 4:
        pixels = pixels[:, :, :3]
    # uint8 arrays map to L, RGB or RGBA by shape
    img = Image.fromarray(np.ascontiguousarray(pixels[:, :, 0] if pixels.shape[2] == 1 else pixels))
    buffer = io.BytesIO()
    if fmt == "PNG":
        img.save(buffer, format="PNG", compress_level=PNG_COMPRESS_LEVEL, optimize=False)
    else:
        img.save(buffer, format="PPM")
    return buffer.getvalue()


def composite(image: ImageBuffer, background: BackgroundPolicy) -> ImageBuffer:
    """Flatten RGBA onto a solid background: ``round(fg * a + bg * (1 - a))``."""
    if image.channels != 4 or background == BackgroundPolicy.KEEP:
        return image
    bg = 0.0 if background == BackgroundPolicy.BLACK else 255.0
    rgba = image.pixels.astype(np.float64)
    alpha = rgba[:, :, 3:4] / 255.0
    return ImageBuffer(round_half_up(rgba[:, :, :3] * alpha + bg * (1.0 - alpha)))


def load_image(path: Path | str, background: BackgroundPolicy = BackgroundPolicy.KEEP) -> ImageBuffer:
    return composite(read_image(path), background)
