from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# ---- 确保 src/ 在 sys.path 中，方便直接 import patchpoison.* ----
ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from patchpoison.core.image import ImageBuffer  # noqa: E402


def random_pixels(height: int, width: int, channels: int = 3, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    shape = (height, width) if channels == 1 else (height, width, channels)
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


def random_image(height: int, width: int, channels: int = 3, seed: int = 0) -> ImageBuffer:
    return ImageBuffer(random_pixels(height, width, channels, seed))


def black_corner_image(height: int, width: int, seed: int = 0, corner: int = 40) -> ImageBuffer:
    """随机纹理图像，左上角 ``corner`` 像素见方为纯黑（模拟 NeRF-Synthetic 的黑色背景角落）。"""
    pixels = random_pixels(height, width, 3, seed)
    pixels[:corner, :corner] = 0
    return ImageBuffer(pixels)


def write_png(path: Path, pixels: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path, format="PNG")
    return path


def make_scene(root: Path, count: int = 3, height: int = 32, width: int = 40, channels: int = 3) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        write_png(root / f"img_{i:02d}.png", random_pixels(height, width, channels, seed=i))
    return root


@pytest.fixture
def scene_dir(tmp_path: Path) -> Path:
    return make_scene(tmp_path / "scene")
