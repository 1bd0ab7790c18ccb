# tests/core/test_poison.py
"""
测试目标：补丁嵌入与数据集投毒（patchpoison.core.poison）

覆盖点：
1）embed_patch 的混合公式：α=0 恒等、α=1 全替换、α=0.5 半入取整；
2）局部性（Ω 以外逐字节不变，1000 张随机图像与 8x8 图像的穷举放置）、α=1 幂等、|out-in| 随 α 单调不减；
3）RGBA 的 alpha 通道保持不变、四个角的放置；
4）poison_dataset：round(ratio×N) 计数、同种子确定、输出顺序、坏图记录、不可写目录；
5）黑角图像上 12px 棋盘格补丁的 PSNR / SSIM 量级检查；8 张 800x800 图像的均值与耗时。
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np
import pytest
from conftest import black_corner_image, make_scene, random_image, random_pixels, write_png

from patchpoison.core.errors import DatasetError, InvalidParameterError, PatchPlacementError
from patchpoison.core.image import ImageBuffer
from patchpoison.core.metrics import psnr, ssim
from patchpoison.core.pattern import PatternMask, generate_checkerboard
from patchpoison.core.poison import (
    MANIFEST_NAME,
    embed_patch,
    patch_area_fraction,
    patch_region,
    poison_count,
    poison_dataset,
    resolve_patch_size,
    select_poisoned,
)
from patchpoison.dataset.codecs import read_image
from patchpoison.schemas.manifest import PoisonManifest
from patchpoison.schemas.patch import Corner, PatchSpec


def _constant(value: int, height: int = 16, width: int = 16, channels: int = 3) -> ImageBuffer:
    return ImageBuffer(np.full((height, width, channels), value, dtype=np.uint8))


def _full_mask(size: int) -> PatternMask:
    return PatternMask(np.ones((size, size)))


# ----------------------------------------------------------------------
# embed_patch：混合公式
# ----------------------------------------------------------------------


def test_alpha_zero_is_identity() -> None:
    image = random_image(40, 50, seed=3)
    out = embed_patch(image, generate_checkerboard(12, 4), 0.0)
    assert out.equals(image)


def test_alpha_one_replaces_bright_cells() -> None:
    out = embed_patch(_constant(37), _full_mask(4), 1.0)
    assert np.all(out.pixels[:4, :4] == 255)
    assert np.all(out.pixels[4:, :] == 37)


def test_half_alpha_rounds_half_up() -> None:
    out = embed_patch(_constant(100), _full_mask(4), 0.5)
    # 100 * 0.5 + 0.5 * 255 = 177.5 -> 178
    assert np.all(out.pixels[:4, :4] == 178)


def test_matches_float_oracle() -> None:
    image = random_image(30, 30, seed=9)
    mask = generate_checkerboard(12, 3, bright=180, dark=40)
    alpha = 0.37
    out = embed_patch(image, mask, alpha)
    window = image.pixels[:12, :12].astype(np.float64)
    weight = alpha * mask.cells[:, :, None]
    expected = np.floor(window * (1 - weight) + weight * 255 + 0.5)
    np.testing.assert_array_equal(out.pixels[:12, :12], expected.astype(np.uint8))


# ----------------------------------------------------------------------
# embed_patch：性质
# ----------------------------------------------------------------------


@pytest.mark.parametrize("corner", list(Corner))
def test_locality(corner: Corner) -> None:
    image = random_image(48, 64, seed=1)
    out = embed_patch(image, generate_checkerboard(12, 4), 1.0, corner, 5)
    region = patch_region(64, 48, 12, corner, 5)
    outside = np.ones((48, 64), dtype=bool)
    outside[region.y : region.y + region.h, region.x : region.x + region.w] = False
    np.testing.assert_array_equal(out.pixels[outside], image.pixels[outside])


def _assert_local(image: ImageBuffer, out: ImageBuffer, region) -> None:
    outside = np.ones((image.height, image.width), dtype=bool)
    outside[region.y : region.y + region.h, region.x : region.x + region.w] = False
    np.testing.assert_array_equal(out.pixels[outside], image.pixels[outside])


def test_locality_on_random_images() -> None:
    rng = np.random.default_rng(2024)
    corners = list(Corner)
    for index in range(1000):
        height, width = (int(v) for v in rng.integers(4, 65, size=2))
        channels = int(rng.choice([1, 3, 4]))
        size = int(rng.integers(1, min(height, width) + 1))
        margin = int(rng.integers(0, min(height, width) - size + 1))
        block = int(rng.integers(1, size + 1))
        corner = corners[index % 4]
        image = random_image(height, width, channels=channels, seed=index)
        out = embed_patch(image, generate_checkerboard(size, block), float(rng.random()), corner, margin)
        _assert_local(image, out, patch_region(width, height, size, corner, margin))


def test_locality_exhaustive_on_small_images() -> None:
    # 8x8 图像上的全部角落、尺寸、块大小与边距组合
    image = random_image(8, 8, seed=12)
    for corner in Corner:
        for size in range(1, 9):
            for block in range(1, size + 1):
                mask = generate_checkerboard(size, block)
                for margin in range(0, 9 - size):
                    out = embed_patch(image, mask, 1.0, corner, margin)
                    _assert_local(image, out, patch_region(8, 8, size, corner, margin))


def test_corner_placement() -> None:
    assert patch_region(100, 80, 10, Corner.TOP_LEFT, 2).model_dump() == {"x": 2, "y": 2, "w": 10, "h": 10}
    assert patch_region(100, 80, 10, Corner.TOP_RIGHT, 2).model_dump() == {"x": 88, "y": 2, "w": 10, "h": 10}
    assert patch_region(100, 80, 10, Corner.BOTTOM_LEFT, 0).model_dump() == {"x": 0, "y": 70, "w": 10, "h": 10}
    assert patch_region(100, 80, 10, Corner.BOTTOM_RIGHT, 0).model_dump() == {"x": 90, "y": 70, "w": 10, "h": 10}


def test_idempotent_at_full_alpha() -> None:
    image = random_image(32, 32, seed=4)
    mask = generate_checkerboard(12, 4)
    once = embed_patch(image, mask, 1.0)
    twice = embed_patch(once, mask, 1.0)
    assert twice.equals(once)


def test_distortion_is_monotone_in_alpha() -> None:
    mask = generate_checkerboard(16, 4, bright=200)
    for seed in range(5):
        image = random_image(20, 20, seed=seed)
        previous = np.zeros((20, 20, 3))
        for alpha in np.linspace(0.0, 1.0, 11):
            out = embed_patch(image, mask, float(alpha))
            diff = np.abs(out.pixels.astype(np.int64) - image.pixels.astype(np.int64))
            assert np.all(diff >= previous)
            previous = diff


def test_alpha_plane_is_preserved() -> None:
    image = random_image(20, 20, channels=4, seed=2)
    out = embed_patch(image, _full_mask(8), 1.0)
    np.testing.assert_array_equal(out.pixels[:, :, 3], image.pixels[:, :, 3])
    assert np.all(out.pixels[:8, :8, :3] == 255)


def test_grayscale_images_are_supported() -> None:
    out = embed_patch(_constant(10, channels=1), _full_mask(4), 1.0)
    assert out.channels == 1
    assert np.all(out.pixels[:4, :4, 0] == 255)


def test_patch_that_does_not_fit_is_rejected() -> None:
    image = random_image(20, 20)
    with pytest.raises(PatchPlacementError):
        embed_patch(image, generate_checkerboard(16, 4), 1.0, Corner.TOP_LEFT, 5)


def test_alpha_out_of_range_is_rejected() -> None:
    with pytest.raises(InvalidParameterError):
        embed_patch(random_image(20, 20), generate_checkerboard(4, 2), 1.5)


# ----------------------------------------------------------------------
# 计数、尺寸与面积
# ----------------------------------------------------------------------


@pytest.mark.parametrize("total,ratio,expected", [(100, 1.0, 100), (100, 0.05, 5), (7, 0.5, 4), (10, 0.25, 3), (1, 0.1, 0)])
def test_poison_count(total: int, ratio: float, expected: int) -> None:
    assert poison_count(total, ratio) == expected


@pytest.mark.parametrize("ratio", [0.0, -0.1, 1.01])
def test_poison_count_rejects_bad_ratio(ratio: float) -> None:
    with pytest.raises(InvalidParameterError):
        poison_count(10, ratio)


def test_selection_is_seeded() -> None:
    first = select_poisoned(100, 0.05, seed=11)
    assert len(first) == 5
    assert first == select_poisoned(100, 0.05, seed=11)
    assert all(0 <= i < 100 for i in first)


def test_fractional_size_resolution() -> None:
    spec = PatchSpec(size_fraction=0.015, block_px=4)
    assert resolve_patch_size(spec, 800) == 12
    assert resolve_patch_size(PatchSpec(size_px=20), 800) == 20


def test_area_fraction_of_default_patch() -> None:
    assert patch_area_fraction(12, 800, 800) == pytest.approx(0.000225)


def test_small_patch_on_black_corner_is_nearly_invisible() -> None:
    image = black_corner_image(800, 800, seed=5)
    out = embed_patch(image, generate_checkerboard(12, 4), 1.0)
    # 5 个亮格 × 16 像素 × 3 通道，每个样本误差 255
    expected = 10 * math.log10(255.0**2 / (80 * 3 * 255.0**2 / (800 * 800 * 3)))
    assert psnr(out, image) == pytest.approx(expected)
    assert ssim(out, image) >= 0.995


def test_default_patch_on_black_corners_over_several_images() -> None:
    images = [black_corner_image(800, 800, seed=seed) for seed in range(8)]
    mask = generate_checkerboard(12, 4)

    started = time.perf_counter()
    outputs = [embed_patch(image, mask, 1.0) for image in images]
    elapsed = time.perf_counter() - started

    assert elapsed < 5.0
    assert float(np.mean([ssim(out, image) for out, image in zip(outputs, images)])) >= 0.995
    assert min(psnr(out, image) for out, image in zip(outputs, images)) >= 30.0


# ----------------------------------------------------------------------
# poison_dataset
# ----------------------------------------------------------------------


def test_poison_dataset_writes_manifest(scene_dir: Path, tmp_path: Path) -> None:
    paths = sorted(scene_dir.glob("*.png"))
    out = tmp_path / "out"
    manifest = poison_dataset(paths, PatchSpec(), 1.0, 0, out, root=scene_dir)
    assert manifest.total == manifest.poisoned_count == 3
    assert [e.source for e in manifest.entries] == [p.name for p in paths]
    for entry in manifest.entries:
        assert entry.region is not None and (entry.region.w, entry.region.h) == (12, 12)
        assert entry.size_px == 12
        assert (out / entry.output).is_file()
    reloaded = PoisonManifest.model_validate_json((out / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert reloaded == manifest


def test_partial_ratio_copies_the_rest(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "scene", count=7)
    paths = sorted(scene.glob("*.png"))
    manifest = poison_dataset(paths, PatchSpec(), 0.5, 3, tmp_path / "out", root=scene)
    assert manifest.poisoned_count == 4
    for entry, path in zip(manifest.entries, paths):
        copied = read_image(tmp_path / "out" / entry.output)
        original = read_image(path)
        if entry.poisoned:
            assert not copied.equals(original)
        else:
            assert entry.region is None
            assert copied.equals(original)


def test_poison_dataset_is_deterministic(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "scene", count=10, height=16, width=16)
    paths = sorted(scene.glob("*.png"))
    spec = PatchSpec(size_px=8, block_px=2)
    first = poison_dataset(paths, spec, 0.3, 42, tmp_path / "a", root=scene)
    second = poison_dataset(paths, spec, 0.3, 42, tmp_path / "b", root=scene, workers=4)
    assert [e.poisoned for e in first.entries] == [e.poisoned for e in second.entries]
    for path in paths:
        assert (tmp_path / "a" / path.name).read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_hundred_images_at_five_percent(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "scene", count=100, height=14, width=14)
    paths = sorted(scene.glob("*.png"))
    spec = PatchSpec(size_px=6, block_px=2)
    first = poison_dataset(paths, spec, 0.05, 7, tmp_path / "a", root=scene)
    second = poison_dataset(paths, spec, 0.05, 7, tmp_path / "b", root=scene)
    chosen = {e.source for e in first.entries if e.poisoned}
    assert len(chosen) == 5
    assert chosen == {e.source for e in second.entries if e.poisoned}


def test_bad_image_is_recorded_and_others_continue(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "scene", count=2)
    broken = scene / "broken.png"
    broken.write_bytes(b"not a png")
    paths = sorted(scene.glob("*.png"))
    manifest = poison_dataset(paths, PatchSpec(), 1.0, 0, tmp_path / "out", root=scene)
    assert manifest.failed_count == 1
    failed = [e for e in manifest.entries if e.error]
    assert failed[0].source == "broken.png" and failed[0].output is None
    assert manifest.poisoned_count == 2


def test_too_small_image_is_recorded(tmp_path: Path) -> None:
    scene = tmp_path / "scene"
    write_png(scene / "tiny.png", random_pixels(8, 8))
    manifest = poison_dataset([scene / "tiny.png"], PatchSpec(), 1.0, 0, tmp_path / "out", root=scene)
    assert manifest.failed_count == 1
    assert "PatchPlacementError" in manifest.entries[0].error


def test_unwritable_output_is_fatal(scene_dir: Path, tmp_path: Path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    with pytest.raises(DatasetError):
        poison_dataset(sorted(scene_dir.glob("*.png")), PatchSpec(), 1.0, 0, blocker, root=scene_dir)
