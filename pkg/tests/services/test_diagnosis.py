# tests/services/test_diagnosis.py
"""
测试目标：目录级两视图诊断（patchpoison.services.diagnosis）

覆盖点：
1）select_pairs：全部两两组合 / 前 k 个相邻对；
2）diagnose_directory：逐对 JSON、汇总 diagnostics.json、可选特征转储；
3）投毒目录：自动读取投毒清单中的补丁区域；
4）图像少于 2 张、真值文件不存在、清单损坏：InvalidInputError。
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from conftest import make_scene

from patchpoison.core.errors import InvalidInputError
from patchpoison.core.poison import poison_dataset
from patchpoison.dataset.loader import load_scene
from patchpoison.schemas.manifest import ManifestEntry, PoisonManifest, Region
from patchpoison.schemas.patch import PatchSpec
from patchpoison.services.diagnosis import (
    FEATURES_DIR,
    PAIRS_DIR,
    SUMMARY_NAME,
    DiagnoseOptions,
    diagnose_directory,
    manifest_regions,
    read_manifest,
    select_pairs,
)


@pytest.fixture
def square_scene(tmp_path: Path) -> Path:
    return make_scene(tmp_path / "square", count=3, height=64, width=64)


def test_select_pairs() -> None:
    assert select_pairs(4, None) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    assert select_pairs(4, 2) == [(0, 1), (1, 2)]
    assert select_pairs(4, 10) == [(0, 1), (1, 2), (2, 3)]
    assert select_pairs(1, None) == []


def test_manifest_regions_skip_failed_entries() -> None:
    region = Region(x=0, y=0, w=12, h=12)
    manifest = PoisonManifest(
        spec=PatchSpec(),
        ratio=1.0,
        seed=0,
        entries=[
            ManifestEntry(source="a.png", poisoned=True, region=region),
            ManifestEntry(source="b.png", poisoned=True, region=region, error="boom"),
            ManifestEntry(source="c.png"),
        ],
    )
    assert manifest_regions(manifest) == {"a.png": region}
    assert manifest_regions(None) == {}


# ----------------------------------------------------------------------
# 目录诊断
# ----------------------------------------------------------------------


def test_diagnose_clean_directory(square_scene: Path, tmp_path: Path) -> None:
    out = tmp_path / "diag"
    summary = diagnose_directory(square_scene, out, DiagnoseOptions(dump_features=True))
    assert summary.pair_count == 3
    assert summary.failed_pairs == 0
    assert summary.mean_area_fraction == 0.0
    pair_files = sorted(p.name for p in (out / PAIRS_DIR).iterdir())
    assert pair_files == ["img_00__img_01.json", "img_00__img_02.json", "img_01__img_02.json"]
    assert len(list((out / FEATURES_DIR).iterdir())) == 3
    payload = json.loads((out / SUMMARY_NAME).read_text(encoding="utf-8"))
    assert payload["pair_count"] == 3
    assert [r["image_a"] for r in payload["reports"]] == ["img_00.png", "img_00.png", "img_01.png"]


def test_diagnose_limited_pairs(square_scene: Path, tmp_path: Path) -> None:
    summary = diagnose_directory(square_scene, tmp_path / "diag", DiagnoseOptions(pairs=1))
    assert summary.pair_count == 1
    assert not (tmp_path / "diag" / FEATURES_DIR).exists()


def test_poisoned_directory_uses_manifest_regions(square_scene: Path, tmp_path: Path) -> None:
    dataset = load_scene(square_scene)
    poisoned = tmp_path / "poisoned"
    poison_dataset(dataset.paths, PatchSpec(), 1.0, 0, poisoned, root=dataset.root)
    summary = diagnose_directory(poisoned, tmp_path / "diag", DiagnoseOptions(pairs=2))
    assert summary.pair_count == 2
    for report in summary.reports:
        assert report.region_a == Region(x=0, y=0, w=12, h=12)
        assert report.area_fraction == pytest.approx(144 / 4096)
    assert summary.mean_area_fraction == pytest.approx(144 / 4096)


# ----------------------------------------------------------------------
# 错误路径
# ----------------------------------------------------------------------


def test_single_image_is_rejected(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "one", count=1)
    with pytest.raises(InvalidInputError, match="at least 2 images"):
        diagnose_directory(scene, tmp_path / "diag")


def test_missing_ground_truth_file(square_scene: Path, tmp_path: Path) -> None:
    options = DiagnoseOptions(ground_truth_path=tmp_path / "transforms.json")
    with pytest.raises(InvalidInputError):
        diagnose_directory(square_scene, tmp_path / "diag", options)


def test_broken_manifest(tmp_path: Path) -> None:
    path = tmp_path / "manifest.json"
    path.write_text('{"ratio": 2}', encoding="utf-8")
    with pytest.raises(InvalidInputError):
        read_manifest(path)
