# tests/services/test_sweep.py
"""
测试目标：消融扫描（patchpoison.services.sweep + schemas.sweep）

覆盖点：
1）SweepConfig：空取值、非法取值在加载时报错；比例轴驱动投毒比例；
2）cell_dirname：轴名 + 序号 + 取值；
3）run_sweep：单格失败不影响其它格、CSV / JSON 报告、串行与并行结果一致；
4）缺少输出目录：InvalidParameterError。
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import pytest
from conftest import make_scene
from pydantic import ValidationError

from patchpoison.core.errors import InvalidParameterError
from patchpoison.schemas.patch import PatchSpec, PatternKind
from patchpoison.schemas.sweep import SweepAxis, SweepConfig
from patchpoison.services.sweep import CSV_NAME, REPORT_NAME, cell_dirname, run_sweep, sweep_csv


def _config(scene: Path, axis: str, values: list, **extra) -> SweepConfig:
    return SweepConfig(axis=axis, values=values, input_dir=str(scene), diagnose_pairs=0, **extra)


# ----------------------------------------------------------------------
# 配置
# ----------------------------------------------------------------------


def test_config_validation(scene_dir: Path) -> None:
    with pytest.raises(ValidationError):
        _config(scene_dir, "alpha", [])
    with pytest.raises(ValidationError):
        _config(scene_dir, "alpha", [0.5, 1.5])
    with pytest.raises(ValidationError):
        _config(scene_dir, "poison-ratio", [0.0])


def test_config_cells(scene_dir: Path) -> None:
    config = _config(scene_dir, "Pattern-Kind", ["circles"], ratio=0.5)
    assert config.axis is SweepAxis.PATTERN_KIND
    spec, ratio = config.cell("circles")
    assert spec.kind is PatternKind.CIRCLES
    assert ratio == 0.5

    ratio_axis = _config(scene_dir, "poison_ratio", [0.25])
    spec, ratio = ratio_axis.cell(0.25)
    assert spec == PatchSpec()
    assert ratio == 0.25


def test_cell_dirname(scene_dir: Path) -> None:
    config = _config(scene_dir, "alpha", [0.5])
    assert cell_dirname(config, 2, 0.5) == "alpha_02_0.5"
    kinds = _config(scene_dir, "pattern_kind", ["checkerboard_plus_circles"])
    assert cell_dirname(kinds, 0, "checkerboard_plus_circles") == "pattern_kind_00_checkerboard_plus_circles"


# ----------------------------------------------------------------------
# 执行
# ----------------------------------------------------------------------


def test_failing_cell_does_not_stop_the_sweep(scene_dir: Path, tmp_path: Path) -> None:
    config = _config(scene_dir, "patch_size", [8, 12, 900])
    report = run_sweep(config, tmp_path / "sweep")

    assert [row.value for row in report.rows] == [8, 12, 900]
    assert [row.status for row in report.rows] == ["ok", "ok", "failed"]
    assert report.failed_cells == 1
    assert "failed to poison" in report.rows[2].error

    small, default = report.rows[0], report.rows[1]
    assert small.poisoned_count == 3
    # 40x32 图像：8x8 与 12x12 补丁
    assert small.area_fraction == pytest.approx(64 / 1280)
    assert default.area_fraction == pytest.approx(144 / 1280)
    assert small.ssim_mean > default.ssim_mean
    assert (tmp_path / "sweep" / "patch_size_00_8" / "img_00.png").is_file()

    rows = list(csv.reader(io.StringIO((tmp_path / "sweep" / CSV_NAME).read_text(encoding="utf-8"))))
    assert rows[0][0] == "patch_size"
    assert [r[1] for r in rows[1:]] == ["ok", "ok", "failed"]
    payload = json.loads((tmp_path / "sweep" / REPORT_NAME).read_text(encoding="utf-8"))
    assert payload["failed_cells"] == 1


def test_parallel_matches_sequential(scene_dir: Path, tmp_path: Path) -> None:
    sequential = run_sweep(_config(scene_dir, "alpha", [0.25, 1.0]), tmp_path / "seq")
    parallel = run_sweep(_config(scene_dir, "alpha", [0.25, 1.0], parallel=True), tmp_path / "par")
    assert [r.ssim_mean for r in sequential.rows] == [r.ssim_mean for r in parallel.rows]
    assert [r.psnr_mean for r in sequential.rows] == [r.psnr_mean for r in parallel.rows]
    assert sweep_csv(sequential) == sweep_csv(parallel)


def test_sweep_with_diagnosis(tmp_path: Path) -> None:
    scene = make_scene(tmp_path / "square", count=2, height=64, width=64)
    config = SweepConfig(axis="block_size", values=[2, 4], input_dir=str(scene), diagnose_pairs=1)
    report = run_sweep(config, tmp_path / "sweep")
    assert report.failed_cells == 0
    for index, row in enumerate(report.rows):
        cell = tmp_path / "sweep" / cell_dirname(config, index, row.value)
        assert (cell / "diagnostics" / "diagnostics.json").is_file()
        assert row.area_fraction == pytest.approx(144 / 4096)


def test_output_directory_is_required(scene_dir: Path) -> None:
    with pytest.raises(InvalidParameterError):
        run_sweep(_config(scene_dir, "alpha", [1.0]))
