"""Ablation sweeps: one poisoned dataset, evaluation and diagnosis per axis value."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from patchpoison.core.config import FeatureConfig, RansacConfig
from patchpoison.core.errors import InvalidParameterError
from patchpoison.core.poison import poison_dataset
from patchpoison.dataset.loader import SceneDataset, load_scene
from patchpoison.dataset.writer import atomic_write_bytes, ensure_writable_dir, write_json
from patchpoison.schemas.sweep import SweepConfig, SweepReport, SweepRow
from patchpoison.services.diagnosis import DiagnoseOptions, diagnose_directory
from patchpoison.services.evaluation import evaluate_directories

logger = logging.getLogger(__name__)

REPORT_NAME = "sweep_report.json"
CSV_NAME = "sweep.csv"
CSV_COLUMNS = [
    "value",
    "status",
    "poisoned",
    "SSIM↑",
    "SSIM std",
    "PSNR↑",
    "PSNR std",
    "LPIPS↓",
    "patch_match_fraction",
    "area_fraction",
    "rotation_error_ransac_deg",
    "rotation_error_direct_deg",
    "error",
]


def cell_dirname(config: SweepConfig, index: int, value: float | int | str) -> str:
    slug = re.sub(r"[^A-Za-z0-9.+-]+", "_", str(value))
    return f"{config.axis.value}_{index:02d}_{slug}"


def _inf_text(value: float) -> float | str:
    return "inf" if math.isinf(value) else value


def _ground_truth_path(config: SweepConfig, dataset: SceneDataset) -> Path | None:
    if config.ground_truth is not None:
        return Path(config.ground_truth)
    if len(dataset.metadata_source) == 1 and dataset.cameras is not None:
        return dataset.root / dataset.metadata_source[0]
    return None


def run_cell(
    config: SweepConfig,
    dataset: SceneDataset,
    index: int,
    output_root: Path,
    *,
    workers: int = 1,
    feature_config: FeatureConfig | None = None,
    ransac_config: RansacConfig | None = None,
) -> SweepRow:
    value = config.values[index]
    row = SweepRow(axis=config.axis, value=value)
    cell_dir = output_root / cell_dirname(config, index, value)
    try:
        spec, ratio = config.cell(value)
        manifest = poison_dataset(
            dataset.paths,
            spec,
            ratio,
            config.seed,
            cell_dir,
            root=dataset.root,
            background=dataset.background,
            workers=workers,
            notes=dataset.warnings,
        )
        row.output_dir = str(cell_dir)
        row.total = manifest.total
        row.poisoned_count = manifest.poisoned_count
        if manifest.failed_count:
            raise RuntimeError(f"{manifest.failed_count} image(s) failed to poison")

        report = evaluate_directories(cell_dir, dataset.root, background=dataset.background, workers=workers)
        row.ssim_mean = report.ssim_mean
        row.ssim_std = report.ssim_std
        row.psnr_mean = _inf_text(report.psnr_mean)
        row.psnr_std = _inf_text(report.psnr_std)
        row.lpips_mean = report.lpips_mean
        row.area_fraction = report.area_fraction

        if config.diagnose_pairs and len(dataset) >= 2:
            summary = diagnose_directory(
                cell_dir,
                cell_dir / "diagnostics",
                DiagnoseOptions(
                    pairs=config.diagnose_pairs,
                    ground_truth_path=_ground_truth_path(config, dataset),
                    feature_config=feature_config,
                    ransac_config=ransac_config,
                ),
            )
            row.patch_match_fraction = summary.mean_patch_match_fraction
            row.rotation_error_ransac_deg = summary.mean_rotation_error_ransac_deg
            row.rotation_error_direct_deg = summary.mean_rotation_error_direct_deg
    except Exception as exc:
        logger.exception("Sweep cell %s=%s failed", config.axis.value, value)
        row.status = "failed"
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return "inf" if math.isinf(value) else f"{value:.6g}"
    return str(value)


def sweep_csv(report: SweepReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([report.axis.value, *CSV_COLUMNS[1:]])
    for row in report.rows:
        writer.writerow(
            [
                _cell(row.value),
                row.status,
                row.poisoned_count,
                _cell(row.ssim_mean),
                _cell(row.ssim_std),
                _cell(row.psnr_mean),
                _cell(row.psnr_std),
                _cell(row.lpips_mean),
                _cell(row.patch_match_fraction),
                _cell(row.area_fraction),
                _cell(row.rotation_error_ransac_deg),
                _cell(row.rotation_error_direct_deg),
                row.error or "",
            ]
        )
    return buffer.getvalue()


def run_sweep(
    config: SweepConfig,
    output_dir: Path | str | None = None,
    *,
    workers: int = 1,
    feature_config: FeatureConfig | None = None,
    ransac_config: RansacConfig | None = None,
) -> SweepReport:
    """Run every cell, then write ``sweep_report.json`` and ``sweep.csv``.

    Cells run sequentially unless ``config.parallel``; rows keep value order
    either way and a failing cell never stops the others.
    """
    target = output_dir or config.output_dir
    if target is None:
        raise InvalidParameterError("sweep needs an output directory")
    out = ensure_writable_dir(target)
    dataset = load_scene(config.input_dir, config.background)

    def job(index: int) -> SweepRow:
        return run_cell(
            config,
            dataset,
            index,
            out,
            workers=workers,
            feature_config=feature_config,
            ransac_config=ransac_config,
        )

    pool_size = (config.workers or len(config.values)) if config.parallel else 1
    with ThreadPoolExecutor(max_workers=pool_size) as pool:
        rows = list(pool.map(job, range(len(config.values))))

    report = SweepReport(
        axis=config.axis,
        seed=config.seed,
        rows=rows,
        failed_cells=sum(1 for r in rows if r.status != "ok"),
    )
    atomic_write_bytes(out / CSV_NAME, sweep_csv(report).encode("utf-8"))
    write_json(out / REPORT_NAME, report)
    logger.info("Sweep over %s: %s cells, %s failed", config.axis.value, len(rows), report.failed_cells)
    return report
