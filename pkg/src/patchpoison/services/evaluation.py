"""Directory-level imperceptibility evaluation."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path

from pydantic import TypeAdapter, ValidationError

from patchpoison.core.errors import InvalidInputError
from patchpoison.core.metrics import evaluate_pairs
from patchpoison.core.poison import MANIFEST_NAME
from patchpoison.dataset.codecs import load_image
from patchpoison.dataset.loader import load_scene
from patchpoison.dataset.writer import atomic_write_bytes, ensure_writable_dir, write_json
from patchpoison.schemas.manifest import PoisonManifest
from patchpoison.schemas.patch import BackgroundPolicy
from patchpoison.schemas.report import AggregateReport, Direction

logger = logging.getLogger(__name__)

REPORT_NAME = "evaluation_report.json"
CSV_NAME = "evaluation.csv"

# arrows give the direction that favours the attack
COLUMN_ARROWS = {
    Direction.POISONED_VS_ORIGINAL: ("SSIM↑", "PSNR↑", "LPIPS↓"),
    Direction.POISONED_VS_RENDER: ("SSIM↓", "PSNR↓", "LPIPS↑"),
}

_LPIPS_ADAPTER = TypeAdapter(dict[str, float])


def read_lpips(path: Path | str) -> dict[str, float]:
    """LPIPS sidecar: ``{"<relative image path>": value}``."""
    path = Path(path)
    try:
        return _LPIPS_ADAPTER.validate_python(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise InvalidInputError(f"cannot read LPIPS sidecar {path}: {exc}") from exc


def find_manifest(*directories: Path | str) -> PoisonManifest | None:
    for directory in directories:
        path = Path(directory) / MANIFEST_NAME
        if not path.is_file():
            continue
        try:
            return PoisonManifest.model_validate_json(path.read_text(encoding="utf-8"))
        except (OSError, ValidationError):
            logger.warning("Ignoring unreadable manifest %s", path)
    return None


def _area_fraction(manifest: PoisonManifest | None) -> float | None:
    if manifest is None:
        return None
    fractions = [e.area_fraction for e in manifest.entries if e.area_fraction is not None]
    return sum(fractions) / len(fractions) if fractions else None


def evaluate_directories(
    poisoned_dir: Path | str,
    reference_dir: Path | str,
    *,
    direction: Direction = Direction.POISONED_VS_ORIGINAL,
    background: BackgroundPolicy | None = None,
    lpips_path: Path | str | None = None,
    workers: int = 1,
) -> AggregateReport:
    """Compare images paired by relative path; any unpaired or undecodable file is fatal.

    Without an explicit policy the background recorded by a poison manifest
    wins, then the reference scene's own default.
    """
    manifest = find_manifest(poisoned_dir, reference_dir)
    if background is None and manifest is not None:
        background = manifest.background
    reference = load_scene(reference_dir, background)
    poisoned = load_scene(poisoned_dir, reference.background)
    if len(poisoned) != len(reference):
        raise InvalidInputError(
            f"image count mismatch: {len(poisoned)} in {poisoned.root} vs {len(reference)} in {reference.root}"
        )
    unmatched = sorted(set(poisoned.relative_paths) ^ set(reference.relative_paths))
    if unmatched:
        raise InvalidInputError(f"no counterpart for {unmatched[0]}")

    policy = poisoned.background
    names = poisoned.relative_paths
    set_a = [load_image(poisoned.root / name, policy) for name in names]
    set_b = [load_image(reference.root / name, policy) for name in names]
    lpips = read_lpips(lpips_path) if lpips_path is not None else None
    report = evaluate_pairs(
        set_a,
        set_b,
        names=names,
        lpips=lpips,
        direction=direction,
        background=policy,
        area_fraction=_area_fraction(manifest),
        workers=workers,
    )
    logger.info("Evaluated %s pairs: SSIM %.4f, PSNR %s", len(names), report.ssim_mean, report.psnr_mean)
    return report


def _fmt(value: float | None, digits: int) -> str:
    if value is None or math.isnan(value):
        return "-"
    if math.isinf(value):
        return "inf"
    return f"{value:.{digits}f}"


def report_csv(report: AggregateReport) -> str:
    ssim_col, psnr_col, lpips_col = COLUMN_ARROWS[report.direction]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["image", "direction", ssim_col, psnr_col, lpips_col])
    for pair in report.pairs:
        writer.writerow([pair.name, report.direction.value, _fmt(pair.ssim, 6), _fmt(pair.psnr_db, 4), _fmt(pair.lpips, 6)])
    writer.writerow(["mean", report.direction.value, _fmt(report.ssim_mean, 6), _fmt(report.psnr_mean, 4), _fmt(report.lpips_mean, 6)])
    writer.writerow(["std", report.direction.value, _fmt(report.ssim_std, 6), _fmt(report.psnr_std, 4), _fmt(report.lpips_std, 6)])
    return buffer.getvalue()


def format_table(report: AggregateReport) -> str:
    """Mean ± std in SSIM, PSNR, LPIPS column order."""
    ssim_col, psnr_col, lpips_col = COLUMN_ARROWS[report.direction]
    lpips = "-" if report.lpips_mean is None else f"{report.lpips_mean:.3f} ± {_fmt(report.lpips_std, 3)}"
    rows = [
        f"{report.direction.value} ({len(report.pairs)} pairs)",
        f"{ssim_col:<10}{psnr_col:<18}{lpips_col}",
        f"{_fmt(report.ssim_mean, 4)} ± {_fmt(report.ssim_std, 4)}  "
        f"{_fmt(report.psnr_mean, 2)} ± {_fmt(report.psnr_std, 2)}  {lpips}",
    ]
    if report.psnr_infinite_count:
        rows.append(f"{report.psnr_infinite_count} identical pair(s) with infinite PSNR excluded from PSNR stats")
    return "\n".join(rows)


def write_report(report: AggregateReport, output_dir: Path | str) -> Path:
    out = ensure_writable_dir(output_dir)
    atomic_write_bytes(out / CSV_NAME, report_csv(report).encode("utf-8"))
    return write_json(out / REPORT_NAME, report)
