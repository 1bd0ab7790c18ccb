"""Directory-level two-view diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from patchpoison.core.config import FeatureConfig, RansacConfig
from patchpoison.core.diagnostics import PairAnalysis, analyze_pair
from patchpoison.core.errors import InvalidInputError
from patchpoison.core.features import FeatureSet
from patchpoison.core.geometry import CameraModel, ground_truth
from patchpoison.dataset.loader import SceneDataset, load_scene, read_cameras
from patchpoison.dataset.writer import ensure_writable_dir, write_json
from patchpoison.schemas.diagnostic import (
    DiagnosticReport,
    DiagnosticSummary,
    FeatureDump,
    KeypointRecord,
    MatchRecord,
)
from patchpoison.schemas.manifest import PoisonManifest, Region
from patchpoison.schemas.patch import BackgroundPolicy
from patchpoison.services.evaluation import find_manifest

logger = logging.getLogger(__name__)

SUMMARY_NAME = "diagnostics.json"
PAIRS_DIR = "pairs"
FEATURES_DIR = "features"


@dataclass(slots=True)
class DiagnoseOptions:
    pairs: int | None = None
    ground_truth_path: Path | None = None
    manifest_path: Path | None = None
    dump_features: bool = False
    background: BackgroundPolicy | None = None
    feature_config: FeatureConfig | None = None
    ransac_config: RansacConfig | None = None


def select_pairs(count: int, limit: int | None) -> list[tuple[int, int]]:
    """All pairs ``i < j``; with ``limit`` the first ``limit`` consecutive pairs instead."""
    if limit is None:
        return [(i, j) for i in range(count) for j in range(i + 1, count)]
    return [(i, i + 1) for i in range(min(limit, count - 1))]


def read_manifest(path: Path | str) -> PoisonManifest:
    path = Path(path)
    try:
        return PoisonManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except (OSError, ValidationError) as exc:
        raise InvalidInputError(f"cannot read poison manifest {path}: {exc}") from exc


def manifest_regions(manifest: PoisonManifest | None) -> dict[str, Region]:
    if manifest is None:
        return {}
    return {e.source: e.region for e in manifest.entries if e.region is not None and not e.error}


def _pair_name(a: str, b: str) -> str:
    def stem(rel: str) -> str:
        return rel.rsplit(".", 1)[0].replace("/", "_")

    return f"{stem(a)}__{stem(b)}"


def feature_dump(analysis: PairAnalysis) -> FeatureDump:
    def records(features: FeatureSet) -> list[KeypointRecord]:
        return [
            KeypointRecord(x=kp.x, y=kp.y, scale=kp.scale, orientation=kp.orientation, response=kp.response)
            for kp in features.keypoints
        ]

    return FeatureDump(
        image_a=analysis.report.image_a,
        image_b=analysis.report.image_b,
        keypoints_a=records(analysis.features_a),
        keypoints_b=records(analysis.features_b),
        descriptors_a=np.round(analysis.features_a.descriptors, 6).tolist(),
        descriptors_b=np.round(analysis.features_b.descriptors, 6).tolist(),
        matches=[
            MatchRecord(index_a=m.index_a, index_b=m.index_b, distance=m.distance, ratio=m.ratio)
            for m in analysis.matches
        ],
    )


def _cameras(dataset: SceneDataset, options: DiagnoseOptions) -> list[CameraModel] | None:
    if options.ground_truth_path is None:
        return dataset.cameras
    gt = Path(options.ground_truth_path)
    if not gt.is_file():
        raise InvalidInputError(f"ground-truth file {gt} does not exist")
    cameras, warnings = read_cameras([gt], gt.parent, dataset.relative_paths, image_root=dataset.root)
    for warning in warnings:
        logger.warning("%s", warning)
    return cameras


def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def diagnose_directory(
    input_dir: Path | str, output_dir: Path | str, options: DiagnoseOptions | None = None
) -> DiagnosticSummary:
    """Diagnose image pairs of one scene; per-pair failures are recorded, not raised."""
    options = options or DiagnoseOptions()
    dataset = load_scene(input_dir, options.background)
    if len(dataset) < 2:
        raise InvalidInputError(f"diagnosis needs at least 2 images, found {len(dataset)} in {dataset.root}")
    out = ensure_writable_dir(output_dir)
    manifest = find_manifest(dataset.root) if options.manifest_path is None else read_manifest(options.manifest_path)
    regions = manifest_regions(manifest)
    cameras = _cameras(dataset, options)

    reports: list[DiagnosticReport] = []
    errors: dict[str, str] = {}
    for i, j in select_pairs(len(dataset), options.pairs):
        name_a, name_b = dataset.relative_paths[i], dataset.relative_paths[j]
        pair = _pair_name(name_a, name_b)
        region_a = regions.get(name_a) or regions.get(name_b)
        region_b = regions.get(name_b) or region_a
        truth = ground_truth(cameras[i], cameras[j]) if cameras is not None else None
        try:
            analysis = analyze_pair(
                dataset.read(i),
                dataset.read(j),
                region_a,
                region_b,
                truth,
                feature_config=options.feature_config,
                ransac_config=options.ransac_config,
                names=(name_a, name_b),
            )
        except Exception as exc:
            logger.exception("Failed to diagnose %s", pair)
            errors[pair] = f"{type(exc).__name__}: {exc}"
            continue
        reports.append(analysis.report)
        write_json(out / PAIRS_DIR / f"{pair}.json", analysis.report)
        if options.dump_features:
            write_json(out / FEATURES_DIR / f"{pair}.json", feature_dump(analysis))

    summary = DiagnosticSummary(
        pair_count=len(reports) + len(errors),
        failed_pairs=len(errors),
        mean_patch_match_fraction=_mean([r.patch_match_fraction for r in reports]),
        mean_area_fraction=_mean([r.area_fraction for r in reports]),
        mean_rotation_error_ransac_deg=_mean([r.ransac.rotation_error_deg for r in reports]),
        mean_rotation_error_direct_deg=_mean([r.direct.rotation_error_deg for r in reports]),
        reports=reports,
        errors=errors,
    )
    write_json(out / SUMMARY_NAME, summary)
    logger.info("Diagnosed %s pairs (%s failed)", summary.pair_count, summary.failed_pairs)
    return summary
