"""Two-view diagnosis of how a patch region feeds the correspondence chain."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from patchpoison.core.config import FeatureConfig, RansacConfig
from patchpoison.core.errors import DegenerateConfigurationError, InvalidInputError, PatchPoisonError
from patchpoison.core.features import FeatureSet, MatchPair, extract_features, match
from patchpoison.core.geometry import (
    MIN_MATCHES,
    FundamentalEstimate,
    GroundTruth,
    eight_point,
    ransac_fundamental,
    recover_pose,
    rotation_error_deg,
    sampson_distance,
    translation_error_deg,
)
from patchpoison.core.image import ImageBuffer
from patchpoison.core.synthetic import SyntheticTwoView, inject_spurious_matches
from patchpoison.schemas.diagnostic import EstimatorResult, DiagnosticReport
from patchpoison.schemas.manifest import Region

logger = logging.getLogger(__name__)

CONTAMINATION_LEVELS = (0.0, 0.25, 0.5, 0.75)


@dataclass(frozen=True, slots=True, eq=False)
class PairAnalysis:
    report: DiagnosticReport
    features_a: FeatureSet
    features_b: FeatureSet
    matches: list[MatchPair]


def _median(values: np.ndarray) -> float | None:
    return float(np.median(values)) if values.size else None


def _estimator_result(
    method: str,
    estimate: FundamentalEstimate,
    pts_a: np.ndarray,
    pts_b: np.ndarray,
    truth: GroundTruth | None,
    flags: list[str],
) -> EstimatorResult:
    result = EstimatorResult(
        method=method,
        success=estimate.success,
        message=estimate.message,
        inlier_count=len(estimate.inliers),
        inlier_fraction=estimate.inlier_fraction,
        median_sampson_px=estimate.residual_median if estimate.success else None,
    )
    if truth is None or not estimate.success or estimate.F is None:
        return result
    try:
        pose = recover_pose(
            estimate.F, truth.intrinsics_a, pts_a[estimate.inliers], pts_b[estimate.inliers], truth.intrinsics_b
        )
    except PatchPoisonError as exc:
        flags.append(f"{method}_pose_failed")
        result.message = str(exc)
        return result
    result.rotation_error_deg = rotation_error_deg(pose.rotation, truth.rotation)
    result.translation_error_deg = translation_error_deg(pose.translation, truth.translation)
    return result


def _failed(method: str, message: str) -> EstimatorResult:
    return EstimatorResult(method=method, success=False, message=message)


def analyze_pair(
    image_a: ImageBuffer,
    image_b: ImageBuffer,
    region_a: Region | None = None,
    region_b: Region | None = None,
    ground_truth: GroundTruth | SyntheticTwoView | None = None,
    *,
    feature_config: FeatureConfig | None = None,
    ransac_config: RansacConfig | None = None,
    names: tuple[str, str] = ("a", "b"),
) -> PairAnalysis:
    """Detect, describe and match both images, then run RANSAC and the direct 8-point fit.

    A match counts toward the patch when its A end lies in ``region_a`` and its
    B end in ``region_b`` (``region_a`` when omitted). Pose errors are only
    reported when ground truth is available.
    """
    if not image_a.same_shape(image_b):
        raise InvalidInputError(f"image shapes differ: {image_a.pixels.shape} vs {image_b.pixels.shape}")
    fcfg = feature_config or FeatureConfig()
    rcfg = ransac_config or RansacConfig()
    truth = ground_truth.truth() if isinstance(ground_truth, SyntheticTwoView) else ground_truth
    region_b = region_b or region_a

    features_a = extract_features(image_a, fcfg)
    features_b = extract_features(image_b, fcfg)
    matches = match(features_a.descriptors, features_b.descriptors, fcfg.match_ratio, fcfg.cross_check)
    pts_a = features_a.points()[[m.index_a for m in matches]].reshape(-1, 2)
    pts_b = features_b.points()[[m.index_b for m in matches]].reshape(-1, 2)

    in_patch = np.zeros(len(matches), dtype=bool)
    if region_a is not None and region_b is not None:
        in_patch = np.array(
            [region_a.contains(*pa) and region_b.contains(*pb) for pa, pb in zip(pts_a, pts_b)], dtype=bool
        ).reshape(-1)
    total = len(matches)
    patch_matches = int(in_patch.sum())
    area = (region_a.w * region_a.h) / float(image_a.width * image_a.height) if region_a is not None else 0.0

    flags: list[str] = []
    if total < MIN_MATCHES:
        flags.append("insufficient_matches")
        message = f"{total} matches, need >= {MIN_MATCHES}"
        ransac, direct = _failed("ransac", message), _failed("direct", message)
        ransac_estimate = None
    else:
        ransac_estimate = ransac_fundamental(
            pts_a, pts_b, rcfg.threshold_px, rcfg.max_iters, rcfg.seed, rcfg.confidence
        )
        if not ransac_estimate.success:
            flags.append("ransac_failed")
        ransac = _estimator_result("ransac", ransac_estimate, pts_a, pts_b, truth, flags)
        try:
            direct_estimate = eight_point(pts_a, pts_b)
        except PatchPoisonError as exc:
            flags.append("direct_degenerate")
            direct = _failed("direct", str(exc))
        else:
            direct = _estimator_result("direct", direct_estimate, pts_a, pts_b, truth, flags)

    reference: np.ndarray | None = None
    reference_name: str | None = None
    if truth is not None and truth.fundamental is not None:
        reference, reference_name = truth.fundamental, "ground_truth"
    elif ransac_estimate is not None and ransac_estimate.success:
        reference, reference_name = ransac_estimate.F, "ransac"
    patch_residual = scene_residual = None
    if reference is not None and total:
        residuals = np.asarray(sampson_distance(reference, pts_a, pts_b)).reshape(-1)
        patch_residual = _median(residuals[in_patch])
        scene_residual = _median(residuals[~in_patch])

    fraction = patch_matches / total if total else 0.0
    if patch_matches and fraction > area:
        flags.append("patch_overrepresented")

    report = DiagnosticReport(
        image_a=names[0],
        image_b=names[1],
        keypoints_a=len(features_a.keypoints),
        keypoints_b=len(features_b.keypoints),
        total_matches=total,
        patch_matches=patch_matches,
        patch_match_fraction=fraction,
        area_fraction=area,
        region_a=region_a,
        region_b=region_b if region_a is not None else None,
        patch_residual_median_px=patch_residual,
        scene_residual_median_px=scene_residual,
        residual_reference=reference_name,
        ransac=ransac,
        direct=direct,
        flags=flags,
    )
    logger.debug(
        "Pair %s/%s: %s matches, %s in patch, flags=%s", names[0], names[1], total, patch_matches, flags
    )
    return PairAnalysis(report=report, features_a=features_a, features_b=features_b, matches=matches)


def diagnose_pair(
    image_a: ImageBuffer,
    image_b: ImageBuffer,
    region_a: Region | None = None,
    region_b: Region | None = None,
    ground_truth: GroundTruth | SyntheticTwoView | None = None,
    *,
    feature_config: FeatureConfig | None = None,
    ransac_config: RansacConfig | None = None,
    names: tuple[str, str] = ("a", "b"),
) -> DiagnosticReport:
    return analyze_pair(
        image_a,
        image_b,
        region_a,
        region_b,
        ground_truth,
        feature_config=feature_config,
        ransac_config=ransac_config,
        names=names,
    ).report


@dataclass(frozen=True, slots=True)
class ContaminationResult:
    contamination: float
    spurious: int
    rotation_error_deg: float
    translation_error_deg: float
    success: bool
    message: str | None = None


def direct_pose_error(scene: SyntheticTwoView) -> ContaminationResult:
    """No-RANSAC 8-point + pose recovery over every match; failures report infinite error."""
    spurious = len(scene.spurious_a)
    try:
        estimate = eight_point(scene.pts_a, scene.pts_b)
        if estimate.F is None:
            raise DegenerateConfigurationError(estimate.message or "8-point fit returned no model")
        pose = recover_pose(estimate.F, scene.camera_a.intrinsics, scene.pts_a, scene.pts_b, scene.camera_b.intrinsics)
    except PatchPoisonError as exc:
        return ContaminationResult(0.0, spurious, math.inf, math.inf, False, str(exc))
    return ContaminationResult(
        contamination=0.0,
        spurious=spurious,
        rotation_error_deg=rotation_error_deg(pose.rotation, scene.rotation),
        translation_error_deg=translation_error_deg(pose.translation, scene.translation),
        success=True,
    )


def contamination_sweep(
    scene: SyntheticTwoView,
    region: Region,
    levels: Sequence[float] = CONTAMINATION_LEVELS,
    seed: int = 0,
) -> list[ContaminationResult]:
    """Pose error of the direct estimator as identical-coordinate matches are injected."""
    results = []
    for level in levels:
        outcome = direct_pose_error(inject_spurious_matches(scene, region, level, seed))
        results.append(
            ContaminationResult(
                contamination=level,
                spurious=outcome.spurious,
                rotation_error_deg=outcome.rotation_error_deg,
                translation_error_deg=outcome.translation_error_deg,
                success=outcome.success,
                message=outcome.message,
            )
        )
    return results
