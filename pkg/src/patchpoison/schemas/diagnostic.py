from __future__ import annotations

from pydantic import BaseModel, Field

from patchpoison.schemas.manifest import SCHEMA_VERSION, Region


class EstimatorResult(BaseModel):
    """Outcome of one fundamental-matrix estimator on a match set."""

    method: str
    success: bool = False
    message: str | None = None
    inlier_count: int = 0
    inlier_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    median_sampson_px: float | None = None
    rotation_error_deg: float | None = Field(default=None, ge=0.0)
    translation_error_deg: float | None = Field(default=None, ge=0.0)


class DiagnosticReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    image_a: str
    image_b: str
    keypoints_a: int = 0
    keypoints_b: int = 0
    total_matches: int = 0
    patch_matches: int = 0
    patch_match_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    area_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    region_a: Region | None = None
    region_b: Region | None = None
    patch_residual_median_px: float | None = None
    scene_residual_median_px: float | None = None
    residual_reference: str | None = None
    ransac: EstimatorResult
    direct: EstimatorResult
    flags: list[str] = Field(default_factory=list)


class DiagnosticSummary(BaseModel):
    schema_version: int = SCHEMA_VERSION
    pair_count: int = 0
    failed_pairs: int = 0
    mean_patch_match_fraction: float | None = None
    mean_area_fraction: float | None = None
    mean_rotation_error_ransac_deg: float | None = None
    mean_rotation_error_direct_deg: float | None = None
    reports: list[DiagnosticReport] = Field(default_factory=list)
    errors: dict[str, str] = Field(default_factory=dict)


class KeypointRecord(BaseModel):
    x: float
    y: float
    scale: float
    orientation: float
    response: float


class MatchRecord(BaseModel):
    index_a: int
    index_b: int
    distance: float
    ratio: float


class FeatureDump(BaseModel):
    """Debug dump of the detect/describe/match chain for one image pair.

    ``keypoints_*`` lists only described keypoints, aligned with ``descriptors_*``;
    match indices refer to those rows.
    """

    schema_version: int = SCHEMA_VERSION
    image_a: str
    image_b: str
    keypoints_a: list[KeypointRecord] = Field(default_factory=list)
    keypoints_b: list[KeypointRecord] = Field(default_factory=list)
    descriptors_a: list[list[float]] = Field(default_factory=list)
    descriptors_b: list[list[float]] = Field(default_factory=list)
    matches: list[MatchRecord] = Field(default_factory=list)
