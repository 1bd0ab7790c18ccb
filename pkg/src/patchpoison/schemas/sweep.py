from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from patchpoison.schemas.manifest import SCHEMA_VERSION
from patchpoison.schemas.patch import BackgroundPolicy, PatchSpec


class SweepAxis(StrEnum):
    PATCH_SIZE = "patch_size"
    BLOCK_SIZE = "block_size"
    CONTRAST = "contrast"
    ALPHA = "alpha"
    PATTERN_KIND = "pattern_kind"
    POISON_RATIO = "poison_ratio"
    SIZE_FRACTION = "size_fraction"


# PatchSpec field driven by each axis; the ratio axis drives the dataset ratio instead.
AXIS_FIELDS: dict[SweepAxis, str | None] = {
    SweepAxis.PATCH_SIZE: "size_px",
    SweepAxis.BLOCK_SIZE: "block_px",
    SweepAxis.CONTRAST: "bright_level",
    SweepAxis.ALPHA: "alpha",
    SweepAxis.PATTERN_KIND: "kind",
    SweepAxis.POISON_RATIO: None,
    SweepAxis.SIZE_FRACTION: "size_fraction",
}


class SweepConfig(BaseModel):
    """One ablation axis swept over explicit values around a base patch."""

    axis: SweepAxis
    values: list[float | int | str]
    base: PatchSpec = Field(default_factory=PatchSpec)
    seed: int = 0
    ratio: float = Field(default=1.0, gt=0.0, le=1.0)
    input_dir: str
    output_dir: str | None = None
    background: BackgroundPolicy | None = None
    diagnose_pairs: int = Field(default=1, ge=0)
    ground_truth: str | None = None
    parallel: bool = False
    workers: int | None = Field(default=None, ge=1)

    @field_validator("axis", mode="before")
    @classmethod
    def _normalize_axis(cls, value: object) -> object:
        if isinstance(value, str):
            return value.strip().lower().replace("-", "_")
        return value

    @model_validator(mode="after")
    def _check_values(self) -> SweepConfig:
        if not self.values:
            raise ValueError("sweep values must not be empty")
        for value in self.values:
            self.cell(value)
        return self

    def cell(self, value: float | int | str) -> tuple[PatchSpec, float]:
        """Patch spec and poisoning ratio for one axis value."""
        field = AXIS_FIELDS[self.axis]
        if field is None:
            ratio = float(value)
            if not 0.0 < ratio <= 1.0:
                raise ValueError(f"poison ratio {value!r} outside (0, 1]")
            return self.base, ratio
        payload = self.base.model_dump()
        payload[field] = value
        try:
            spec = PatchSpec.model_validate(payload)
        except ValidationError as exc:
            raise ValueError(f"value {value!r} is invalid for axis {self.axis.value}: {exc}") from exc
        return spec, self.ratio


class SweepRow(BaseModel):
    axis: SweepAxis
    value: float | int | str
    status: str = "ok"
    error: str | None = None
    output_dir: str | None = None
    total: int = 0
    poisoned_count: int = 0
    ssim_mean: float | None = None
    ssim_std: float | None = None
    psnr_mean: float | str | None = None
    psnr_std: float | str | None = None
    lpips_mean: float | None = None
    patch_match_fraction: float | None = None
    area_fraction: float | None = None
    rotation_error_ransac_deg: float | None = None
    rotation_error_direct_deg: float | None = None


class SweepReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    axis: SweepAxis
    seed: int
    rows: list[SweepRow] = Field(default_factory=list)
    failed_cells: int = 0
