from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PatternKind(StrEnum):
    CHECKERBOARD = "checkerboard"
    CIRCLES = "circles"
    DIAGONAL_LINES = "diagonal_lines"
    PARALLEL_LINES = "parallel_lines"
    INTERSECTING_LINES = "intersecting_lines"
    CHECKERBOARD_PLUS_CIRCLES = "checkerboard_plus_circles"
    CHECKERBOARD_PLUS_DIAGONALS = "checkerboard_plus_diagonals"
    DIAGONALS_PLUS_CIRCLES = "diagonals_plus_circles"
    ALL_PATTERNS = "all_patterns"


class Corner(StrEnum):
    TOP_LEFT = "top_left"
    TOP_RIGHT = "top_right"
    BOTTOM_LEFT = "bottom_left"
    BOTTOM_RIGHT = "bottom_right"


class BackgroundPolicy(StrEnum):
    BLACK = "black"
    WHITE = "white"
    KEEP = "keep"


class PatchSpec(BaseModel):
    """Full parameterization of a poisoning patch.

    ``size_fraction`` sizes the patch relative to each image's width
    (``P = max(1, round(fraction * width))``); when it is set ``size_px`` is
    only the nominal value and placement uses the resolved size.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: PatternKind = PatternKind.CHECKERBOARD
    size_px: int = Field(default=12, ge=1)
    block_px: int = Field(default=4, ge=1)
    alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    bright_level: int = Field(default=255, ge=0, le=255)
    dark_level: int = Field(default=0, ge=0, le=255)
    corner: Corner = Corner.TOP_LEFT
    margin_px: int = Field(default=0, ge=0)
    size_fraction: float | None = Field(default=None, gt=0.0, le=1.0)

    @field_validator("kind", "corner", mode="before")
    @classmethod
    def _normalize_enum(cls, value: object) -> object:
        if isinstance(value, str):
            return value.strip().lower().replace("-", "_")
        return value

    @model_validator(mode="after")
    def _check_levels(self) -> PatchSpec:
        if self.dark_level > self.bright_level:
            raise ValueError("dark_level must not exceed bright_level")
        if self.size_fraction is None and self.block_px > self.size_px:
            raise ValueError("block_px must not exceed size_px")
        return self
