from __future__ import annotations

import math
from enum import StrEnum

from pydantic import BaseModel, Field, field_serializer, field_validator

from patchpoison.schemas.manifest import SCHEMA_VERSION
from patchpoison.schemas.patch import BackgroundPolicy


class Direction(StrEnum):
    POISONED_VS_ORIGINAL = "poisoned_vs_original"
    POISONED_VS_RENDER = "poisoned_vs_render"


def _parse_inf(value: object) -> object:
    if isinstance(value, str) and value.strip().lower() in {"inf", "+inf", "infinity"}:
        return math.inf
    return value


def _dump_inf(value: float | None) -> float | str | None:
    if value is not None and math.isinf(value):
        return "inf"
    return value


class MetricPair(BaseModel):
    name: str
    ssim: float
    psnr_db: float
    lpips: float | None = None

    @field_validator("psnr_db", mode="before")
    @classmethod
    def _psnr_inf(cls, value: object) -> object:
        return _parse_inf(value)

    @field_serializer("psnr_db")
    def _psnr_out(self, value: float) -> float | str | None:
        return _dump_inf(value)


class SsimParameters(BaseModel):
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 255.0


class AggregateReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    direction: Direction = Direction.POISONED_VS_ORIGINAL
    pairs: list[MetricPair] = Field(default_factory=list)
    ssim_mean: float
    ssim_std: float
    psnr_mean: float
    psnr_std: float
    psnr_infinite_count: int = 0
    lpips_mean: float | None = None
    lpips_std: float | None = None
    ssim_parameters: SsimParameters = Field(default_factory=SsimParameters)
    background: BackgroundPolicy | None = None
    area_fraction: float | None = None

    @field_validator("psnr_mean", "psnr_std", mode="before")
    @classmethod
    def _psnr_inf(cls, value: object) -> object:
        return _parse_inf(value)

    @field_serializer("psnr_mean", "psnr_std")
    def _psnr_out(self, value: float) -> float | str | None:
        return _dump_inf(value)
