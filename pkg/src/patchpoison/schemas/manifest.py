from __future__ import annotations

from pydantic import BaseModel, Field

from patchpoison.schemas.patch import BackgroundPolicy, PatchSpec

SCHEMA_VERSION = 1


class Region(BaseModel):
    """Axis-aligned pixel rectangle ``(x, y, w, h)``."""

    x: int
    y: int
    w: int
    h: int

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h


class ManifestEntry(BaseModel):
    source: str
    output: str | None = None
    poisoned: bool = False
    region: Region | None = None
    size_px: int | None = None
    area_fraction: float | None = None
    error: str | None = None


class PoisonManifest(BaseModel):
    schema_version: int = SCHEMA_VERSION
    spec: PatchSpec
    ratio: float = Field(gt=0.0, le=1.0)
    seed: int
    background: BackgroundPolicy = BackgroundPolicy.KEEP
    input_dir: str | None = None
    output_dir: str | None = None
    total: int = 0
    poisoned_count: int = 0
    failed_count: int = 0
    notes: list[str] = Field(default_factory=list)
    entries: list[ManifestEntry] = Field(default_factory=list)


class PerturbationEntry(BaseModel):
    source: str
    output: str | None = None
    error: str | None = None


class PerturbationManifest(BaseModel):
    """Record of a baseline perturbation run over a dataset."""

    schema_version: int = SCHEMA_VERSION
    kind: str
    parameters: dict[str, float | int] = Field(default_factory=dict)
    background: BackgroundPolicy = BackgroundPolicy.KEEP
    input_dir: str | None = None
    output_dir: str | None = None
    entries: list[PerturbationEntry] = Field(default_factory=list)
