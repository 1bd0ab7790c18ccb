from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator


class FrameRecord(BaseModel):
    model_config = ConfigDict(extra="ignore")

    file_path: str
    transform_matrix: list[list[float]]

    @field_validator("transform_matrix")
    @classmethod
    def _check_matrix(cls, value: list[list[float]]) -> list[list[float]]:
        if len(value) != 4 or any(len(row) != 4 for row in value):
            raise ValueError("transform_matrix must be 4x4")
        return value


class TransformsFile(BaseModel):
    """Camera metadata in the NeRF-Synthetic ``transforms*.json`` layout (Blender axes, camera-to-world)."""

    model_config = ConfigDict(extra="ignore")

    camera_angle_x: float = Field(gt=0.0)
    frames: list[FrameRecord] = Field(default_factory=list)
