"""Atomic persistence of images and JSON artifacts."""

from __future__ import annotations

import json
import logging
import os
import tempfile
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from pydantic import BaseModel

from patchpoison.core.errors import DatasetError
from patchpoison.core.image import ImageBuffer
from patchpoison.dataset.codecs import encode_image
from patchpoison.schemas import (
    AggregateReport,
    DiagnosticSummary,
    PerturbationManifest,
    PoisonManifest,
    SweepReport,
)

if TYPE_CHECKING:
    from patchpoison.dataset.loader import SceneDataset

logger = logging.getLogger(__name__)

ARTIFACT_NAMES: dict[type[BaseModel], str] = {
    PoisonManifest: "poison_manifest.json",
    PerturbationManifest: "perturb_manifest.json",
    AggregateReport: "evaluation_report.json",
    DiagnosticSummary: "diagnostics.json",
    SweepReport: "sweep_report.json",
}


@dataclass(slots=True)
class WriteSummary:
    written: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)
    artifact: str | None = None

    @property
    def ok(self) -> bool:
        return not self.failed


def ensure_writable_dir(path: Path | str) -> Path:
    """Create ``path`` if needed and prove it accepts new files."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path, prefix=".write-check-", delete=True):
            pass
    except OSError as exc:
        raise DatasetError(f"output directory {path} is not writable: {exc}") from exc
    return path


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise


def write_image(path: Path | str, image: ImageBuffer) -> None:
    path = Path(path)
    atomic_write_bytes(path, encode_image(image, path.suffix))


def dump_json(model: BaseModel) -> str:
    return json.dumps(model.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: Path | str, model: BaseModel) -> Path:
    path = Path(path)
    atomic_write_bytes(path, dump_json(model).encode("utf-8"))
    return path


def artifact_name(model: BaseModel) -> str:
    return ARTIFACT_NAMES.get(type(model), f"{type(model).__name__.lower()}.json")


def write_outputs(
    dataset: SceneDataset,
    images: Sequence[ImageBuffer | None],
    artifact: BaseModel | None,
    out_dir: Path | str,
) -> WriteSummary:
    """Mirror ``dataset`` filenames under ``out_dir`` and write the JSON sidecar.

    ``images`` is aligned with the dataset order; ``None`` skips an image.
    Per-file failures are collected in the summary instead of aborting.
    """
    if len(images) != len(dataset):
        raise DatasetError(f"expected {len(dataset)} images, got {len(images)}")
    out = ensure_writable_dir(out_dir)
    summary = WriteSummary()
    for relative, image in zip(dataset.relative_paths, images):
        if image is None:
            continue
        try:
            write_image(out / relative, image)
        except Exception as exc:
            logger.exception("Failed to write %s", relative)
            summary.failed[relative] = str(exc)
        else:
            summary.written.append(relative)
    if artifact is not None:
        summary.artifact = str(write_json(out / artifact_name(artifact), artifact))
    if summary.failed:
        logger.warning("Wrote %s of %s images", len(summary.written), len(summary.written) + len(summary.failed))
    return summary
