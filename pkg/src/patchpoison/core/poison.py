"""Patch embedding and dataset-level poisoning."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from patchpoison.core.errors import InvalidParameterError, PatchPlacementError
from patchpoison.core.image import ImageBuffer, round_half_up
from patchpoison.core.pattern import PatternMask, generate_pattern
from patchpoison.dataset.codecs import load_image
from patchpoison.dataset.writer import ensure_writable_dir, write_image, write_json
from patchpoison.schemas.manifest import ManifestEntry, PoisonManifest, Region
from patchpoison.schemas.patch import BackgroundPolicy, Corner, PatchSpec

logger = logging.getLogger(__name__)

MANIFEST_NAME = "poison_manifest.json"


def resolve_patch_size(spec: PatchSpec, image_width: int) -> int:
    if spec.size_fraction is None:
        return spec.size_px
    return max(1, int(Decimal(str(spec.size_fraction * image_width)).quantize(Decimal(1), rounding=ROUND_HALF_UP)))


def patch_area_fraction(size_px: int, width: int, height: int) -> float:
    """Share of a ``width x height`` image covered by a ``size_px`` square patch."""
    return (size_px * size_px) / float(width * height)


def patch_region(width: int, height: int, size_px: int, corner: Corner | str, margin_px: int) -> Region:
    """Region Ω for a ``size_px`` patch; raises when it does not fit."""
    if size_px + margin_px > width or size_px + margin_px > height:
        raise PatchPlacementError(
            f"{size_px}px patch with {margin_px}px margin does not fit a {width}x{height} image"
        )
    corner = Corner(corner)
    x = margin_px if corner in (Corner.TOP_LEFT, Corner.BOTTOM_LEFT) else width - margin_px - size_px
    y = margin_px if corner in (Corner.TOP_LEFT, Corner.TOP_RIGHT) else height - margin_px - size_px
    return Region(x=x, y=y, w=size_px, h=size_px)


def embed_patch(
    image: ImageBuffer,
    mask: PatternMask,
    alpha: float,
    corner: Corner | str = Corner.TOP_LEFT,
    margin: int = 0,
) -> ImageBuffer:
    """Blend ``mask`` into ``image``: ``out = round(in * (1 - a*m) + a*m*255)`` inside Ω.

    Only color channels are touched; an alpha plane passes through unchanged.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if mask.width != mask.height:
        raise InvalidParameterError("pattern mask must be square")
    region = patch_region(image.width, image.height, mask.width, corner, margin)
    pixels = np.array(image.pixels, copy=True)
    colors = image.color_channels
    window = pixels[region.y : region.y + region.h, region.x : region.x + region.w, :colors].astype(np.float64)
    weight = (alpha * mask.cells)[:, :, None]
    blended = window * (1.0 - weight) + weight * 255.0
    pixels[region.y : region.y + region.h, region.x : region.x + region.w, :colors] = round_half_up(blended)
    return ImageBuffer(pixels)


def poison_count(total: int, ratio: float) -> int:
    """``round(ratio * total)`` with halves rounded up (7 images at 0.5 -> 4)."""
    if not 0.0 < ratio <= 1.0:
        raise InvalidParameterError(f"poison ratio must lie in (0, 1], got {ratio}")
    exact = Decimal(str(ratio)) * total
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def select_poisoned(total: int, ratio: float, seed: int) -> set[int]:
    """Seeded shuffle prefix of ``range(total)``."""
    order = np.random.default_rng(seed).permutation(total)
    return {int(i) for i in order[: poison_count(total, ratio)]}


def _poison_one(
    source: Path,
    destination: Path,
    relative: str,
    spec: PatchSpec,
    poisoned: bool,
    background: BackgroundPolicy,
) -> ManifestEntry:
    entry = ManifestEntry(source=relative, poisoned=poisoned)
    try:
        image = load_image(source, background)
        if poisoned:
            size = resolve_patch_size(spec, image.width)
            region = patch_region(image.width, image.height, size, spec.corner, spec.margin_px)
            image = embed_patch(image, generate_pattern(spec, size), spec.alpha, spec.corner, spec.margin_px)
            entry.region = region
            entry.size_px = size
            entry.area_fraction = patch_area_fraction(size, image.width, image.height)
        write_image(destination, image)
        entry.output = relative
    except Exception as exc:
        logger.exception("Failed to process %s", source)
        entry.error = f"{type(exc).__name__}: {exc}"
    return entry


def poison_dataset(
    image_paths: Sequence[Path | str],
    spec: PatchSpec,
    ratio: float,
    seed: int,
    output_dir: Path | str,
    *,
    root: Path | str | None = None,
    background: BackgroundPolicy = BackgroundPolicy.KEEP,
    workers: int = 1,
    notes: Sequence[str] = (),
) -> PoisonManifest:
    """Poison ``round(ratio * N)`` images chosen by a seeded shuffle and copy the rest.

    Outputs mirror the paths relative to ``root`` (file names when no root is
    given); entry order equals input order whatever the worker count.
    """
    out = ensure_writable_dir(output_dir)
    paths = [Path(p) for p in image_paths]
    chosen = select_poisoned(len(paths), ratio, seed)
    base = Path(root) if root is not None else None
    relatives = [(p.relative_to(base) if base is not None else Path(p.name)).as_posix() for p in paths]

    def job(index: int) -> ManifestEntry:
        relative = relatives[index]
        return _poison_one(paths[index], out / relative, relative, spec, index in chosen, background)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        entries = list(pool.map(job, range(len(paths))))

    failed = sum(1 for e in entries if e.error)
    manifest = PoisonManifest(
        spec=spec,
        ratio=ratio,
        seed=seed,
        background=background,
        input_dir=str(base) if base is not None else None,
        output_dir=str(output_dir),
        total=len(entries),
        poisoned_count=sum(1 for e in entries if e.poisoned and not e.error),
        failed_count=failed,
        notes=list(notes),
        entries=entries,
    )
    write_json(out / MANIFEST_NAME, manifest)
    logger.info("Poisoned %s of %s images (%s failed)", manifest.poisoned_count, manifest.total, failed)
    return manifest
