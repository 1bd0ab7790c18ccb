"""Procedural pattern masks for the poisoning patch.

Every rasterizer works on a ``P x P`` integer grid with the origin at the
top-left pixel and returns a boolean "bright" map; levels are applied last so
two-level kinds contain exactly ``dark_level/255`` and ``bright_level/255``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from patchpoison.core.errors import InvalidParameterError
from patchpoison.schemas.patch import PatchSpec, PatternKind


@dataclass(frozen=True, slots=True, eq=False)
class PatternMask:
    """Normalized ``P x P`` intensities in ``[0, 1]``."""

    cells: np.ndarray

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])


def _check(size_px: int, block_px: int) -> None:
    if size_px < 1:
        raise InvalidParameterError(f"patch size must be >= 1, got {size_px}")
    if block_px < 1 or block_px > size_px:
        raise InvalidParameterError(f"block size must lie in [1, {size_px}], got {block_px}")


def _grid(size_px: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size_px, 0:size_px]
    return xs, ys


def checkerboard_cells(size_px: int, block_px: int) -> np.ndarray:
    xs, ys = _grid(size_px)
    return (xs // block_px + ys // block_px) % 2 == 0


def circle_cells(size_px: int, block_px: int) -> np.ndarray:
    # rings of width b every 2b around the patch centre; the centre disc is bright
    xs, ys = _grid(size_px)
    centre = (size_px - 1) / 2.0
    radius = np.hypot(xs - centre, ys - centre)
    return np.floor(radius / block_px).astype(np.int64) % 2 == 0


def diagonal_cells(size_px: int, block_px: int) -> np.ndarray:
    xs, ys = _grid(size_px)
    return ((xs + ys) // block_px) % 2 == 0


def anti_diagonal_cells(size_px: int, block_px: int) -> np.ndarray:
    xs, ys = _grid(size_px)
    return (np.floor_divide(xs - ys, block_px)) % 2 == 0


def parallel_cells(size_px: int, block_px: int) -> np.ndarray:
    _, ys = _grid(size_px)
    return (ys // block_px) % 2 == 0


def intersecting_cells(size_px: int, block_px: int) -> np.ndarray:
    return diagonal_cells(size_px, block_px) | anti_diagonal_cells(size_px, block_px)


Rasterizer = Callable[[int, int], np.ndarray]

# Combination kinds are the pixel-wise maximum of their constituents.
PATTERN_COMPONENTS: dict[PatternKind, tuple[Rasterizer, ...]] = {
    PatternKind.CHECKERBOARD: (checkerboard_cells,),
    PatternKind.CIRCLES: (circle_cells,),
    PatternKind.DIAGONAL_LINES: (diagonal_cells,),
    PatternKind.PARALLEL_LINES: (parallel_cells,),
    PatternKind.INTERSECTING_LINES: (intersecting_cells,),
    PatternKind.CHECKERBOARD_PLUS_CIRCLES: (checkerboard_cells, circle_cells),
    PatternKind.CHECKERBOARD_PLUS_DIAGONALS: (checkerboard_cells, diagonal_cells),
    PatternKind.DIAGONALS_PLUS_CIRCLES: (diagonal_cells, circle_cells),
    PatternKind.ALL_PATTERNS: (
        checkerboard_cells,
        circle_cells,
        diagonal_cells,
        parallel_cells,
        intersecting_cells,
    ),
}


def _levels(bright: np.ndarray, bright_level: int, dark_level: int) -> np.ndarray:
    if not 0 <= dark_level <= bright_level <= 255:
        raise InvalidParameterError(
            f"levels must satisfy 0 <= dark <= bright <= 255, got dark={dark_level} bright={bright_level}"
        )
    return np.where(bright, bright_level / 255.0, dark_level / 255.0)


def generate_checkerboard(size_px: int, block_px: int, bright: int = 255, dark: int = 0) -> PatternMask:
    _check(size_px, block_px)
    return PatternMask(_levels(checkerboard_cells(size_px, block_px), bright, dark))


def generate_pattern(spec: PatchSpec, size_px: int | None = None) -> PatternMask:
    """Rasterize ``spec``; ``size_px`` overrides the spec size (resolved fractional sizing)."""
    size = spec.size_px if size_px is None else size_px
    _check(size, spec.block_px)
    components = PATTERN_COMPONENTS[PatternKind(spec.kind)]
    cells = np.zeros((size, size))
    for rasterize in components:
        cells = np.maximum(cells, _levels(rasterize(size, spec.block_px), spec.bright_level, spec.dark_level))
    return PatternMask(cells)
