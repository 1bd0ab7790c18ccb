"""PSNR, Gaussian-window SSIM and cross-pair aggregation."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from patchpoison.core.errors import InvalidInputError
from patchpoison.core.image import ImageBuffer
from patchpoison.schemas.patch import BackgroundPolicy
from patchpoison.schemas.report import AggregateReport, Direction, MetricPair, SsimParameters

logger = logging.getLogger(__name__)

SSIM_PARAMETERS = SsimParameters()


def _check_shapes(a: ImageBuffer, b: ImageBuffer) -> None:
    if not a.same_shape(b):
        raise InvalidInputError(f"shape mismatch: {a.pixels.shape} vs {b.pixels.shape}")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """``10 log10(255^2 / MSE)`` over every sample; ``inf`` for identical images."""
    _check_shapes(a, b)
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def gaussian_window(size: int = SSIM_PARAMETERS.window, sigma: float = SSIM_PARAMETERS.sigma) -> np.ndarray:
    offsets = np.arange(size) - (size - 1) / 2
    g = np.exp(-(offsets**2) / (2 * sigma * sigma))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_plane(x: np.ndarray, y: np.ndarray, window: np.ndarray, params: SsimParameters) -> float:
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2
    pad = window.shape[0] // 2

    def filt(values: np.ndarray) -> np.ndarray:
        # interior outputs only see in-image samples, same as a 'valid' sliding window
        out = ndimage.correlate(values, window, mode="reflect")
        return out[pad : values.shape[0] - pad, pad : values.shape[1] - pad]

    mu_x = filt(x)
    mu_y = filt(y)
    sigma_x = filt(x * x) - mu_x * mu_x
    sigma_y = filt(y * y) - mu_y * mu_y
    sigma_xy = filt(x * y) - mu_x * mu_y
    numerator = (2 * mu_x * mu_y + c1) * (2 * sigma_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (sigma_x + sigma_y + c2)
    return float(np.mean(numerator / denominator))


def ssim(a: ImageBuffer, b: ImageBuffer, params: SsimParameters = SSIM_PARAMETERS) -> float:
    """Mean SSIM with a Gaussian window, averaged over channels."""
    _check_shapes(a, b)
    if min(a.width, a.height) < params.window:
        raise InvalidInputError(f"images must be at least {params.window}px on each side, got {a.width}x{a.height}")
    window = gaussian_window(params.window, params.sigma)
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)
    values = [_ssim_plane(x[:, :, c], y[:, :, c], window, params) for c in range(a.channels)]
    return float(np.mean(values))


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    arr = np.asarray(values, dtype=np.float64)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return float(np.mean(arr)), std


def evaluate_pairs(
    set_a: Sequence[ImageBuffer],
    set_b: Sequence[ImageBuffer],
    *,
    names: Sequence[str] | None = None,
    lpips: Mapping[str, float] | None = None,
    direction: Direction = Direction.POISONED_VS_ORIGINAL,
    background: BackgroundPolicy | None = None,
    area_fraction: float | None = None,
    workers: int = 1,
) -> AggregateReport:
    """Per-pair SSIM / PSNR plus mean and sample standard deviation.

    PSNR statistics use finite values only; when every pair is identical the
    mean is reported as infinity. LPIPS is taken from ``lpips`` by pair name.
    """
    if len(set_a) != len(set_b):
        raise InvalidInputError(f"image count mismatch: {len(set_a)} vs {len(set_b)}")
    if names is None:
        names = [f"{i:04d}" for i in range(len(set_a))]
    if len(names) != len(set_a):
        raise InvalidInputError("names must align with the image sets")
    for name, a, b in zip(names, set_a, set_b):
        if not a.same_shape(b):
            raise InvalidInputError(f"shape mismatch for {name}: {a.pixels.shape} vs {b.pixels.shape}")

    def measure(index: int) -> MetricPair:
        name = names[index]
        score = lpips.get(name) if lpips is not None else None
        return MetricPair(name=name, ssim=ssim(set_a[index], set_b[index]), psnr_db=psnr(set_a[index], set_b[index]), lpips=score)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        pairs = list(pool.map(measure, range(len(set_a))))

    ssim_mean, ssim_std = _mean_std([p.ssim for p in pairs])
    finite = [p.psnr_db for p in pairs if math.isfinite(p.psnr_db)]
    infinite = len(pairs) - len(finite)
    if finite:
        psnr_mean, psnr_std = _mean_std(finite)
    else:
        psnr_mean, psnr_std = (math.inf, 0.0) if pairs else (math.nan, math.nan)
    scores = [p.lpips for p in pairs if p.lpips is not None]
    lpips_mean, lpips_std = _mean_std(scores) if scores else (None, None)
    logger.debug("Evaluated %s pairs (%s identical)", len(pairs), infinite)
    return AggregateReport(
        direction=direction,
        pairs=pairs,
        ssim_mean=ssim_mean,
        ssim_std=ssim_std,
        psnr_mean=psnr_mean,
        psnr_std=psnr_std,
        psnr_infinite_count=infinite,
        lpips_mean=lpips_mean,
        lpips_std=lpips_std,
        ssim_parameters=SSIM_PARAMETERS,
        background=background,
        area_fraction=area_fraction,
    )
