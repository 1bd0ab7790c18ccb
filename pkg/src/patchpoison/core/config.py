"""Parameter bundles for the feature pipeline and robust estimation."""

from dataclasses import dataclass


@dataclass(slots=True)
class FeatureConfig:
    octaves: int = 4
    scales_per_octave: int = 3
    sigma0: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    match_ratio: float = 0.75
    cross_check: bool = True
    # double the input before the first octave so native-scale extrema are reachable
    upsample: bool = True


@dataclass(slots=True)
class RansacConfig:
    threshold_px: float = 1.0
    max_iters: int = 2000
    confidence: float = 0.999
    seed: int = 0
