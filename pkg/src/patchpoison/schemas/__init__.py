"""Pydantic models for every JSON artifact the toolkit reads or writes."""

from .diagnostic import (
    DiagnosticReport,
    DiagnosticSummary,
    EstimatorResult,
    FeatureDump,
    KeypointRecord,
    MatchRecord,
)
from .manifest import (
    SCHEMA_VERSION,
    ManifestEntry,
    PerturbationEntry,
    PerturbationManifest,
    PoisonManifest,
    Region,
)
from .patch import BackgroundPolicy, Corner, PatchSpec, PatternKind
from .report import AggregateReport, Direction, MetricPair, SsimParameters
from .sweep import SweepAxis, SweepConfig, SweepReport, SweepRow
from .transforms import FrameRecord, TransformsFile

__all__ = [
    "SCHEMA_VERSION",
    "AggregateReport",
    "BackgroundPolicy",
    "Corner",
    "DiagnosticReport",
    "DiagnosticSummary",
    "Direction",
    "FrameRecord",
    "EstimatorResult",
    "FeatureDump",
    "KeypointRecord",
    "ManifestEntry",
    "MatchRecord",
    "MetricPair",
    "PatchSpec",
    "PatternKind",
    "PerturbationEntry",
    "PerturbationManifest",
    "PoisonManifest",
    "Region",
    "SsimParameters",
    "SweepAxis",
    "SweepConfig",
    "SweepReport",
    "SweepRow",
    "TransformsFile",
]
