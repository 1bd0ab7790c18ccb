"""Dataset discovery, image codecs and artifact persistence."""

from .loader import SceneDataset, load_scene
from .writer import WriteSummary, write_outputs

__all__ = ["SceneDataset", "WriteSummary", "load_scene", "write_outputs"]
