"""Unsupervised discovery of recurring speech patterns with probabilistic DTW."""

__version__ = "0.1.0"

from .config import PipelineConfig
from .pipeline import discover, run_discover

__all__ = ["PipelineConfig", "discover", "run_discover", "__version__"]
