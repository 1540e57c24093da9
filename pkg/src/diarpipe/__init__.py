"""Speaker diarization pipeline: VAD fusion, clustering, overlap assignment,
target-speaker VAD merging, system fusion, and DER/JER scoring.
"""

from .core import (
    AffinityMatrix,
    ConstraintError,
    Diarization,
    EmbeddingSequence,
    FrameTrack,
    InputError,
    PipelineError,
    Segment,
    derasterize,
    overlap_regions,
    rasterize,
    timeline_support,
)
from .cluster import AhcParams, CosineAffinityProvider
from .metrics import DerReport, der, jer
from .overlap import TsVadConfig

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "AhcParams",
    "ConstraintError",
    "CosineAffinityProvider",
    "DerReport",
    "Diarization",
    "EmbeddingSequence",
    "FrameTrack",
    "InputError",
    "PipelineError",
    "Segment",
    "TsVadConfig",
    "der",
    "derasterize",
    "jer",
    "overlap_regions",
    "rasterize",
    "timeline_support",
    "__version__",
]
