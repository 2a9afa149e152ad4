"""Feature extraction to NTKF files for the clustering engine."""

from .encoders import DEFAULT_MODEL, ClipEncoder, Encoder, StubEncoder, make_encoder
from .jobs import DEFAULT_TEMPLATES, ExtractionJob, extract_anchors, extract_images
from .ntkf import write_matrix

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "DEFAULT_TEMPLATES",
    "ClipEncoder",
    "Encoder",
    "ExtractionJob",
    "StubEncoder",
    "extract_anchors",
    "extract_images",
    "make_encoder",
    "write_matrix",
]
