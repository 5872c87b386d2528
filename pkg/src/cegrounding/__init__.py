"""Small-intestine grounding in capsule-endoscopy videos via fault-tolerant boundary search."""
from .core import (
    ConfidenceVector,
    FrameClassifier,
    GiClass,
    Segment,
    ValidationError,
    argmax_class,
    validate_confidence,
)
from .search import (
    SearchConfig,
    SearchError,
    SearchTrace,
    ground_small_intestine,
    scan_baseline,
    search_end,
    search_start,
)

__version__ = "0.1.0"

__all__ = [
    "ConfidenceVector", "FrameClassifier", "GiClass", "Segment", "ValidationError",
    "argmax_class", "validate_confidence",
    "SearchConfig", "SearchError", "SearchTrace",
    "ground_small_intestine", "scan_baseline", "search_end", "search_start",
]
