"""Online manifold tracking: one-class recognition from a single labeled
vector and an unlabeled stream."""

from .core import (
    DEFAULT_GAMMA,
    DimensionError,
    NumericalError,
    OmtConfig,
    OmtError,
    as_vector,
    distance,
    normalize_dataset,
    similarity,
)
from .quantizer import (
    CoverState,
    EmptyCoverError,
    Representative,
    greedy_repartition,
    nearest_representative,
    quantize_step,
)
from .inference import (
    Prediction,
    SimilarityGraph,
    build_graph,
    harmonic_with_sink,
    infer_identity,
)
from .recognizer import NnRecognizer, OmtRecognizer

__all__ = [
    "DEFAULT_GAMMA",
    "CoverState",
    "DimensionError",
    "EmptyCoverError",
    "NnRecognizer",
    "NumericalError",
    "OmtConfig",
    "OmtError",
    "OmtRecognizer",
    "Prediction",
    "Representative",
    "SimilarityGraph",
    "as_vector",
    "build_graph",
    "distance",
    "greedy_repartition",
    "harmonic_with_sink",
    "infer_identity",
    "nearest_representative",
    "normalize_dataset",
    "quantize_step",
    "similarity",
]
