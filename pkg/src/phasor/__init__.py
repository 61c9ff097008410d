"""Streaming outlier detection with periodic observer models."""

from .errors import (
    DimensionError,
    EmptyModelError,
    MetricError,
    OutOfOrderError,
    ParameterError,
    PhasorError,
    SnapshotError,
    StreamParseError,
)
from .metrics import adjust, average_precision, evaluate, precision_at_n, roc_auc
from .model import (
    Ensemble,
    ModelParams,
    Observer,
    ObserverModel,
    ScoreRecord,
    inverse_ft,
    spectrum_magnitude,
    temporal_shape,
)
from .streams import ClusterSpec, Label, LabeledPoint, StreamSpec, generate, poc_preset, rate_at
from .swknn import SWKnn

__version__ = "0.1.0"
