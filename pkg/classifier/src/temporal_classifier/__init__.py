"""temporal_classifier: 3-class event-pair classifier with time-bin fusion."""

__version__ = "0.1.0"

from .data import PairSample, load_pairs_csv, load_sequences, make_synthetic_pairs
from .errors import BadBinIndex, DataSchemaError, EmptyTestSet
from .model import FusionModel, HashingTextEncoder, forward
from .train import TrainConfig, evaluate, load_model, save_model, train

__all__ = [
    "__version__",
    "BadBinIndex",
    "DataSchemaError",
    "EmptyTestSet",
    "FusionModel",
    "HashingTextEncoder",
    "PairSample",
    "TrainConfig",
    "evaluate",
    "forward",
    "load_model",
    "load_pairs_csv",
    "load_sequences",
    "make_synthetic_pairs",
    "save_model",
    "train",
]
