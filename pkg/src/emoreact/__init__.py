"""emoreact: distant-supervision emotion classification from
reaction-annotated social posts."""

from .corpus import (
    EMOTIONS,
    Emotion,
    LabeledDoc,
    ReactionPost,
    assign_label,
    entropy_filter,
    parse_reaction_feed,
    synth_corpus,
)
from .errors import ConfigError, DataError, EmoreactError
from .evaluation import EvalReport, evaluate
from .features import FeatureConfig, SparseVector, Vectorizer

__version__ = "0.1.0"

__all__ = [
    "EMOTIONS",
    "ConfigError",
    "DataError",
    "EmoreactError",
    "Emotion",
    "EvalReport",
    "FeatureConfig",
    "LabeledDoc",
    "ReactionPost",
    "SparseVector",
    "Vectorizer",
    "assign_label",
    "entropy_filter",
    "evaluate",
    "parse_reaction_feed",
    "synth_corpus",
    "__version__",
]
