"""wicscorer: train and serve a binary word-in-context pair classifier."""

from .data import Vocab, load_wic_jsonl, make_separable_fixture, mark_target
from .model import PairClassifier
from .train import TrainConfig, TrainResult, load_artifact, score_pairs, train

__version__ = "0.1.0"
