"""Complex hyperbolic knowledge-graph embeddings bridged by the orthonormal FFT."""
from .model import VARIANTS, KGParams, ModelConfig, init_params, score, score_all
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = ["VARIANTS", "KGParams", "ModelConfig", "TrainConfig", "init_params",
           "score", "score_all", "train"]
