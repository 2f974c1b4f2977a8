from .network import Network, NetworkConfig, Prediction, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainingDiverged, evaluate, train
from .stream import StreamingPredictor

__all__ = [
    "Network",
    "NetworkConfig",
    "Prediction",
    "StreamingPredictor",
    "TrainConfig",
    "TrainingDiverged",
    "evaluate",
    "load_checkpoint",
    "save_checkpoint",
    "train",
]
