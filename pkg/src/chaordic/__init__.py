"""chaordic: perceived chaos/order classification and order-targeted
granular resynthesis, wired into a self-listening feedback loop."""

__version__ = "0.1.0"

from .audio import AudioBuffer, Spectrogram, StftConfig, log_grid, read_wav, stft, write_wav
from .granular import GranularStream, SynthParamSet, render_texture, schedule_grains
from .markov import ParamCorpus, QuantizationSpec, TransitionModel
from .net import Network, NetworkConfig, Prediction, StreamingPredictor, TrainConfig
from .normality import shapiro_wilk

__all__ = [
    "AudioBuffer",
    "GranularStream",
    "Network",
    "NetworkConfig",
    "ParamCorpus",
    "Prediction",
    "QuantizationSpec",
    "Spectrogram",
    "StftConfig",
    "StreamingPredictor",
    "SynthParamSet",
    "TrainConfig",
    "TransitionModel",
    "log_grid",
    "read_wav",
    "render_texture",
    "schedule_grains",
    "shapiro_wilk",
    "stft",
    "write_wav",
]
