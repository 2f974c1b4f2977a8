import json

import numpy as np
import pytest

from chaordic.audio import AudioBuffer, write_wav
from chaordic.environment import EnvironmentConfig
from chaordic.granular import random_param_set
from chaordic.markov import CorpusEntry, ParamCorpus, estimate
from chaordic.net import Network, NetworkConfig, save_checkpoint

SR = 22050

TINY_NET_CONFIG = NetworkConfig(
    input_shape=(16, 16, 1),
    layers=(
        {"type": "conv2d", "out_channels": 4},
        {"type": "relu"},
        {"type": "maxpool"},
        {"type": "flatten"},
        {"type": "dense", "units": 11},
        {"type": "softmax"},
    ),
)


@pytest.fixture(scope="session")
def tiny_net():
    return Network(TINY_NET_CONFIG, seed=1)


@pytest.fixture(scope="session")
def tiny_model():
    rng = np.random.default_rng(2)
    entries = [CorpusEntry(random_param_set(rng), label, "s", i)
               for i, label in enumerate(list(range(11)) * 4)]
    return estimate(ParamCorpus(entries=entries, target_per_label=4))


@pytest.fixture(scope="session")
def tone_source_buffer():
    t = np.arange(SR) / SR
    sig = 0.6 * np.sin(2 * np.pi * 196 * t) + 0.2 * np.sin(2 * np.pi * 1573 * t)
    return AudioBuffer(sig, SR)


@pytest.fixture(scope="session")
def tiny_artifacts(tmp_path_factory, tiny_net, tiny_model, tone_source_buffer):
    """Checkpoint + transition model + source wav + engine config on disk."""
    root = tmp_path_factory.mktemp("artifacts")
    ckpt = root / "net.ckpt"
    model_path = root / "model.json"
    source_path = root / "source.wav"
    config_path = root / "engine.json"
    save_checkpoint(tiny_net, ckpt)
    tiny_model.save(model_path)
    write_wav(source_path, tone_source_buffer)
    env = EnvironmentConfig(mode="manual", manual_target=5, regen_interval_s=1.0,
                            classify_hop_s=0.25, window_s=0.5, seed=3)
    config_path.write_text(json.dumps({
        "environment": env.to_dict(),
        "paths": {"checkpoint": "net.ckpt", "model": "model.json",
                  "source": "source.wav"},
    }))
    return {"root": root, "checkpoint": ckpt, "model": model_path,
            "source": source_path, "config": config_path}
