"""Manifest-to-tensor glue: wav files to classifier input grids."""

from __future__ import annotations

import pathlib

import numpy as np

from .audio import AudioBuffer, StftConfig, log_grid, read_wav, stft
from .dataset import DatasetManifest

DEFAULT_STFT = StftConfig(window_size=1024, hop_size=512, window_function="hann")


def grid_for_buffer(buf: AudioBuffer, out_frames: int = 128, out_bins: int = 128,
                    stft_config: StftConfig = DEFAULT_STFT,
                    floor_db: float = -80.0) -> np.ndarray:
    """One classifier input grid (frames x bins x 1, float32 in [0, 1])."""
    spec = stft(buf, stft_config)
    return log_grid(spec, out_frames, out_bins, floor_db).astype(np.float32)[..., None]


def grid_for_net(net, buf: AudioBuffer) -> np.ndarray:
    """Input grid sized to a network's configured input shape."""
    frames, bins, _ = net.config.input_shape
    return grid_for_buffer(buf, frames, bins)


def split_arrays(manifest: DatasetManifest, base_dir, split: str,
                 out_frames: int = 128, out_bins: int = 128,
                 stft_config: StftConfig = DEFAULT_STFT) -> tuple[np.ndarray, np.ndarray]:
    """Feature and label arrays for one split, ordered by sample id."""
    base = pathlib.Path(base_dir)
    samples = sorted(manifest.split_samples(split), key=lambda s: s.sample_id)
    if not samples:
        return (np.zeros((0, out_frames, out_bins, 1), dtype=np.float32),
                np.zeros(0, dtype=np.int64))
    grids = np.stack([
        grid_for_buffer(read_wav(base / s.audio_path, target_rate=manifest.sample_rate),
                        out_frames, out_bins, stft_config)
        for s in samples
    ])
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return grids, labels


def all_split_arrays(manifest: DatasetManifest, base_dir,
                     out_frames: int = 128, out_bins: int = 128,
                     stft_config: StftConfig = DEFAULT_STFT) -> dict:
    data = {}
    for split in ("train", "val", "test"):
        x, y = split_arrays(manifest, base_dir, split, out_frames, out_bins, stft_config)
        data[f"{split}_x"] = x
        data[f"{split}_y"] = y
    return data
