"""Thin WAV helpers over scipy.io.wavfile: float32 for SRIR banks, 16-bit PCM
for rendered mixtures, normalized float reads for arbitrary input audio."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

_PCM_SCALE = {np.dtype(np.int16): 2**15, np.dtype(np.int32): 2**31, np.dtype(np.uint8): None}


def write_wav_float32(path, sample_rate: int, data: np.ndarray):
    wavfile.write(str(path), sample_rate, np.asarray(data, dtype=np.float32))


def write_wav_pcm16(path, sample_rate: int, data: np.ndarray):
    scaled = np.clip(np.rint(np.asarray(data, dtype=float) * 32767.0), -32768, 32767)
    wavfile.write(str(path), sample_rate, scaled.astype(np.int16))


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a WAV as float. PCM data is scaled to [-1, 1); float data is kept as is."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    try:
        sample_rate, data = wavfile.read(str(path))
    except Exception as exc:
        raise ValueError(f"unreadable WAV file {path}: {exc}") from exc
    if data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.dtype(np.int16), np.dtype(np.int32)):
        data = data.astype(np.float64) / _PCM_SCALE[data.dtype]
    else:
        data = data.astype(np.float64)
    return sample_rate, data


def read_wav_float32(path) -> tuple[int, np.ndarray]:
    """Read a WAV that must hold IEEE float32 frames (bank storage format)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    sample_rate, data = wavfile.read(str(path))
    if data.dtype != np.float32:
        raise ValueError(f"{path}: expected float32 WAV, got {data.dtype}")
    return sample_rate, data
