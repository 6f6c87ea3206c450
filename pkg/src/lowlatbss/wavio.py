"""Float32 WAV reading and writing (the only audio format we touch)."""

from pathlib import Path

import numpy as np
import scipy.io.wavfile

from .errors import IoError


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono (T,) or multichannel (T, C) float32 PCM."""
    samples = np.asarray(samples, dtype=np.float32)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scipy.io.wavfile.write(path, sample_rate, samples)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float64 in [-1, 1]-ish range; returns (samples, fs)."""
    try:
        sample_rate, data = scipy.io.wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype == np.int16:
        data = data / 32768.0
    elif data.dtype == np.int32:
        data = data / 2147483648.0
    elif data.dtype == np.uint8:
        data = (data.astype(float) - 128.0) / 128.0
    return np.asarray(data, dtype=float), int(sample_rate)
