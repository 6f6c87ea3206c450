"""Analysis framing, Hann windowing and forward/inverse STFT.

Frames are indexed so that frame i covers samples [i*shift, i*shift + F).
Spectra are stored one-sided (bins 0..F/2); real inputs make the upper half
redundant.  The synthesis path applies the Hann window a second time and
normalizes by the summed squared window (weighted overlap-add), which gives
exact reconstruction for any COLA-compatible shift.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NotReadyError
from .numerics import is_power_of_two

COLA_RTOL = 1e-10


def periodic_hann(frame_len: int) -> np.ndarray:
    """Periodic Hann window h(n) = 0.5*(1 - cos(2*pi*n/F)), n = 0..F-1."""
    n = np.arange(frame_len)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * n / frame_len))


@dataclass(frozen=True)
class StftConfig:
    """Frame length, shift and window family for the analysis STFT."""

    frame_len: int
    shift: int
    window: str = "hann"
    _window_samples: np.ndarray = field(init=False, repr=False, compare=False)
    _cola_constant: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.window != "hann":
            raise ConfigError(f"unsupported window {self.window!r}")
        if not is_power_of_two(self.frame_len):
            raise ConfigError(f"frame length {self.frame_len} is not a power of two")
        if self.shift <= 0 or self.frame_len % self.shift != 0:
            raise ConfigError(
                f"shift {self.shift} does not divide frame length {self.frame_len}"
            )
        win, cola = make_window(self.frame_len, self.shift)
        object.__setattr__(self, "_window_samples", win)
        object.__setattr__(self, "_cola_constant", cola)

    @property
    def num_bins(self) -> int:
        return self.frame_len // 2 + 1

    @property
    def window_samples(self) -> np.ndarray:
        """Analysis window in natural index order n = 0..F-1."""
        return self._window_samples

    @property
    def window_centered(self) -> np.ndarray:
        """Window as a function of tau in [-F/2, F/2-1]; tau=0 is the peak."""
        return np.roll(self._window_samples, -(self.frame_len // 2))

    @property
    def cola_constant(self) -> float:
        return self._cola_constant


def make_window(frame_len: int, shift: int) -> tuple[np.ndarray, float]:
    """Periodic Hann window plus its overlap-add constant C = sum_k h(t - k*shift).

    Raises ConfigError when the shifted sum is not constant (COLA violation).
    """
    win = periodic_hann(frame_len)
    acc = np.zeros(frame_len)
    for k in range(frame_len // shift):
        acc += np.roll(win, k * shift)
    cola = float(np.mean(acc))
    if np.max(np.abs(acc - cola)) > COLA_RTOL * cola:
        raise ConfigError(
            f"window/shift pair ({frame_len}, {shift}) violates COLA"
        )
    return win, cola


def num_frames(num_samples: int, cfg: StftConfig) -> int:
    if num_samples < cfg.frame_len:
        return 0
    return (num_samples - cfg.frame_len) // cfg.shift + 1


def analyze_frame(samples: np.ndarray, frame_index: int, cfg: StftConfig) -> np.ndarray:
    """One-sided spectrum of frame `frame_index` for each channel.

    `samples` has shape (num_samples, channels); the frame must be fully
    contained or NotReadyError is raised.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    start = frame_index * cfg.shift
    stop = start + cfg.frame_len
    if samples.ndim != 2:
        raise ValueError("samples must be (num_samples, channels)")
    if start < 0 or stop > samples.shape[0]:
        raise NotReadyError(
            f"frame {frame_index} needs samples [{start}, {stop})"
        )
    seg = samples[start:stop, :] * cfg.window_samples[:, None]
    return np.fft.rfft(seg, axis=0).T  # (channels, bins)


def analyze(samples: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """All complete frames of a multichannel signal.

    Returns shape (frames, channels, bins).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    count = num_frames(samples.shape[0], cfg)
    win = cfg.window_samples[:, None]
    out = np.empty((count, samples.shape[1], cfg.num_bins), dtype=complex)
    for i in range(count):
        seg = samples[i * cfg.shift : i * cfg.shift + cfg.frame_len, :] * win
        out[i] = np.fft.rfft(seg, axis=0).T
    return out


def synthesize(frames: np.ndarray, cfg: StftConfig, frame_indices=None) -> np.ndarray:
    """Weighted overlap-add resynthesis of one-sided spectra.

    `frames` has shape (frames, channels, bins) and must cover contiguous
    frame indices; a gap raises ValueError.  Output length matches the span
    covered by the frames.
    """
    frames = np.asarray(frames)
    if frames.ndim == 2:
        frames = frames[:, None, :]
    count, channels, bins = frames.shape
    if bins != cfg.num_bins:
        raise ValueError(f"expected {cfg.num_bins} bins, got {bins}")
    if frame_indices is not None:
        idx = np.asarray(frame_indices)
        if count and not np.array_equal(idx, np.arange(idx[0], idx[0] + count)):
            raise ValueError("gap in frame indices")
    length = (count - 1) * cfg.shift + cfg.frame_len if count else 0
    win = cfg.window_samples
    num = np.zeros((length, channels))
    den = np.zeros(length)
    for i in range(count):
        seg = np.fft.irfft(frames[i], n=cfg.frame_len, axis=-1).T  # (F, channels)
        sl = slice(i * cfg.shift, i * cfg.shift + cfg.frame_len)
        num[sl, :] += seg * win[:, None]
        den[sl] += win**2
    out = np.zeros_like(num)
    nz = den > 0
    out[nz, :] = num[nz, :] / den[nz, None]
    return out
