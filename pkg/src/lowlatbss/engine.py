"""Streaming separation engine: parallel update and filtering paths.

The engine ingests a two-channel sample stream.  Every `shift` samples a
new STFT frame completes and the update path refreshes the filters; the
filtering path emits one output sample per ingested sample once the causal
window (F/2 - Gamma future samples) is satisfied.  Everything runs
single-threaded and deterministically: output is bit-identical no matter
how the input is chunked.

Modes:
  TD_IVA  -- no dereverberation (L = 0), time-domain filtering.
  FD_CBF  -- full update path, output via overlap-add of the STFT-domain
             estimates, content delayed by F/2 to realize the tabulated
             algorithmic delay.
  TD_CBF  -- full update path, time-domain filtering with optional
             truncation of non-causal lag-0 taps.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .cbf import FilterUpdater
from .dereverb import DereverbConfig
from .errors import ConfigError
from .separation import SeparationConfig
from .stft import StftConfig
from .tdfilter import DelayLedger, TimeFilterBank, swap_bank, to_time_domain


class Mode(enum.Enum):
    TD_IVA = "td-iva"
    FD_CBF = "fd-cbf"
    TD_CBF = "td-cbf"


@dataclass(frozen=True)
class EngineConfig:
    mode: Mode = Mode.TD_CBF
    sample_rate: int = 16000
    frame_len: int = 1024
    shift: int = 256
    truncated: int = 0  # Gamma, samples
    prediction_delay: int = 2  # D, frames
    filter_order: int = 10  # L, frames; 0 disables WPE
    alpha: float = 0.99
    beta: float = 0.999
    compose_every_k_frames: int = 1
    freeze_updates: bool = False
    num_sources: int = 2
    channels: int = 2

    def __post_init__(self):
        if self.mode is Mode.TD_IVA and self.filter_order != 0:
            raise ConfigError("TD_IVA mode requires filter_order = 0")
        if self.mode is Mode.FD_CBF and self.truncated != 0:
            raise ConfigError("FD_CBF mode requires truncated = 0")
        if self.mode is not Mode.TD_IVA and self.filter_order < 1:
            raise ConfigError(f"{self.mode} requires filter_order >= 1")
        if (
            self.mode is Mode.TD_CBF
            and self.truncated > 0
            and self.prediction_delay * self.shift < self.frame_len // 2
        ):
            raise ConfigError(
                "truncating TD_CBF requires D * shift >= F/2 so non-causal "
                "taps fall only in the lag-0 filter"
            )
        if not 0 <= self.truncated <= self.frame_len // 2:
            raise ConfigError("truncated sample count outside [0, F/2]")
        if self.compose_every_k_frames < 1:
            raise ConfigError("compose_every_k_frames must be >= 1")

    @property
    def delay_ledger(self) -> DelayLedger:
        return DelayLedger(
            frame_len=self.frame_len, truncated=self.truncated, shift=self.shift
        )

    @property
    def algorithmic_delay(self) -> int:
        return self.delay_ledger.algorithmic_delay


PRESETS = {
    "TD-IVA-32ms": EngineConfig(
        mode=Mode.TD_IVA, frame_len=1024, shift=256, truncated=0, filter_order=0
    ),
    "FD-CBF-4ms": EngineConfig(
        mode=Mode.FD_CBF,
        frame_len=128,
        shift=32,
        truncated=0,
        prediction_delay=8,
        filter_order=10,
    ),
    "TD-CBF-32ms": EngineConfig(
        mode=Mode.TD_CBF,
        frame_len=1024,
        shift=256,
        truncated=0,
        prediction_delay=2,
        filter_order=10,
    ),
    "TD-CBF-4ms": EngineConfig(
        mode=Mode.TD_CBF,
        frame_len=1024,
        shift=256,
        truncated=448,
        prediction_delay=2,
        filter_order=10,
    ),
}


def preset(name: str, **overrides) -> EngineConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    cfg = PRESETS[name]
    return replace(cfg, **overrides) if overrides else cfg


class Engine:
    """Deterministic single-threaded streaming separator."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self.stft_cfg = StftConfig(config.frame_len, config.shift)
        dv_cfg = (
            DereverbConfig(
                prediction_delay=config.prediction_delay,
                filter_order=config.filter_order,
                forgetting=config.beta,
            )
            if config.filter_order > 0
            else None
        )
        sep_cfg = SeparationConfig(forgetting=config.alpha)
        self.updater = FilterUpdater(
            self.stft_cfg,
            num_sources=config.num_sources,
            channels=config.channels,
            dereverb_cfg=dv_cfg,
            separation_cfg=sep_cfg,
        )
        self._bank: TimeFilterBank | None = None
        if config.mode is not Mode.FD_CBF:
            self._bank = self._fresh_bank(generation=0)
        # input history with zero pre-padding so early windows are valid
        self._pad = self._history_pad()
        cap = 1 << 16
        self._buf = np.zeros((self._pad + cap, config.channels))
        self._ingested = 0  # real samples pushed (excluding flush padding)
        self._written = 0  # samples stored in the buffer (including padding)
        self._emitted = 0
        self._next_frame = 0
        self._flushed = False
        # FD mode overlap-add accumulators, indexed by content sample
        if config.mode is Mode.FD_CBF:
            self._ola_num = np.zeros((cap, config.num_sources))
            self._ola_den = np.zeros(cap)
            self._fd_final = 0  # content samples fully accumulated

    # -- construction helpers -------------------------------------------------

    def _history_pad(self) -> int:
        cfg = self.config
        half = cfg.frame_len // 2
        if cfg.mode is Mode.FD_CBF:
            return 0
        extra = (
            (cfg.prediction_delay + cfg.filter_order - 1) * cfg.shift
            if cfg.filter_order > 0
            else 0
        )
        return half + extra

    def _fresh_bank(self, generation: int) -> TimeFilterBank:
        filters = self.updater.composed_filters(apply_scale=True)
        return to_time_domain(
            filters, self.stft_cfg, self.config.truncated, generation=generation
        )

    # -- streaming ------------------------------------------------------------

    @property
    def delay_samples(self) -> int:
        return self.config.algorithmic_delay

    @property
    def samples_ingested(self) -> int:
        return self._ingested

    @property
    def samples_emitted(self) -> int:
        return self._emitted

    def push_samples(self, chunk: np.ndarray) -> np.ndarray:
        """Ingest samples (k, channels); returns newly emitted output (e, N)."""
        if self._flushed:
            raise ConfigError("stream already flushed")
        chunk = np.atleast_2d(np.asarray(chunk, dtype=float))
        if chunk.shape[1] != self.config.channels:
            raise ValueError(f"expected {self.config.channels} channels")
        out = self._ingest(chunk)
        self._ingested += chunk.shape[0]
        return out

    def flush(self) -> np.ndarray:
        """Drain the delay line; total output length equals total input length."""
        if self._flushed:
            return np.zeros((0, self.config.num_sources))
        self._flushed = True
        if self._ingested == 0:
            return np.zeros((0, self.config.num_sources))
        pieces = []
        pad = np.zeros((self.config.shift, self.config.channels))
        while self._emitted < self._ingested:
            pieces.append(self._ingest(pad, frozen=True))
        out = (
            np.concatenate(pieces)
            if pieces
            else np.zeros((0, self.config.num_sources))
        )
        overshoot = self._emitted - self._ingested
        if overshoot > 0:
            out = out[: out.shape[0] - overshoot]
            self._emitted = self._ingested
        return out

    def run(self, samples: np.ndarray, chunk_size: int = 4096) -> np.ndarray:
        """Offline convenience: stream a whole signal and flush."""
        samples = np.asarray(samples, dtype=float)
        pieces = []
        for start in range(0, samples.shape[0], chunk_size):
            pieces.append(self.push_samples(samples[start : start + chunk_size]))
        pieces.append(self.flush())
        return np.concatenate(pieces) if pieces else np.zeros((0, self.config.num_sources))

    # -- internals ------------------------------------------------------------

    def _grow(self, rows_needed: int) -> None:
        if self._pad + rows_needed <= self._buf.shape[0]:
            return
        cap = self._buf.shape[0]
        while self._pad + rows_needed > cap:
            cap *= 2
        buf = np.zeros((cap, self.config.channels))
        buf[: self._written + self._pad] = self._buf[: self._written + self._pad]
        self._buf = buf

    def _grow_ola(self, rows_needed: int) -> None:
        if rows_needed <= self._ola_num.shape[0]:
            return
        cap = self._ola_num.shape[0]
        while rows_needed > cap:
            cap *= 2
        num = np.zeros((cap, self.config.num_sources))
        num[: self._ola_num.shape[0]] = self._ola_num
        den = np.zeros(cap)
        den[: self._ola_den.shape[0]] = self._ola_den
        self._ola_num = num
        self._ola_den = den

    def _update_for_frame(self, frame_index: int) -> None:
        cfg = self.config
        start = frame_index * cfg.shift
        frame = self._buf[self._pad + start : self._pad + start + cfg.frame_len]
        spec = np.fft.rfft(
            frame * self.stft_cfg.window_samples[:, None], axis=0
        )  # (bins, channels)
        result = self.updater.process_frame(spec)
        if cfg.mode is Mode.FD_CBF:
            self._ola_accumulate(frame_index, result.y_out)
        elif frame_index % cfg.compose_every_k_frames == 0:
            fresh = self._fresh_bank(generation=frame_index + 1)
            self._bank = swap_bank(self._bank, fresh)

    def _ola_accumulate(self, frame_index: int, y_out: np.ndarray) -> None:
        cfg = self.config
        start = frame_index * cfg.shift
        stop = start + cfg.frame_len
        self._grow_ola(stop)
        seg = np.fft.irfft(y_out.T, n=cfg.frame_len, axis=-1).T  # (F, N)
        win = self.stft_cfg.window_samples
        self._ola_num[start:stop] += seg * win[:, None]
        self._ola_den[start:stop] += win**2
        # region [start, start + shift) receives no further frames
        self._fd_final = start + cfg.shift

    def _ingest(self, chunk: np.ndarray, frozen: bool = False) -> np.ndarray:
        cfg = self.config
        k = chunk.shape[0]
        self._grow(self._written + k)
        emitted = []
        frame_trigger = cfg.frame_len - 1  # sample index completing frame 0
        for j in range(k):
            s = self._written
            self._buf[self._pad + s] = chunk[j]
            self._written = s + 1
            if not cfg.freeze_updates and not frozen:
                while self._next_frame * cfg.shift + frame_trigger <= s:
                    self._update_for_frame(self._next_frame)
                    self._next_frame += 1
            if cfg.mode is Mode.FD_CBF:
                emitted.extend(self._fd_emit_ready())
            else:
                t = s - self.delay_samples
                if t >= 0:
                    emitted.append(self._td_sample(t))
                    self._emitted += 1
        if not emitted:
            return np.zeros((0, cfg.num_sources))
        return np.vstack(emitted)

    def _td_sample(self, t: int) -> np.ndarray:
        bank = self._bank
        kern = bank.combined_kernel()
        a = self._pad + t - bank.lag_max
        b = self._pad + t - bank.lag_min + 1
        win = self._buf[a:b].ravel()
        return np.array(
            [np.dot(kern[n].ravel(), win) for n in range(bank.num_sources)]
        )

    def _fd_emit_ready(self) -> list:
        """Emit output samples t whose content OLA(t - F/2) is finalized."""
        cfg = self.config
        half = cfg.frame_len // 2
        out = []
        # never emit more output samples than input samples seen so far
        while self._emitted < self._written:
            t = self._emitted
            content = t - half
            if content >= 0:
                if content >= self._fd_final:
                    break
                den = self._ola_den[content]
                sample = (
                    self._ola_num[content] / den
                    if den > 0.0
                    else np.zeros(cfg.num_sources)
                )
            else:
                sample = np.zeros(cfg.num_sources)
            out.append(sample)
            self._emitted += 1
        return out
