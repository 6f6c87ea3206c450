"""Time-domain FIR banks converted from STFT-domain filter taps.

The inverse DFT of each per-bin tap matrix yields real FIR coefficients
indexed by tau in [-F/2, F/2-1] (tau = 0 at the frame center).  Each
coefficient is folded with the analysis-window autocorrelation profile
(normalized to 1 at tau = 0) so that filtering raw samples reproduces the
windowed-analysis / overlap-add signal path; the identity spectrum then
passes signals at exactly unity gain.  For the lag-0 taps the first Gamma
non-causal coefficients (tau < -F/2 + Gamma) are dropped, which is what
lowers the algorithmic delay from F/2 to F/2 - Gamma.
"""

from dataclasses import dataclass

import numpy as np

from .cbf import ComposedFilter
from .errors import NumericalContractError
from .numerics import two_sided
from .stft import StftConfig

IMAG_RESIDUE_RTOL = 1e-9


@dataclass(frozen=True)
class DelayLedger:
    """Delay accounting for one configuration: delay = F/2 - Gamma samples."""

    frame_len: int
    truncated: int
    shift: int

    def __post_init__(self):
        if not 0 <= self.truncated <= self.frame_len // 2:
            raise ValueError(
                f"truncation {self.truncated} outside [0, {self.frame_len // 2}]"
            )

    @property
    def algorithmic_delay(self) -> int:
        return self.frame_len // 2 - self.truncated

    def delay_seconds(self, sample_rate: float) -> float:
        return self.algorithmic_delay / sample_rate


def window_fold(cfg: StftConfig) -> np.ndarray:
    """Tap-folding profile in natural index order (index = tau mod F).

    Circular autocorrelation of the analysis window, normalized to 1 at
    tau = 0.  Folding IDFT taps with this profile makes direct time-domain
    filtering match the windowed STFT filter path for concentrated filters,
    and leaves a flat (identity) spectrum at unity gain.
    """
    win = cfg.window_samples
    corr = np.fft.ifft(np.abs(np.fft.fft(win)) ** 2).real
    return corr / corr[0]


class TimeFilterBank:
    """Real FIR taps for one filter generation.

    taps0: (N, F - Gamma, M) lag-0 taps, tau = -F/2 + Gamma .. F/2 - 1.
    taps_lag: (L, N, F, M) taps for lags D .. D+L-1, tau = -F/2 .. F/2 - 1.
    """

    def __init__(
        self,
        taps0: np.ndarray,
        taps_lag: np.ndarray | None,
        lags: tuple,
        ledger: DelayLedger,
        generation: int = 0,
    ):
        self.taps0 = taps0
        self.taps_lag = taps_lag
        self.lags = lags
        self.ledger = ledger
        self.generation = generation
        self._kernel = None

    @property
    def frame_len(self) -> int:
        return self.ledger.frame_len

    @property
    def num_sources(self) -> int:
        return self.taps0.shape[0]

    @property
    def channels(self) -> int:
        return self.taps0.shape[2]

    @property
    def lag_min(self) -> int:
        """Most negative input lag used: -(F/2 - Gamma)."""
        return -(self.frame_len // 2 - self.ledger.truncated)

    @property
    def lag_max(self) -> int:
        """Largest input lag used."""
        half = self.frame_len // 2
        if self.taps_lag is not None and len(self.lags) > 1:
            return max(l for l in self.lags if l > 0) * self.ledger.shift + half - 1
        return half - 1

    def combined_kernel(self) -> np.ndarray:
        """Dense kernel K (N, span, M), reversed for contiguous dot products.

        y_n(t) = sum_q sum_m K[n, q, m] * x_m(t - lag_max + q), so the input
        window for output t is x[t - lag_max : t - lag_min + 1].
        """
        if self._kernel is not None:
            return self._kernel
        half = self.frame_len // 2
        gamma = self.ledger.truncated
        span = self.lag_max - self.lag_min + 1
        kern = np.zeros((self.num_sources, span, self.channels))
        # lag 0 taps: input lag = tau
        taus0 = np.arange(-half + gamma, half)
        kern[:, self.lag_max - taus0, :] += self.taps0
        if self.taps_lag is not None:
            taus = np.arange(-half, half)
            for j, lag in enumerate(l for l in self.lags if l > 0):
                pos = self.lag_max - (taus + lag * self.ledger.shift)
                kern[:, pos, :] += self.taps_lag[j]
        self._kernel = kern
        return kern


def to_time_domain(
    filters: ComposedFilter,
    cfg: StftConfig,
    gamma: int,
    generation: int = 0,
) -> TimeFilterBank:
    """Convert composed STFT-domain taps to a windowed, truncated FIR bank."""
    num_lags, num_bins, num_sources, channels = filters.taps.shape
    frame_len = cfg.frame_len
    if num_bins != cfg.num_bins:
        raise ValueError(f"expected {cfg.num_bins} bins, got {num_bins}")
    half = frame_len // 2
    spectra = np.moveaxis(filters.taps, 1, -1)  # (lags, N, M, B)
    full = two_sided(spectra, frame_len)
    taps_nat = np.fft.ifft(full, axis=-1)
    scale = np.max(np.abs(taps_nat))
    residue = np.max(np.abs(taps_nat.imag))
    if scale > 0 and residue > IMAG_RESIDUE_RTOL * scale:
        raise NumericalContractError(
            f"inverse-DFT imaginary residue {residue / scale:.3e} exceeds tolerance"
        )
    fold = window_fold(cfg)
    centered = np.roll(taps_nat.real * fold, half, axis=-1)  # index j -> tau = j - F/2
    taps_by_lag = np.moveaxis(centered, (1, 3), (1, 2))  # (lags, N, F, M)
    taps0 = taps_by_lag[0][:, gamma:, :]
    taps_lag = taps_by_lag[1:] if num_lags > 1 else None
    ledger = DelayLedger(frame_len=frame_len, truncated=gamma, shift=cfg.shift)
    return TimeFilterBank(
        taps0=np.ascontiguousarray(taps0),
        taps_lag=np.ascontiguousarray(taps_lag) if taps_lag is not None else None,
        lags=filters.lags,
        ledger=ledger,
        generation=generation,
    )


def truncated_energy(filters: ComposedFilter, cfg: StftConfig, gamma: int) -> float:
    """Energy of the lag-0 coefficients dropped by truncating `gamma` samples."""
    bank = to_time_domain(filters, cfg, gamma=0)
    dropped = bank.taps0[:, :gamma, :]
    return float(np.sum(dropped**2))


def filter_sample(bank: TimeFilterBank, history: np.ndarray, t: int) -> np.ndarray:
    """Output sample y(t) for every source from a (T, M) input history.

    Requires history rows t - lag_max .. t - lag_min inclusive; the caller
    provides zero rows for indices before the stream start.
    """
    kern = bank.combined_kernel()
    a = t - bank.lag_max
    b = t - bank.lag_min + 1
    if a < 0 or b > history.shape[0]:
        raise ValueError(f"history does not cover [{a}, {b})")
    win = history[a:b].ravel()
    return np.array([np.dot(kern[n].ravel(), win) for n in range(bank.num_sources)])


def filter_block(bank: TimeFilterBank, history: np.ndarray, t0: int, count: int) -> np.ndarray:
    """Vectorized filter_sample over t0 .. t0+count-1 (test/offline helper)."""
    out = np.empty((count, bank.num_sources))
    for j in range(count):
        out[j] = filter_sample(bank, history, t0 + j)
    return out


def swap_bank(current: TimeFilterBank | None, fresh: TimeFilterBank) -> TimeFilterBank:
    """Generation-checked handoff; stale generations are rejected."""
    if current is not None and fresh.generation <= current.generation:
        raise ValueError(
            f"stale bank generation {fresh.generation} <= {current.generation}"
        )
    return fresh
