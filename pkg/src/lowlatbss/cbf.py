"""Per-frame orchestration of the source-wise factorized convolutional filter.

Each frame runs, in order: source estimates with the previous filters,
variance estimation, the per-source WPE update, fresh dereverberated
vectors, covariance tracking and the ISS sweep.  The combined filter taps
(lag 0 plus lags D..D+L-1) are composed from the dereverberation filters
and the separation matrix.
"""

from dataclasses import dataclass

import numpy as np

from . import dereverb, separation
from .errors import ConfigError
from .separation import SeparationConfig, SeparationState
from .stft import StftConfig


@dataclass(frozen=True)
class ComposedFilter:
    """STFT-domain filter taps per lag: `taps[j]` belongs to `lags[j]`.

    taps has shape (len(lags), B, N, M); lags is (0, D, ..., D+L-1).
    """

    lags: tuple
    taps: np.ndarray


def compose_filters(
    g_per_source,
    q: np.ndarray,
    prediction_delay: int,
    scale: np.ndarray | None = None,
) -> ComposedFilter:
    """Build W(f, l) from dereverberation filters and the separation matrix.

    Tap 0 is Q itself; for lag block j, row n is -(block_j(G_n) q_n)^H.
    `scale` (B, N), when given, rescales row n of every lag (projection back).
    """
    num_bins, num_sources, channels = q.shape
    taps = [np.array(q)]
    lags = [0]
    if g_per_source:
        order = g_per_source[0].shape[1] // channels
        if len(g_per_source) != num_sources:
            raise ValueError("need one dereverberation filter per source")
        lag_taps = np.zeros((order, num_bins, num_sources, channels), dtype=complex)
        for n in range(num_sources):
            g = g_per_source[n]
            if g.shape != (num_bins, order * channels, channels):
                raise ValueError(f"bad G shape {g.shape}")
            qn = q[:, n, :].conj()  # q_n as a column vector
            gq = np.einsum("bkm,bm->bk", g, qn)  # (B, M*L)
            for j in range(order):
                block = gq[:, j * channels : (j + 1) * channels]
                lag_taps[j, :, n, :] = -block.conj()
        taps.extend(lag_taps)
        lags.extend(prediction_delay + j for j in range(order))
    stack = np.stack(taps)
    if scale is not None:
        stack = stack * scale[None, :, :, None]
    return ComposedFilter(lags=tuple(lags), taps=stack)


def apply_composed(filters: ComposedFilter, frames_by_lag) -> np.ndarray:
    """Direct evaluation of y(i, f) = sum_l W(i; f, l) x(i - l, f).

    `frames_by_lag(l)` returns the observation frame at lag l, shape (B, M).
    Test oracle for the equivalence with the two-stage pipeline.
    """
    out = None
    for lag, tap in zip(filters.lags, filters.taps):
        x = frames_by_lag(lag)
        term = np.einsum("bnm,bm->bn", tap, x)
        out = term if out is None else out + term
    return out


@dataclass
class FrameResult:
    """Outputs of one update step."""

    frame_index: int
    y_pre: np.ndarray  # estimates with the previous filters (B, N), unscaled
    y_out: np.ndarray  # estimates with the fresh filters, projection-back scaled
    sigma: np.ndarray  # per-source variances (N,)
    scale: np.ndarray  # projection-back scales (B, N)


class FilterUpdater:
    """Streaming update path: consumes observation frames, owns all state."""

    def __init__(
        self,
        stft_cfg: StftConfig,
        num_sources: int = 2,
        channels: int = 2,
        dereverb_cfg: dereverb.DereverbConfig | None = None,
        separation_cfg: SeparationConfig | None = None,
        reference_channel: int = 0,
    ):
        self.stft_cfg = stft_cfg
        self.num_sources = num_sources
        self.channels = channels
        self.dereverb_cfg = dereverb_cfg
        self.separation_cfg = separation_cfg or SeparationConfig()
        self.reference_channel = reference_channel
        bins = stft_cfg.num_bins
        self.sep = SeparationState(bins, num_sources, channels)
        if dereverb_cfg is not None:
            depth = dereverb_cfg.prediction_delay + dereverb_cfg.filter_order - 1
            self.history = dereverb.FrameHistory(bins, channels, depth)
            self.dv = [
                dereverb.DereverbState(dereverb_cfg, bins, channels)
                for _ in range(num_sources)
            ]
        else:
            self.history = None
            self.dv = None
        self.frame_index = 0
        self._power_sum = 0.0

    @property
    def wpe_enabled(self) -> bool:
        return self.dv is not None

    def _sigma_floor(self) -> float:
        cfg = self.separation_cfg
        if self.frame_index == 0:
            return cfg.sigma_floor_abs
        mean_power = self._power_sum / self.frame_index
        return max(cfg.sigma_floor_abs, cfg.sigma_floor_rel * mean_power)

    def _frame_power(self, x: np.ndarray) -> float:
        weights = np.full(x.shape[0], 2.0)
        weights[0] = 1.0
        weights[-1] = 1.0
        total = np.einsum("b,bm->", weights, np.abs(x) ** 2)
        return float(total) / (self.stft_cfg.frame_len * self.channels)

    def _dereverb_all(self, x: np.ndarray, xbar) -> np.ndarray:
        """Per-source dereverberated vectors with the current filters (B, N, M)."""
        if not self.wpe_enabled:
            return np.repeat(x[:, None, :], self.num_sources, axis=1)
        return np.stack(
            [dereverb.dereverberate(self.dv[n], x, xbar) for n in range(self.num_sources)],
            axis=1,
        )

    def process_frame(self, x: np.ndarray) -> FrameResult:
        """Run the full update pipeline on one observation frame (B, M)."""
        i = self.frame_index
        bins = self.stft_cfg.num_bins
        if x.shape != (bins, self.channels):
            raise ValueError(f"expected {(bins, self.channels)}, got {x.shape}")
        xbar = (
            dereverb.build_xbar(self.history, self.dereverb_cfg)
            if self.wpe_enabled
            else None
        )
        floor = self._sigma_floor()
        # (1) estimates with the previous frame's filters
        z_pre = self._dereverb_all(x, xbar)
        y_pre = separation.separate(self.sep.Q, z_pre)
        # (2) source variances from the two-sided bin sum
        sigma = separation.estimate_variance(y_pre, self.stft_cfg.frame_len, floor)
        # (3) WPE update per source with the fresh variances
        if self.wpe_enabled:
            for n in range(self.num_sources):
                dereverb.update_wpe(
                    self.dv[n], x, xbar, float(sigma[n]), frame_index=i, source=n
                )
            self.history.push(x)
        # (4) dereverberate with the updated filters
        z_new = self._dereverb_all(x, xbar)
        # (5) covariance tracking
        separation.update_covariance(
            self.sep, z_new, sigma, self.separation_cfg.forgetting
        )
        # (6) ISS sweep plus invertibility check
        separation.iss_sweep(self.sep, self.separation_cfg.iss_sweeps)
        if separation.min_abs_det(self.sep.Q) <= separation.DET_FLOOR:
            raise ConfigError(f"separation matrix became singular at frame {i}")
        scale = separation.projection_back_scale(self.sep.Q, self.reference_channel)
        y_out = scale * separation.separate(self.sep.Q, z_new)
        self._power_sum += self._frame_power(x)
        self.frame_index = i + 1
        return FrameResult(i, y_pre, y_out, sigma, scale)

    def composed_filters(self, apply_scale: bool = True) -> ComposedFilter:
        """Current taps W(f, l); rows are projection-back scaled by default."""
        scale = (
            separation.projection_back_scale(self.sep.Q, self.reference_channel)
            if apply_scale
            else None
        )
        g = [state.G for state in self.dv] if self.wpe_enabled else None
        return compose_filters(
            g,
            self.sep.Q,
            self.dereverb_cfg.prediction_delay if self.wpe_enabled else 0,
            scale=scale,
        )


def evaluate_cost(
    y_history: np.ndarray,
    sigma_history: np.ndarray,
    q: np.ndarray,
    frame_len: int,
    forgetting: float,
) -> float:
    """Online negative log-likelihood (test oracle; keeps full history).

    y_history: (frames, B, N) one-sided estimates; sigma_history: (frames, N);
    q: (B, N, M) separation matrices of the latest frame.
    """
    frames = y_history.shape[0]
    if frames == 0 or np.any(sigma_history <= 0.0):
        raise ValueError("need at least one frame and positive variances")
    weights = np.full(y_history.shape[1], 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    _, logdet = np.linalg.slogdet(q)
    det_term = -2.0 * float(np.sum(weights * logdet))
    decay = forgetting ** np.arange(frames - 1, -1, -1)
    per_frame = np.einsum("b,ibn->in", weights, np.abs(y_history) ** 2) / sigma_history
    data = np.sum(
        decay[:, None] * (np.sum(weights) * np.log(sigma_history) + per_frame)
    )
    return det_term + float(data / np.sum(decay))
