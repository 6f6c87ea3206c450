"""Per-source online WPE dereverberation with RLS updates.

State is vectorized over frequency bins: arrays carry a leading bin axis B.
For M channels and filter order L the stacked regression vector has length
K = M*L.  The recursion tracks the inverse spatio-temporal covariance
directly via the matrix inversion lemma; `accumulate_direct` provides the
direct-form statistics used as a test oracle.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalDivergenceError
from .numerics import solve_hermitian


@dataclass(frozen=True)
class DereverbConfig:
    """WPE tunables: prediction delay D, order L, forgetting beta, Rinv init."""

    prediction_delay: int = 2
    filter_order: int = 10
    forgetting: float = 0.999
    regularizer: float = 1e3

    def __post_init__(self):
        if self.prediction_delay < 1:
            raise ConfigError("prediction delay must be >= 1")
        if self.filter_order < 1:
            raise ConfigError("filter order must be >= 1")
        if not 0.0 < self.forgetting <= 1.0:
            raise ConfigError("forgetting factor must be in (0, 1]")
        if self.regularizer <= 0.0:
            raise ConfigError("regularizer must be positive")


class FrameHistory:
    """Ring of past observation frames shared by all per-source states.

    Missing history at stream start reads as zeros.
    """

    def __init__(self, num_bins: int, channels: int, depth: int):
        self.num_bins = num_bins
        self.channels = channels
        self.depth = depth
        self._frames = deque(maxlen=depth)  # newest last

    def push(self, x: np.ndarray) -> None:
        x = np.asarray(x)
        if x.shape != (self.num_bins, self.channels):
            raise ValueError(f"expected {(self.num_bins, self.channels)}, got {x.shape}")
        self._frames.append(np.array(x))

    def lag(self, k: int) -> np.ndarray:
        """Frame k steps in the past (k=1 is the most recent pushed frame)."""
        if k <= 0:
            raise ValueError("lag must be >= 1")
        if k > len(self._frames):
            return np.zeros((self.num_bins, self.channels), dtype=complex)
        return self._frames[-k]


def build_xbar(history: FrameHistory, cfg: DereverbConfig) -> np.ndarray:
    """Stacked delayed observations, most recent lag (i-D) first.

    Call before pushing the current frame; lags are D .. D+L-1 relative to
    the frame being processed.  Returns (B, M*L).
    """
    parts = [history.lag(cfg.prediction_delay + j) for j in range(cfg.filter_order)]
    return np.concatenate(parts, axis=1)


class DereverbState:
    """Filter G and inverse covariance Rinv for one source, all bins."""

    def __init__(self, cfg: DereverbConfig, num_bins: int, channels: int):
        self.cfg = cfg
        self.num_bins = num_bins
        self.channels = channels
        k = channels * cfg.filter_order
        self.stacked_len = k
        self.G = np.zeros((num_bins, k, channels), dtype=complex)
        self.Rinv = np.broadcast_to(
            cfg.regularizer * np.eye(k, dtype=complex), (num_bins, k, k)
        ).copy()


def dereverberate(state: DereverbState, x: np.ndarray, xbar: np.ndarray) -> np.ndarray:
    """z = x - G^H xbar with the filter currently held in state.  (B, M)."""
    return x - np.einsum("bkm,bk->bm", state.G.conj(), xbar)


def update_wpe(
    state: DereverbState,
    x: np.ndarray,
    xbar: np.ndarray,
    sigma: float,
    frame_index: int = -1,
    source: int = -1,
) -> np.ndarray:
    """One RLS step for all bins; returns the a-priori z (pre-update G).

    Order per bin: Kalman gain k, Rinv downdate, z with the old G, then
    G <- G + k z^H.  Rinv is re-symmetrized to stop Hermitian drift.
    """
    beta = state.cfg.forgetting
    rx = np.einsum("bij,bj->bi", state.Rinv, xbar)  # Rinv @ xbar
    denom = beta * sigma + np.einsum("bi,bi->b", xbar.conj(), rx).real
    gain = rx / denom[:, None]
    xr = np.einsum("bi,bij->bj", xbar.conj(), state.Rinv)  # xbar^H Rinv
    state.Rinv = (state.Rinv - gain[:, :, None] * xr[:, None, :]) / beta
    state.Rinv = 0.5 * (state.Rinv + state.Rinv.conj().swapaxes(1, 2))
    z = dereverberate(state, x, xbar)
    state.G = state.G + gain[:, :, None] * z.conj()[:, None, :]
    if not (np.all(np.isfinite(state.G)) and np.all(np.isfinite(state.Rinv))):
        bad = np.argwhere(~np.isfinite(state.G))
        bin_index = int(bad[0][0]) if len(bad) else None
        raise NumericalDivergenceError(
            "non-finite WPE update",
            frame=frame_index,
            bin_index=bin_index,
            source=source,
        )
    return z


def accumulate_direct(
    r: np.ndarray,
    p: np.ndarray,
    xbar: np.ndarray,
    x: np.ndarray,
    sigma: float,
    beta: float,
    sigma_floor: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Direct-form covariance recursion (test oracle for the RLS path).

    R <- beta R + xbar xbar^H / sigma ; P <- beta P + xbar x^H / sigma.
    """
    if sigma < sigma_floor:
        raise ValueError(f"sigma {sigma} below floor {sigma_floor}")
    r = beta * r + np.einsum("bi,bj->bij", xbar, xbar.conj()) / sigma
    p = beta * p + np.einsum("bi,bm->bim", xbar, x.conj()) / sigma
    return r, p


def solve_direct(r: np.ndarray, p: np.ndarray) -> np.ndarray:
    """G = R^{-1} P per bin (test oracle counterpart of the RLS recursion)."""
    out = np.empty_like(p)
    for b in range(r.shape[0]):
        rb = 0.5 * (r[b] + r[b].conj().T)
        out[b] = solve_hermitian(rb, p[b])
    return out
