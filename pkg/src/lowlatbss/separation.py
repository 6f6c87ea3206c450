"""Online IVA: source variances, weighted covariances and ISS updates.

The separation matrix Q stacks conjugated steering rows: row n equals
q_n^H, so Y_n = q_n^H z_n = Q[n, :] @ z_n.  State is vectorized over bins
with a leading axis B.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateDirectionError

DET_FLOOR = 1e-12
ISS_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class SeparationConfig:
    """IVA tunables: covariance forgetting, ISS sweeps per frame, variance floor."""

    forgetting: float = 0.99
    iss_sweeps: int = 1
    sigma_floor_rel: float = 1e-8
    sigma_floor_abs: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.forgetting < 1.0:
            raise ConfigError("forgetting factor must be in (0, 1)")
        if self.iss_sweeps < 1:
            raise ConfigError("need at least one ISS sweep")
        if self.sigma_floor_abs <= 0.0 or self.sigma_floor_rel <= 0.0:
            raise ConfigError("variance floors must be positive")


class SeparationState:
    """Per-bin separation matrix Q (B, N, M) and covariances U (B, N, M, M)."""

    def __init__(self, num_bins: int, num_sources: int, channels: int):
        self.num_bins = num_bins
        self.num_sources = num_sources
        self.channels = channels
        eye = np.eye(num_sources, channels, dtype=complex)
        self.Q = np.broadcast_to(eye, (num_bins, num_sources, channels)).copy()
        eye_m = np.eye(channels, dtype=complex)
        self.U = np.broadcast_to(
            eye_m, (num_bins, num_sources, channels, channels)
        ).copy()


def estimate_variance(
    y_bins: np.ndarray, frame_len: int, sigma_floor: float
) -> np.ndarray:
    """Per-source variance sigma_n = sum_f |Y_n(f)|^2 / F, floored.

    `y_bins` holds one-sided bins (B = F/2 + 1, N); the two-sided sum is
    reconstructed by conjugate symmetry (interior bins count twice).
    """
    power = np.abs(y_bins) ** 2
    weights = np.full(power.shape[0], 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    sigma = np.einsum("b,bn->n", weights, power) / frame_len
    return np.maximum(sigma, sigma_floor)


def update_covariance(
    state: SeparationState, z: np.ndarray, sigma: np.ndarray, forgetting: float
) -> None:
    """U_n <- alpha U_n + (1 - alpha) z_n z_n^H / sigma_n for all bins.

    `z` is the dereverberated vector per source, shape (B, N, M).
    """
    outer = np.einsum("bnm,bnk->bnmk", z, z.conj())
    state.U = forgetting * state.U + (1.0 - forgetting) * outer / sigma[None, :, None, None]


def separate(q: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Y_n = q_n^H z_n given Q rows (B, N, M) and per-source z (B, N, M)."""
    return np.einsum("bnm,bnm->bn", q, z)


def iss_step(q: np.ndarray, u: np.ndarray, steered: int) -> np.ndarray:
    """One ISS rank-one update of Q for steered source index k, all bins.

    Returns the updated Q.  Raises DegenerateDirectionError when a
    denominator q_k^H U_n q_k collapses.
    """
    k = steered
    qk_col = q[:, k, :].conj()  # q_k as a column vector per bin
    u_qk = np.einsum("bnij,bj->bni", u, qk_col)  # U_n q_k
    denom = np.einsum("bm,bnm->bn", q[:, k, :], u_qk).real  # q_k^H U_n q_k
    if np.any(denom < ISS_DENOM_FLOOR):
        bad = np.argwhere(denom < ISS_DENOM_FLOOR)[0]
        raise DegenerateDirectionError(
            f"ISS denominator {denom[tuple(bad)]:.3e} below floor",
            source=int(bad[1]),
            steered=k,
            bin_index=int(bad[0]),
        )
    numer = np.einsum("bnm,bnm->bn", q, u_qk)  # q_n^H U_n q_k
    v = numer / denom
    v[:, k] = 1.0 - 1.0 / np.sqrt(denom[:, k])
    return q - v[:, :, None] * q[:, k, :][:, None, :]


def iss_sweep(state: SeparationState, num_sweeps: int = 1) -> None:
    """Run the ISS update for k = 1..N, `num_sweeps` times."""
    q = state.Q
    for _ in range(num_sweeps):
        for k in range(state.num_sources):
            q = iss_step(q, state.U, k)
    state.Q = q


def min_abs_det(q: np.ndarray) -> float:
    """Smallest |det Q| across bins (invertibility check)."""
    return float(np.min(np.abs(np.linalg.det(q))))


def projection_back_scale(q: np.ndarray, reference: int = 0) -> np.ndarray:
    """Per-source output scale: row n uses entry (reference, n) of Q^{-1}.

    Returns (B, N) complex scales restoring each source's image at the
    reference channel.
    """
    qinv = np.linalg.inv(q)
    return qinv[:, reference, :]


def surrogate_cost(q: np.ndarray, u: np.ndarray) -> float:
    """Frame-local ISS objective: sum_n q_n^H U_n q_n - 2 log|det Q|.

    Accepts a single bin (N, M) / (N, M, M) or batched (B, ...) arrays;
    batched input returns the sum over bins.
    """
    q = np.asarray(q)
    if q.ndim == 2:
        q = q[None]
        u = np.asarray(u)[None]
    quad = np.einsum("bnm,bnmk,bnk->bn", q, u, q.conj()).real
    _, logdet = np.linalg.slogdet(q)
    return float(np.sum(quad) - 2.0 * np.sum(logdet))
