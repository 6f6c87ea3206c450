"""BSS-eval style SDR/SIR/SAR decomposition and improvement curves.

Each estimate is decomposed into target, interference and artifact parts by
least-squares projection onto spans of delayed references (the reverberant
source images at the reference microphone).  Ratios are capped at +-100 dB
so report files stay finite.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.signal

DB_CAP = 100.0


@dataclass(frozen=True)
class EvalResult:
    sdr: np.ndarray  # per source, dB
    sir: np.ndarray
    sar: np.ndarray
    permutation: tuple  # estimate index assigned to each reference
    window_start: float = 0.0


def _db_ratio(num: float, den: float) -> float:
    if num <= 0.0:
        return -DB_CAP
    if den <= 0.0:
        return DB_CAP
    return float(np.clip(10.0 * np.log10(num / den), -DB_CAP, DB_CAP))


def _delayed_projection(target: np.ndarray, bases, proj_len: int) -> np.ndarray:
    """Least-squares projection of `target` onto delayed copies of `bases`.

    Returns the projected signal (same length as target).  Correlations are
    computed via FFT; the normal equations use one Toeplitz block per basis
    pair, as in the classical BSS-eval implementation.
    """
    n_bases = len(bases)
    length = len(target)
    gram = np.zeros((n_bases * proj_len, n_bases * proj_len))
    for i in range(n_bases):
        for j in range(i, n_bases):
            corr = scipy.signal.fftconvolve(bases[i], bases[j][::-1])
            mid = length - 1
            # entry (k, k') = sum_t b_i(t - k) b_j(t - k') = corr[mid + k' - k]
            col = corr[mid : mid - proj_len : -1]
            row = corr[mid : mid + proj_len]
            block = scipy.linalg.toeplitz(col, row)
            gram[i * proj_len : (i + 1) * proj_len, j * proj_len : (j + 1) * proj_len] = block
            if i != j:
                gram[j * proj_len : (j + 1) * proj_len, i * proj_len : (i + 1) * proj_len] = block.T
    rhs = np.zeros(n_bases * proj_len)
    for i in range(n_bases):
        corr = scipy.signal.fftconvolve(target, bases[i][::-1])
        rhs[i * proj_len : (i + 1) * proj_len] = corr[length - 1 : length - 1 + proj_len]
    try:
        coeffs = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        coeffs = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    proj = np.zeros(length)
    for i in range(n_bases):
        filt = coeffs[i * proj_len : (i + 1) * proj_len]
        proj += scipy.signal.fftconvolve(bases[i], filt)[:length]
    return proj


def _decompose(estimate: np.ndarray, references, matched: int, proj_len: int):
    s_target = _delayed_projection(estimate, [references[matched]], proj_len)
    p_all = _delayed_projection(estimate, list(references), proj_len)
    e_interf = p_all - s_target
    e_artif = estimate - p_all
    return s_target, e_interf, e_artif


def _metrics_for_assignment(estimates, references, assignment, proj_len):
    sdr = np.zeros(len(references))
    sir = np.zeros(len(references))
    sar = np.zeros(len(references))
    for ref_idx, est_idx in enumerate(assignment):
        est = estimates[est_idx]
        s_t, e_i, e_a = _decompose(est, references, ref_idx, proj_len)
        sdr[ref_idx] = _db_ratio(np.sum(s_t**2), np.sum((e_i + e_a) ** 2))
        sir[ref_idx] = _db_ratio(np.sum(s_t**2), np.sum(e_i**2))
        sar[ref_idx] = _db_ratio(np.sum((s_t + e_i) ** 2), np.sum(e_a**2))
    return sdr, sir, sar


def bss_eval(
    estimates,
    references,
    proj_len: int = 512,
    permutation: tuple | None = None,
    window_start: float = 0.0,
) -> EvalResult:
    """SDR/SIR/SAR for each reference; permutation maximizes mean SIR.

    `estimates` and `references` are same-length 1-D signal lists.  Passing
    `permutation` pins the estimate-to-reference assignment (used by the
    sliding evaluation to avoid per-window flips).
    """
    estimates = [np.asarray(e, dtype=float) for e in estimates]
    references = [np.asarray(r, dtype=float) for r in references]
    lengths = {len(s) for s in itertools.chain(estimates, references)}
    if len(lengths) != 1:
        raise ValueError("estimates and references must share one length")
    for r in references:
        if np.sum(r**2) == 0.0:
            raise ValueError("zero-energy reference")
    if permutation is not None:
        perm = tuple(permutation)
        sdr, sir, sar = _metrics_for_assignment(estimates, references, perm, proj_len)
        return EvalResult(sdr, sir, sar, perm, window_start)
    best = None
    for perm in itertools.permutations(range(len(estimates))):
        sdr, sir, sar = _metrics_for_assignment(estimates, references, perm, proj_len)
        if best is None or np.mean(sir) > np.mean(best.sir):
            best = EvalResult(sdr, sir, sar, perm, window_start)
    return best


@dataclass(frozen=True)
class Improvement:
    delta_sdr: np.ndarray
    delta_sir: np.ndarray
    delta_sar: np.ndarray


def improvement(result: EvalResult, baseline: EvalResult) -> Improvement:
    """Elementwise dB gain of `result` over the unprocessed-mixture baseline."""
    return Improvement(
        delta_sdr=result.sdr - baseline.sdr,
        delta_sir=result.sir - baseline.sir,
        delta_sar=result.sar - baseline.sar,
    )


def mixture_baseline(
    mixture_ref: np.ndarray, references, proj_len: int = 512
) -> EvalResult:
    """Baseline metrics with the unprocessed reference-mic mixture as every estimate."""
    estimates = [mixture_ref for _ in references]
    return bss_eval(
        estimates, references, proj_len=proj_len, permutation=tuple(range(len(references)))
    )


def sliding_eval(
    estimates,
    references,
    sample_rate: int,
    window_seconds: float,
    hop_seconds: float,
    proj_len: int = 512,
) -> list:
    """bss_eval over sliding windows with a globally fixed permutation."""
    estimates = [np.asarray(e, dtype=float) for e in estimates]
    references = [np.asarray(r, dtype=float) for r in references]
    length = len(references[0])
    win = int(round(window_seconds * sample_rate))
    hop = int(round(hop_seconds * sample_rate))
    if win > length:
        raise ValueError("window longer than the signal")
    global_perm = bss_eval(estimates, references, proj_len=proj_len).permutation
    results = []
    for start in range(0, length - win + 1, hop):
        sl = slice(start, start + win)
        results.append(
            bss_eval(
                [e[sl] for e in estimates],
                [r[sl] for r in references],
                proj_len=proj_len,
                permutation=global_perm,
                window_start=start / sample_rate,
            )
        )
    return results
