"""Dense complex linear-algebra kernels and the DFT convention.

All other modules go through these helpers so the DFT sign/normalization
convention and the positive-definiteness tolerance are fixed in one place.
The forward transform uses exp(-j*2*pi*f*tau/F); the inverse carries the
1/F factor and the positive exponent.
"""

import numpy as np
import scipy.linalg

from .errors import DecompositionError, NumericalContractError

HERMITIAN_RTOL = 1e-10
PIVOT_RTOL = 1e-12


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def mat_vec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Matrix-vector product with an explicit dimension check."""
    a = np.asarray(a)
    v = np.asarray(v)
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {v.shape}")
    return a @ v


def hermitian_residue(a: np.ndarray) -> float:
    """Relative deviation of `a` from its conjugate transpose."""
    a = np.asarray(a)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - a.conj().T) / scale)


def hermitian_quadratic(q: np.ndarray, u: np.ndarray) -> float:
    """Real-valued quadratic form q^H U q for Hermitian U.

    Raises NumericalContractError if U deviates from Hermitian symmetry or
    the imaginary residue of the form exceeds tolerance.
    """
    q = np.asarray(q)
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] != q.shape[0]:
        raise ValueError(f"dimension mismatch: {u.shape} x {q.shape}")
    if hermitian_residue(u) > HERMITIAN_RTOL:
        raise NumericalContractError("matrix is not Hermitian within tolerance")
    val = np.vdot(q, u @ q)
    scale = abs(val) + np.finfo(float).tiny
    if abs(val.imag) / scale > 1e-10:
        raise NumericalContractError(
            f"quadratic form has imaginary residue {val.imag / scale:.3e}"
        )
    return float(val.real)


def solve_hermitian(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive-definite A via Cholesky.

    A pivot below PIVOT_RTOL * trace(A) raises DecompositionError, as does
    a failed factorization.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    if hermitian_residue(a) > HERMITIAN_RTOL:
        raise NumericalContractError("matrix is not Hermitian within tolerance")
    trace = float(np.trace(a).real)
    try:
        c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DecompositionError(str(exc)) from exc
    pivots = np.diag(c).real ** 2
    if trace <= 0.0 or np.min(pivots) < PIVOT_RTOL * trace:
        raise DecompositionError(
            f"pivot {np.min(pivots):.3e} below tolerance for trace {trace:.3e}"
        )
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def forward_dft(v: np.ndarray) -> np.ndarray:
    """Unitary-free forward DFT; length must be a power of two."""
    v = np.asarray(v)
    if not is_power_of_two(v.shape[-1]):
        raise ValueError(f"length {v.shape[-1]} is not a power of two")
    return np.fft.fft(v)


def inverse_dft(spectrum: np.ndarray) -> np.ndarray:
    """Inverse DFT carrying the 1/F factor; length must be a power of two."""
    spectrum = np.asarray(spectrum)
    if not is_power_of_two(spectrum.shape[-1]):
        raise ValueError(f"length {spectrum.shape[-1]} is not a power of two")
    return np.fft.ifft(spectrum)


def two_sided(one_sided: np.ndarray, length: int) -> np.ndarray:
    """Rebuild a full conjugate-symmetric spectrum from bins 0..F/2.

    `one_sided` indexes the last axis; bins F/2+1..F-1 are filled with the
    conjugates of bins F/2-1..1.
    """
    one_sided = np.asarray(one_sided)
    if one_sided.shape[-1] != length // 2 + 1:
        raise ValueError(
            f"expected {length // 2 + 1} one-sided bins, got {one_sided.shape[-1]}"
        )
    tail = np.conj(one_sided[..., -2:0:-1])
    return np.concatenate([one_sided, tail], axis=-1)
