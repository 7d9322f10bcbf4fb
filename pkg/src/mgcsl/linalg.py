"""Dense linear-algebra kernels: spectra, matrix exponentials, Cholesky factors.

Thin wrappers around LAPACK-backed routines (Hessenberg reduction + shifted QR
for spectra, scaling-and-squaring Pade for the exponential) with the error
semantics the rest of the package relies on.  All inputs are real float64
matrices; spectra come back complex.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericError

# escalating diagonal jitter tried when a Cholesky factorization fails
JITTER_LADDER = (1e-10, 1e-8, 1e-6, 1e-4)


def _check_square(m, who):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{who} needs a square matrix, got shape {m.shape}")
    return m


def eigenvalues(m):
    """Complex spectrum of a real square matrix, as a 1-D complex array.

    Ordering follows the underlying QR iteration and is deterministic within
    one build.  Non-convergence of the iteration raises NumericError.
    """
    m = _check_square(m, "eigenvalues")
    if m.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise NumericError("eigenvalues: input contains non-finite entries")
    try:
        return np.asarray(np.linalg.eigvals(m), dtype=complex)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc


def eigen_pairs(m):
    """Spectrum plus right eigenvectors (columns of V), both complex."""
    m = _check_square(m, "eigen_pairs")
    if not np.all(np.isfinite(m)):
        raise NumericError("eigen_pairs: input contains non-finite entries")
    try:
        lam, vec = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration did not converge: {exc}") from exc
    return np.asarray(lam, dtype=complex), np.asarray(vec, dtype=complex)


def matrix_exponential(m):
    """exp(m) for a real square matrix."""
    m = _check_square(m, "matrix_exponential")
    if m.shape[0] == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix_exponential: input contains non-finite entries")
    out = scipy.linalg.expm(m)
    if not np.all(np.isfinite(out)):
        raise NumericError("matrix_exponential overflowed to non-finite values")
    return out


def cholesky(m, jitter=0.0):
    """Lower-triangular L with L L^T = m (+ jitter * I when needed).

    ``m`` must be symmetric to within 1e-10 relative to its largest entry.
    A caller-specified starting jitter is tried first; on failure the ladder
    1e-10, 1e-8, 1e-6, 1e-4 is climbed (entries below the starting jitter are
    skipped).  NumericError once the ladder is exhausted.
    """
    m = _check_square(m, "cholesky")
    n = m.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    if not np.all(np.isfinite(m)):
        raise NumericError("cholesky: input contains non-finite entries")
    tol = 1e-10 * (1.0 + float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > tol:
        raise DimensionError("cholesky: matrix is not symmetric within 1e-10")
    sym = 0.5 * (m + m.T)
    ladder = [float(jitter)] + [j for j in JITTER_LADDER if j > jitter]
    eye = np.eye(n)
    for j in ladder:
        try:
            return np.linalg.cholesky(sym + j * eye if j > 0.0 else sym)
        except np.linalg.LinAlgError:
            continue
    raise NumericError(
        f"cholesky failed even with jitter up to {ladder[-1]:g}"
    )
