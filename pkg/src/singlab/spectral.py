"""Dense numeric linear algebra used by the experiments: smallest singular
values, kernel vectors, distances to column spans and centred operator
norms."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.linalg

from .exact import exact_rank, to_integer_rows


def _rational_rows(M) -> list[list[int]] | None:
    """Integer rows with the same rank as M, or None for non-rational input.

    Integer dtypes, Fraction/int object arrays and float arrays whose
    entries are all integers count as rational."""
    if isinstance(M, np.ndarray):
        if M.dtype.kind in "iub":
            return M.astype(object).tolist()
        if M.dtype.kind == "f":
            if np.all(np.isfinite(M)) and np.all(M == np.round(M)):
                return [[int(v) for v in row] for row in M.tolist()]
            return None
        if M.dtype == object:
            rows = M.tolist()
        else:
            return None
    else:
        rows = [list(r) for r in M]
    flat = [v for r in rows for v in r]
    if all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in flat):
        return to_integer_rows(rows)
    if all(isinstance(v, (int, float)) for v in flat) and all(float(v).is_integer() for v in flat):
        return [[int(v) for v in r] for r in rows]
    return None


def _as_float(M) -> np.ndarray:
    if isinstance(M, np.ndarray) and M.dtype.kind == "f":
        return M
    return np.array([[float(v) for v in row] for row in (M.tolist() if isinstance(M, np.ndarray) else M)])


def smallest_singular(M, exact_check: bool = True) -> float:
    """s_n(M) = min over unit x of |Mx|.

    Rational input that is rank deficient returns exactly 0.0 after a
    fraction-free rank computation; otherwise the value comes from a
    bidiagonalisation + QR iteration SVD (LAPACK gesvd)."""
    A = _as_float(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("smallest_singular needs a square matrix")
    if exact_check:
        rows = _rational_rows(M)
        if rows is not None and exact_rank(rows) < len(rows):
            return 0.0
    s = scipy.linalg.svd(A, compute_uv=False, lapack_driver="gesvd")
    return float(s[-1])


def jacobi_singular_values(M, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Singular values by one-sided (Hestenes) Jacobi rotations, descending.

    Kept as an independent route for cross-checking the LAPACK path."""
    U = np.array(_as_float(M), dtype=np.float64, copy=True)
    n = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = U[:, i] @ U[:, i]
                b = U[:, j] @ U[:, j]
                g = U[:, i] @ U[:, j]
                if abs(g) <= tol * np.sqrt(a * b) or g == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta)) if zeta != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ui = U[:, i].copy()
                U[:, i] = c * ui - s * U[:, j]
                U[:, j] = s * ui + c * U[:, j]
        if not rotated:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def kernel_vector(A) -> np.ndarray:
    """Unit vector v with Av ~ 0 for an (n-1) x n matrix.

    The first coordinate with magnitude above 1e-8 is made positive."""
    B = _as_float(A)
    if B.ndim != 2:
        raise ValueError("kernel_vector needs a matrix")
    n = B.shape[1]
    if B.shape[0] == 0:
        v = np.zeros(n)
        v[0] = 1.0
        return v
    _, _, vt = scipy.linalg.svd(B, full_matrices=True, lapack_driver="gesvd")
    v = vt[-1].copy()
    v /= np.linalg.norm(v)
    big = np.flatnonzero(np.abs(v) > 1e-8)
    if big.size and v[big[0]] < 0:
        v = -v
    return v


def dist_to_colspan(M, i: int) -> float:
    """Distance from column i (0-based) to the span of the other columns."""
    A = _as_float(M)
    n = A.shape[1]
    if not 0 <= i < n:
        raise IndexError("column index out of range")
    col = A[:, i]
    rest = np.delete(A, i, axis=1)
    if rest.shape[1] == 0:
        return float(np.linalg.norm(col))
    rows = _rational_rows(M)
    if rows is not None:
        full = exact_rank(rows)
        others = exact_rank([r[:i] + r[i + 1 :] for r in rows])
        if full == others:
            return 0.0
    coef, *_ = np.linalg.lstsq(rest, col, rcond=None)
    return float(np.linalg.norm(col - rest @ coef))


def opnorm_centered(M, mean: float, rtol: float = 1e-6, max_iter: int = 100_000) -> float:
    """Spectral norm of M - mean * J by power iteration on the Gram operator."""
    B = _as_float(M) - float(mean)
    if not np.any(B):
        return 0.0
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(B.shape[1])
    v /= np.linalg.norm(v)
    prev = 0.0
    lam = 0.0
    for _ in range(max_iter):
        w = B.T @ (B @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        v = w / lam
        if abs(lam - prev) <= 1e-3 * rtol * lam:
            break
        prev = lam
    # Rayleigh quotient of the converged vector
    return float(np.sqrt(v @ (B.T @ (B @ v))))
