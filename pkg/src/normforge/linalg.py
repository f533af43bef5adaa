"""Dense symmetric/PSD kernels: Gram products, inverse square roots, solves.

Everything here is small and dense by design; the expensive dimension in
this problem is the number of terms m, not the ambient dimension n.
"""

import logging

import numpy as np
import scipy.linalg

log = logging.getLogger("normforge.linalg")


class SymMatrix:
    """Dense symmetric matrix; symmetry is enforced at construction."""

    __slots__ = ("a",)

    def __init__(self, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries")
        scale = np.abs(a).max() if a.size else 0.0
        if scale > 0 and np.abs(a - a.T).max() > 1e-12 * scale:
            raise ValueError("matrix is not symmetric within 1e-12 of its max entry")
        sym = 0.5 * (a + a.T)
        sym.flags.writeable = False
        self.a = sym

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None):
        return self.a if dtype is None else self.a.astype(dtype)

    def __repr__(self):
        return f"SymMatrix(n={self.n})"


def gram(A, W=None) -> SymMatrix:
    """A^T W A for a k x n matrix A and nonnegative diagonal W (default I)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("A must be 2-d")
    if W is None:
        G = A.T @ A
    else:
        W = np.asarray(W, dtype=np.float64).ravel()
        if W.shape[0] != A.shape[0]:
            raise ValueError("diagonal length must match row count")
        G = (A * W[:, None]).T @ A
    return SymMatrix(G)


def inv_sqrt(S, floor: float = 0.0) -> SymMatrix:
    """Symmetric inverse square root via eigendecomposition.

    Eigenvalues are clamped from below at ``floor`` (an absolute value;
    callers typically pass a small multiple of the largest eigenvalue).
    """
    a = S.a if isinstance(S, SymMatrix) else SymMatrix(S).a
    lam, V = np.linalg.eigh(a)
    if floor > 0 and lam[0] < floor:
        log.info("inv_sqrt: eigenvalue floor triggered (min %.3e < floor %.3e)", lam[0], floor)
    lam = np.maximum(lam, floor)
    if lam[0] <= 0:
        raise ValueError("matrix is not positive definite and no floor was given")
    return SymMatrix((V * (1.0 / np.sqrt(lam))) @ V.T)


def solve_spd(S, b):
    """Solve S x = b for symmetric positive definite S (Cholesky)."""
    a = S.a if isinstance(S, SymMatrix) else SymMatrix(S).a
    b = np.asarray(b, dtype=np.float64)
    c, low = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    return scipy.linalg.cho_solve((c, low), b, check_finite=False)


def read_matrix_csv(path) -> np.ndarray:
    """Row-major CSV matrix reader; a single non-numeric first line is skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.replace(",", " ").split()]
    except ValueError:
        skip = 1
    out = np.loadtxt(path, delimiter=",", skiprows=skip, dtype=np.float64, ndmin=2)
    return out
