"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Products, thin
QR and SVD are delegated to LAPACK through ``numpy.linalg``; the dense
eigensolver is implemented here (Hessenberg reduction followed by a
single-shift complex QR iteration) so that it can be cross-checked against
the SVD independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError, RankDeficiencyError

_EPS = np.finfo(float).eps


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex128 array (vectors become columns)."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_complex_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``a = left @ diag(singular_values) @ right^H``.

    ``right`` holds the right singular vectors as columns (not ``V^H``).
    """

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.conj().T

    def rank(self, rtol: float = 1e-9) -> int:
        s = self.singular_values
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.count_nonzero(s > rtol * s[0]))


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError("matmul expects two 2-D arrays")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def hermitian(a) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(a, dtype=np.complex128).conj().T


def qr_thin(a, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR with the diagonal of ``r`` real and positive.

    Raises :class:`RankDeficiencyError` if any pivot of ``r`` falls below
    ``tol`` in magnitude.
    """
    a = as_complex_matrix(a, "qr input")
    rows, cols = a.shape
    if rows < cols:
        raise DimensionError(f"qr_thin needs rows >= cols, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    diag = np.diagonal(r)
    mag = np.abs(diag)
    if np.any(mag < tol):
        raise RankDeficiencyError(
            f"rank-deficient input to qr_thin (smallest pivot {mag.min():.3e})"
        )
    phase = diag / mag
    q = q * phase
    r = phase.conj()[:, None] * r
    # exact real diagonal after the phase fix
    r[np.diag_indices(cols)] = mag
    return q, r


def svd(a, full_matrices: bool = False) -> SvdResult:
    a = as_complex_matrix(a, "svd input")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return SvdResult(left=u, singular_values=s, right=vh.conj().T)


def _givens(a: complex, b: complex) -> tuple[float, complex]:
    """Rotation ``[[c, s], [-conj(s), c]]`` mapping ``(a, b)`` to ``(rho, 0)``."""
    abs_a = abs(a)
    if b == 0:
        return 1.0, 0j
    if abs_a == 0:
        return 0.0, 1 + 0j
    rho = np.hypot(abs_a, abs(b))
    return abs_a / rho, (a / abs_a) * np.conj(b) / rho


def hessenberg(a) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction ``a = z @ h @ z^H`` with ``h`` upper Hessenberg."""
    h = as_complex_matrix(a, "hessenberg input").copy()
    n = h.shape[0]
    if h.shape[1] != n:
        raise DimensionError(f"square matrix required, got {h.shape}")
    z = np.eye(n, dtype=np.complex128)
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = np.linalg.norm(x)
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        z[:, k + 1 :] -= 2.0 * np.outer(z[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h, z


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    """Eigenvalue of ``[[a, b], [c, d]]`` closest to ``d``."""
    tr_half = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = tr_half + disc, tr_half - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def schur(a, max_iter_per_eig: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form ``a = z @ t @ z^H`` by shifted QR on the Hessenberg form."""
    t, z = hessenberg(a)
    n = t.shape[0]
    hi = n - 1
    iters = 0
    total_iters = 0
    cap = max_iter_per_eig * max(n, 1)
    while hi > 0:
        # deflate converged trailing eigenvalue
        if abs(t[hi, hi - 1]) <= _EPS * (abs(t[hi, hi]) + abs(t[hi - 1, hi - 1])):
            t[hi, hi - 1] = 0.0
            hi -= 1
            iters = 0
            continue
        lo = hi - 1
        while lo > 0:
            if abs(t[lo, lo - 1]) <= _EPS * (abs(t[lo, lo]) + abs(t[lo - 1, lo - 1])):
                t[lo, lo - 1] = 0.0
                break
            lo -= 1
        iters += 1
        total_iters += 1
        if total_iters > cap:
            raise NumericalError("QR iteration did not converge")
        if iters % 11 == 10:
            # exceptional shift to break cycles
            mu = t[hi, hi] + 0.75 * abs(t[hi, hi - 1])
        else:
            mu = _wilkinson_shift(t[hi - 1, hi - 1], t[hi - 1, hi], t[hi, hi - 1], t[hi, hi])
        idx = np.arange(lo, hi + 1)
        t[idx, idx] -= mu
        rotations = []
        for k in range(lo, hi):
            c, s = _givens(t[k, k], t[k + 1, k])
            rotations.append((c, s))
            row_k = t[k, k:].copy()
            row_k1 = t[k + 1, k:].copy()
            t[k, k:] = c * row_k + s * row_k1
            t[k + 1, k:] = -np.conj(s) * row_k + c * row_k1
        for k, (c, s) in zip(range(lo, hi), rotations):
            top = min(k + 2, hi) + 1
            col_k = t[:top, k].copy()
            col_k1 = t[:top, k + 1].copy()
            t[:top, k] = c * col_k + np.conj(s) * col_k1
            t[:top, k + 1] = -s * col_k + c * col_k1
            zk = z[:, k].copy()
            zk1 = z[:, k + 1].copy()
            z[:, k] = c * zk + np.conj(s) * zk1
            z[:, k + 1] = -s * zk + c * zk1
        t[idx, idx] += mu
    return np.triu(t), z


def _triangular_eigenvectors(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    y = np.zeros((n, n), dtype=np.complex128)
    small = max(_EPS * np.linalg.norm(t), np.finfo(float).tiny)
    for k in range(n):
        y[k, k] = 1.0
        lam = t[k, k]
        for i in range(k - 1, -1, -1):
            denom = t[i, i] - lam
            if abs(denom) < small:
                denom = small
            y[i, k] = -(t[i, i + 1 : k + 1] @ y[i + 1 : k + 1, k]) / denom
    return y


def _ordering(values: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary: modulus, then real, then imag (all descending)
    return np.lexsort((-values.imag, -values.real, -np.abs(values)))


def eig_dense(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit-norm eigenvectors of a small dense square matrix.

    Eigenpairs are ordered by modulus (descending), ties broken by larger
    real part, then larger imaginary part.
    """
    a = as_complex_matrix(a, "eig input")
    n, n2 = a.shape
    if n != n2:
        raise DimensionError(f"square matrix required, got {a.shape}")
    t, z = schur(a)
    vectors = z @ _triangular_eigenvectors(t)
    vectors /= np.linalg.norm(vectors, axis=0)
    values = np.diagonal(t).copy()
    order = _ordering(values)
    return values[order], vectors[:, order]


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, entry ``(k, l) = exp(-2j*pi*k*l/n) / sqrt(n)``."""
    if n < 1:
        raise ValueError("dft_matrix needs n >= 1")
    k = np.arange(n)
    # reduce k*l mod n before scaling so large n keeps full phase accuracy
    phase = (np.outer(k, k) % n) / n
    return np.exp(-2j * np.pi * phase) / np.sqrt(n)


def complex_gaussian(rng: np.random.Generator, rows: int, cols: int | None = None,
                     variance: float = 1.0) -> np.ndarray:
    """i.i.d. CN(0, variance) samples; a vector when ``cols`` is None."""
    if variance < 0:
        raise ValueError("variance must be non-negative")
    shape = (rows,) if cols is None else (rows, cols)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Haar-ish orthonormal ``rows x cols`` matrix (QR of a Gaussian draw)."""
    q, _ = qr_thin(complex_gaussian(rng, rows, cols))
    return q
