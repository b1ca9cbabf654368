"""Small dense symmetric linear algebra.

Everything here works on plain ``numpy`` arrays of dimension at most ~10.
Inversion is Gauss-Jordan with partial pivoting and eigenvalues come from
cyclic Jacobi sweeps, so the results do not depend on the LAPACK build.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateUpdate, ShapeMismatch, Singular

SINGULAR_RTOL = 1e-12
DEGENERATE_UPDATE_TOL = 1e-12


def as_sym(m) -> np.ndarray:
    """Return ``m`` as a float array, symmetrized as ``(m + m.T) / 2``."""
    a = np.array(m, dtype=float, ndmin=2)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def as_matrix(m) -> np.ndarray:
    a = np.array(m, dtype=float, ndmin=2)
    if a.ndim != 2 or a.size == 0:
        raise ShapeMismatch(f"expected a non-empty 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch("matrix has non-finite entries")
    return a


def _gauss_jordan(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        raise Singular("zero matrix")
    aug = np.hstack([a.astype(float, copy=True), np.eye(n)])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[piv, col]) < SINGULAR_RTOL * scale:
            raise Singular(f"pivot {aug[piv, col]:.3e} below {SINGULAR_RTOL:g} x max entry {scale:.3e}")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        aug[col] /= aug[col, col]
        factors = aug[:, col].copy()
        factors[col] = 0.0
        aug -= np.outer(factors, aug[col])
    return aug[:, n:]


def invert(m) -> np.ndarray:
    """Inverse of a symmetric matrix; the result is symmetrized.

    Raises ``Singular`` when a pivot falls below ``1e-12`` times the largest
    absolute entry.
    """
    a = as_sym(m)
    return as_sym(_gauss_jordan(a))


def invert_general(m) -> np.ndarray:
    """Gauss-Jordan inverse without the symmetry assumption."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch(f"cannot invert non-square shape {a.shape}")
    return _gauss_jordan(a)


def block_inverse(c, b, d) -> np.ndarray:
    """Inverse of ``[[c, b], [b.T, d]]`` assembled blockwise via the Schur complement."""
    c = as_sym(c)
    d = as_sym(d)
    b = np.array(b, dtype=float, ndmin=2)
    if b.shape != (c.shape[0], d.shape[0]):
        raise ShapeMismatch(f"off-diagonal block has shape {b.shape}, expected {(c.shape[0], d.shape[0])}")
    c_inv = invert(c)
    cib = c_inv @ b
    schur_inv = invert(d - b.T @ cib)
    top_right = -cib @ schur_inv
    top_left = c_inv + cib @ schur_inv @ cib.T
    out = np.block([[top_left, top_right], [top_right.T, schur_inv]])
    return as_sym(out)


def rank_one_inverse_update(c_inv, b, d) -> np.ndarray:
    """Return ``(c + b d^T)^{-1}`` given ``c^{-1}``.

    The symmetric part is returned when ``b`` equals ``d``; otherwise the
    raw (generally non-symmetric) update.
    """
    c_inv = as_matrix(c_inv)
    b = np.asarray(b, dtype=float).reshape(-1)
    d = np.asarray(d, dtype=float).reshape(-1)
    if c_inv.shape[0] != c_inv.shape[1] or b.size != c_inv.shape[0] or d.size != c_inv.shape[0]:
        raise ShapeMismatch("update vectors must match the inverse's dimension")
    cb = c_inv @ b
    dc = d @ c_inv
    denom = 1.0 + float(d @ cb)
    if abs(denom) < DEGENERATE_UPDATE_TOL:
        raise DegenerateUpdate(f"1 + d^T C^-1 b = {denom:.3e}")
    out = c_inv - np.outer(cb, dc) / denom
    if np.array_equal(b, d):
        out = 0.5 * (out + out.T)
    return out


def jacobi_eigh(m, rtol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with ascending values and eigenvectors in
    the columns of ``vectors``.
    """
    a = as_sym(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0)
        if off < rtol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * norm:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a[p, q] = a[q, p] = 0.0
                v = v @ rot
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def sym_eigenvalues(m) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    return jacobi_eigh(m)[0]


def max_abs(m) -> float:
    return float(np.max(np.abs(m)))
