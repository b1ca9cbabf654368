"""Covariance of OLS estimators before and after adding one observation.

With ``G0 = A0' A0`` and ``G1 = G0 + a' a`` the augmented covariance splits as

    V11 = V00 - s2 * W - W11 (+ W22 when the new observation is correlated)

where ``W = G0^-1 a' a G0^-1 / (1 + d)``, ``d = a G0^-1 a'`` and ``W11`` is
the difference of the two sandwiches of ``D11 = A0' (Sigma0 - s2 I) A0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateUpdate, NotDiagonal, NotEqualVariance, NotPSD, ShapeMismatch
from .matrixcore import DEGENERATE_UPDATE_TOL, as_sym, max_abs, rank_one_inverse_update, sym_eigenvalues
from .model import AugmentedProblem, DesignMatrix, NoiseModel, validate_noise

NONNEG_RTOL = 1e-9


def ols_covariance(d: DesignMatrix, noise: NoiseModel) -> np.ndarray:
    """Exact OLS covariance ``G^-1 A' Sigma A G^-1``."""
    noise = validate_noise(noise, d.n)
    g_inv = d.gram_inverse()
    h = g_inv @ d.rows.T
    if noise.kind == "diagonal":
        meat = (h * noise.variances) @ h.T
    else:
        meat = h @ noise.covariance() @ h.T
    return as_sym(meat)


def leverage(d: DesignMatrix, a) -> tuple[float, float]:
    """Leverage ``a G^-1 a'`` of a new row and ``q = 1 + leverage``."""
    a = _row(d, a)
    lev = float(a @ d.gram_inverse() @ a)
    return lev, 1.0 + lev


def w_matrix(gram_inv: np.ndarray, a) -> np.ndarray:
    """The rank-one reduction ``G0^-1 a' a G0^-1 / q``."""
    a = np.asarray(a, dtype=float).reshape(-1)
    u = gram_inv @ a
    q = 1.0 + float(a @ u)
    if q <= DEGENERATE_UPDATE_TOL:
        raise DegenerateUpdate(f"1 + d = {q:.3e}")
    return np.outer(u, u) / q


def plackett_update(gram_inv, a) -> np.ndarray:
    """Inverse of ``G + a' a`` from ``G^-1`` by the rank-one update."""
    gram_inv = as_sym(gram_inv)
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != gram_inv.shape[0]:
        raise ShapeMismatch("row length does not match the Gram inverse")
    return rank_one_inverse_update(gram_inv, a, a)


def w11_matrix(base: DesignMatrix, a, weights) -> np.ndarray:
    """``G0^-1 D11 G0^-1 - G1^-1 D11 G1^-1`` for ``D11 = A0' D A0``.

    ``weights`` is either the diagonal of ``D`` or a full ``n x n`` matrix.
    """
    g0_inv = base.gram_inverse()
    g1_inv = plackett_update(g0_inv, a)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        d11 = (base.rows.T * w) @ base.rows
    else:
        d11 = base.rows.T @ w @ base.rows
    return as_sym(g0_inv @ d11 @ g0_inv - g1_inv @ d11 @ g1_inv)


@dataclass(frozen=True, eq=False)
class Decomposition:
    v00: np.ndarray
    v11: np.ndarray
    w: np.ndarray
    w11: np.ndarray
    d_lev: float
    q: float
    residual: float
    next_variance: float
    w22: np.ndarray | None = None
    w22_defect: float | None = None

    @property
    def reduction(self) -> np.ndarray:
        """``V00 - V11``; the VRP holds when its diagonal is non-negative."""
        return self.v00 - self.v11

    @property
    def vrp_holds(self) -> bool:
        diff = np.diag(self.reduction)
        scale = max(max_abs(np.diag(self.v00)), max_abs(np.diag(self.v11)))
        return bool(np.all(diff >= -NONNEG_RTOL * scale))


def _row(d: DesignMatrix, a) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != d.k:
        raise ShapeMismatch(f"row has {a.size} entries, design has {d.k} columns")
    return a


def decompose(p: AugmentedProblem) -> Decomposition:
    """Split the augmented covariance for uncorrelated observations."""
    if p.base_noise.kind != "diagonal" or p.cross_cov is not None:
        raise NotDiagonal("correlated noise: use decompose_correlated")
    base, a, s2 = p.base, p.next_row, p.next_variance
    g0_inv = base.gram_inverse()
    d_lev, q = leverage(base, a)
    w = w_matrix(g0_inv, a)
    w11 = w11_matrix(base, a, p.base_noise.variances - s2)
    v00 = ols_covariance(base, p.base_noise)
    v11 = ols_covariance(p.design, p.joint_noise())
    residual = max_abs(v11 - (v00 - s2 * w - w11))
    return Decomposition(v00, v11, w, w11, d_lev, q, residual, s2)


def decompose_correlated(p: AugmentedProblem) -> Decomposition:
    """Decomposition with a full base covariance and/or cross-covariances.

    ``w22`` is the exact remainder ``V11 - V00 + s2 W + W11``. The closed form
    ``G1^-1 (a' c' A0 + A0' c a) G1^-1`` with ``c = cross_cov`` is evaluated
    too and its distance from the remainder stored in ``w22_defect``.
    """
    base, a, s2 = p.base, p.next_row, p.next_variance
    sigma = p.joint_covariance()
    eig = sym_eigenvalues(sigma)
    if eig[0] <= 1e-12 * max(abs(eig[-1]), 1e-300):
        raise NotPSD(f"joint covariance is not positive definite (min eigenvalue {eig[0]:.3e})")
    g0_inv = base.gram_inverse()
    g1_inv = plackett_update(g0_inv, a)
    d_lev, q = leverage(base, a)
    w = w_matrix(g0_inv, a)
    n = base.n
    w11 = w11_matrix(base, a, sigma[:n, :n] - s2 * np.eye(n))
    v00 = ols_covariance(base, validate_noise({"full": sigma[:n, :n]}))
    v11 = ols_covariance(p.design, validate_noise({"full": sigma}))
    w22 = as_sym(v11 - v00 + s2 * w + w11)
    c = sigma[:n, n]
    cross = np.outer(a, c @ base.rows) + np.outer(base.rows.T @ c, a)
    w22_closed = g1_inv @ cross @ g1_inv
    residual = max_abs(v11 - (v00 - s2 * w - w11 + w22))
    return Decomposition(v00, v11, w, w11, d_lev, q, residual, s2, w22, max_abs(w22 - w22_closed))


def w11_equal_variance(p: AugmentedProblem) -> np.ndarray:
    """``W11`` in closed form when every base variance is the same."""
    var = p.base_noise.diagonal()
    if p.base_noise.kind != "diagonal" or np.any(var != var[0]):
        raise NotEqualVariance("base variances are not all equal")
    sigma2 = float(var[0]) - p.next_variance
    d_lev, _ = leverage(p.base, p.next_row)
    w = w_matrix(p.base.gram_inverse(), p.next_row)
    return sigma2 * (2.0 - d_lev / (1.0 + d_lev)) * w


@dataclass(frozen=True, eq=False)
class VrpVerdict:
    """Partial-sum criterion for each coefficient.

    ``partial_sums[i, m-1]`` is the prefix sum over the first ``m`` base
    observations; ``witness[i]`` is the first failing ``m`` (or ``None``).
    """

    per_coordinate: tuple[bool, ...]
    partial_sums: np.ndarray
    worst_margin: float
    witness: tuple[int | None, ...]
    terms: np.ndarray

    @property
    def holds(self) -> bool:
        return all(self.per_coordinate)


def partial_sum_verdict(base: DesignMatrix, a) -> VrpVerdict:
    a = _row(base, a)
    g0_inv = base.gram_inverse()
    g1_inv = plackett_update(g0_inv, a)
    c0 = g0_inv @ base.rows.T
    c1 = g1_inv @ base.rows.T
    terms = c0 * c0 - c1 * c1
    sums = np.cumsum(terms, axis=1)
    # rounding grows with the size of the squares being cancelled
    scale = np.sum(c0 * c0 + c1 * c1, axis=1)
    tol = NONNEG_RTOL * scale
    ok = sums >= -tol[:, None]
    witness = tuple(None if row.all() else int(np.argmin(row)) + 1 for row in ok)
    margins = sums / np.where(scale > 0, scale, 1.0)[:, None]
    return VrpVerdict(
        tuple(bool(r.all()) for r in ok), sums, float(margins.min()), witness, terms
    )


def vrp_partial_sums(p: AugmentedProblem) -> VrpVerdict:
    """Check, per coefficient, that every prefix sum of squared-coefficient
    differences is non-negative; this holds iff the corresponding diagonal
    entry of ``W11`` is non-negative for all non-increasing variances.
    """
    return partial_sum_verdict(p.base, p.next_row)


def step_weights(n: int, m: int) -> np.ndarray:
    """Non-increasing 0/1 weights: ones on the first ``m`` of ``n`` slots."""
    w = np.zeros(n)
    w[:m] = 1.0
    return w


def summation_by_parts(weights, terms) -> float:
    """``sum_i w_i u_i`` rewritten over prefix sums of ``u``:
    ``sum_j (w_j - w_{j+1}) U_j + w_n U_n``. Every coefficient is
    non-negative when ``w`` is non-increasing and non-negative.
    """
    w = np.asarray(weights, dtype=float)
    prefix = np.cumsum(np.asarray(terms, dtype=float))
    steps = np.append(w[:-1] - w[1:], w[-1])
    return float(steps @ prefix)


def negative_prefix_witness(terms, rtol: float = 0.0) -> int | None:
    """First ``m`` whose prefix sum is negative beyond ``rtol`` times the
    absolute mass of the terms; ``None`` when every prefix is non-negative."""
    u = np.asarray(terms, dtype=float)
    prefix = np.cumsum(u)
    bad = np.nonzero(prefix < -rtol * np.sum(np.abs(u)))[0]
    return int(bad[0]) + 1 if bad.size else None
