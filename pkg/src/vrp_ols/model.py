"""Designs, noise models and augmented problems.

Objects are validated once on construction and treated as immutable
afterwards (the underlying arrays are flagged read-only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import NotPositive, NotPSD, RankDeficient, ShapeMismatch, Singular
from .matrixcore import as_sym, invert, sym_eigenvalues

PSD_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def k(self) -> int:
        return self.rows.shape[1]

    @property
    def gram(self) -> np.ndarray:
        return self.rows.T @ self.rows

    def gram_inverse(self) -> np.ndarray:
        try:
            return invert(self.gram)
        except Singular as exc:
            raise RankDeficient(f"design Gram matrix is singular ({exc})") from None

    def is_line(self) -> bool:
        """True for a two-column intercept-plus-slope design."""
        return self.k == 2 and bool(np.all(self.rows[:, 0] == 1.0))

    @property
    def h(self) -> np.ndarray:
        """Explanatory values of a straight-line design."""
        if not self.is_line():
            raise ShapeMismatch("design is not of the (1, h) straight-line form")
        return self.rows[:, 1]


def validate_design(rows) -> DesignMatrix:
    """Check shape and full column rank, returning a frozen design."""
    if isinstance(rows, DesignMatrix):
        return rows
    try:
        widths = {len(r) for r in rows}
    except TypeError:
        raise ShapeMismatch("design must be a sequence of rows") from None
    if len(rows) == 0 or widths == {0}:
        raise ShapeMismatch("design is empty")
    if len(widths) != 1:
        raise ShapeMismatch(f"rows have unequal widths {sorted(widths)}")
    a = np.array(rows, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ShapeMismatch("design has non-finite entries")
    n, k = a.shape
    if n < k:
        raise RankDeficient(f"{n} observations cannot identify {k} parameters")
    d = DesignMatrix(_frozen(a))
    d.gram_inverse()
    return d


def line_design(h: Sequence[float]) -> DesignMatrix:
    """Intercept-plus-slope design with rows ``(1, h_i)``."""
    h = np.asarray(h, dtype=float).reshape(-1)
    return validate_design(np.column_stack([np.ones_like(h), h]))


def augment(d: DesignMatrix, a) -> DesignMatrix:
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size != d.k:
        raise ShapeMismatch(f"new row has {a.size} entries, design has {d.k} columns")
    return DesignMatrix(_frozen(np.vstack([d.rows, a])))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: Literal["diagonal", "full"]
    variances: np.ndarray
    non_increasing: bool = False

    @property
    def n(self) -> int:
        return self.variances.shape[0]

    def covariance(self) -> np.ndarray:
        if self.kind == "diagonal":
            return np.diag(self.variances)
        return np.array(self.variances)

    def diagonal(self) -> np.ndarray:
        if self.kind == "diagonal":
            return np.array(self.variances)
        return np.diag(self.variances).copy()

    def to_spec(self) -> dict:
        return {self.kind: self.variances.tolist()}


def validate_noise(spec, n: int | None = None) -> NoiseModel:
    """Build a noise model from a variance list, a covariance matrix, or a
    ``{"diagonal": [...]}`` / ``{"full": [[...]]}`` mapping.
    """
    if isinstance(spec, NoiseModel):
        model = spec
    else:
        if isinstance(spec, dict):
            if len(spec) != 1 or next(iter(spec)) not in ("diagonal", "full"):
                raise ShapeMismatch("noise must have exactly one of 'diagonal' or 'full'")
            kind, values = next(iter(spec.items()))
        else:
            values = spec
            kind = "full" if np.ndim(values) == 2 else "diagonal"
        arr = np.array(values, dtype=float)
        if kind == "diagonal":
            if arr.ndim != 1 or arr.size == 0:
                raise ShapeMismatch("diagonal noise needs a non-empty list of variances")
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise NotPositive("diagonal variances must be finite and strictly positive")
            non_inc = bool(np.all(arr[:-1] >= arr[1:]))
            model = NoiseModel("diagonal", _frozen(arr), non_inc)
        else:
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.size == 0:
                raise ShapeMismatch("full noise needs a square covariance matrix")
            if not np.all(np.isfinite(arr)):
                raise ShapeMismatch("covariance has non-finite entries")
            if not np.array_equal(arr, arr.T):
                if np.max(np.abs(arr - arr.T)) > 1e-12 * max(1.0, np.max(np.abs(arr))):
                    raise NotPSD("covariance matrix is not symmetric")
                arr = as_sym(arr)
            if sym_eigenvalues(arr)[0] < -PSD_TOL:
                raise NotPSD("covariance matrix has a negative eigenvalue")
            model = NoiseModel("full", _frozen(arr), False)
    if n is not None and model.n != n:
        raise ShapeMismatch(f"noise covers {model.n} observations, design has {n}")
    return model


@dataclass(frozen=True, eq=False)
class AugmentedProblem:
    """A base design and noise plus one additional observation.

    ``cross_cov`` holds the covariances between the new observation and the
    base observations; ``None`` means uncorrelated.
    """

    base: DesignMatrix
    next_row: np.ndarray
    base_noise: NoiseModel
    next_variance: float
    cross_cov: np.ndarray | None = None

    @classmethod
    def build(cls, base, next_row, base_noise, next_variance, cross_cov=None) -> "AugmentedProblem":
        base = validate_design(base)
        row = np.asarray(next_row, dtype=float).reshape(-1)
        if row.size != base.k:
            raise ShapeMismatch(f"next row has {row.size} entries, design has {base.k} columns")
        noise = validate_noise(base_noise, base.n)
        var = float(next_variance)
        if not np.isfinite(var) or var <= 0:
            raise NotPositive("next variance must be strictly positive")
        if cross_cov is not None:
            cross_cov = np.asarray(cross_cov, dtype=float).reshape(-1)
            if cross_cov.size != base.n:
                raise ShapeMismatch(f"cross_cov has {cross_cov.size} entries, expected {base.n}")
            cross_cov = _frozen(cross_cov)
        return cls(base, _frozen(row), noise, var, cross_cov)

    @classmethod
    def line(cls, h, h_next, variances, next_variance=None) -> "AugmentedProblem":
        """Straight-line problem; ``variances`` may include the new point's
        variance as a final entry when ``next_variance`` is omitted."""
        var = np.asarray(variances, dtype=float)
        if next_variance is None:
            var, next_variance = var[:-1], var[-1]
        return cls.build(line_design(h), (1.0, h_next), var, next_variance)

    @property
    def design(self) -> DesignMatrix:
        return augment(self.base, self.next_row)

    @property
    def is_diagonal(self) -> bool:
        return self.base_noise.kind == "diagonal" and (
            self.cross_cov is None or not np.any(self.cross_cov)
        )

    def joint_covariance(self) -> np.ndarray:
        n = self.base.n
        sigma = np.zeros((n + 1, n + 1))
        sigma[:n, :n] = self.base_noise.covariance()
        sigma[n, n] = self.next_variance
        if self.cross_cov is not None:
            sigma[:n, n] = self.cross_cov
            sigma[n, :n] = self.cross_cov
        return sigma

    def joint_noise(self) -> NoiseModel:
        if self.is_diagonal:
            return validate_noise(np.append(self.base_noise.variances, self.next_variance))
        return validate_noise({"full": self.joint_covariance()})
