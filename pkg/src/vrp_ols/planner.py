"""Choosing the next design point so that no coefficient variance can grow.

For a straight line the admissibility conditions are ``2n`` quartics in the
candidate ``h_next``; the admissible set is where all of them are
non-negative. It is located by a grid scan with bisection refinement of every
sign change, plus a local minimisation wherever a quartic dips towards zero
between grid nodes without crossing it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._parallel import ordered_map
from .decomposition import partial_sum_verdict
from .errors import DegenerateDesign, ValidationError
from .model import DesignMatrix, augment, validate_design
from .straightline import NONNEG_RTOL, _as_h, _check_spread, prefix_summaries, summarize

DEFAULT_GRID = 512
BISECT_XTOL = 1e-10
MIN_INTERVAL = 1e-8


class _LineQuartics:
    """All C4 left-hand sides of a fixed base design as functions of ``h_next``."""

    def __init__(self, h):
        h = _as_h(h)
        s = summarize(h)
        _check_spread(s)
        self.n, self.s1, self.s2, self.v = s.m, s.s1, s.s2, s.v
        m, s1m, s2m, _ = prefix_summaries(h)
        self.mu = (s1m / m)[:, None]
        self.mean2 = (s2m / m)[:, None]

    def values(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(F, S)`` of shape ``(2, n, len(x))``: quartic values and the
        magnitude of their terms (the rounding scale)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        n, s1, s2 = self.n, self.s1, self.s2
        q = 1.0 + ((s1 - n * x) ** 2 / (n * n * self.v) + 1.0) / n
        a1, a2, a3, a4, a5, a6 = q * s2, s2 + x * x, q * s1, s1 + x, n * q, n + 1.0
        al1, al2, al3 = a1 * a1 - a2 * a2, a1 * a3 - a2 * a4, a3 * a3 - a4 * a4
        al4, al5 = a3 * a5 - a4 * a6, a5 * a5 - a6 * a6
        mu, mean2 = self.mu, self.mean2
        f = np.stack([al1 - 2 * al2 * mu + al3 * mean2, al3 - 2 * al4 * mu + al5 * mean2])
        s = np.stack([
            np.abs(al1) + 2 * np.abs(al2 * mu) + np.abs(al3) * mean2,
            np.abs(al3) + 2 * np.abs(al4 * mu) + np.abs(al5) * mean2,
        ])
        return f, s

    def margin(self, x) -> np.ndarray:
        """Tolerance-shifted values; admissible where every entry is >= 0."""
        f, s = self.values(x)
        return f + NONNEG_RTOL * s

    def one(self, fam: int, m: int):
        return lambda x: float(self.margin(x)[fam, m, 0])


@dataclass(frozen=True)
class AdmissibleRegion:
    intervals: tuple[tuple[float, float], ...]
    search_domain: tuple[float, float]
    boundary_points: tuple[float, ...]
    polynomials_checked: int

    def contains(self, x: float) -> bool:
        lo, hi = self.search_domain
        if not lo <= x <= hi:
            raise ValueError(f"{x} lies outside the searched domain [{lo}, {hi}]")
        return any(a - 1e-12 <= x <= b + 1e-12 for a, b in self.intervals)

    def distance_to_boundary(self, x: float) -> float:
        if not self.boundary_points:
            return float("inf")
        return float(np.min(np.abs(np.asarray(self.boundary_points) - x)))


def is_admissible_line(h, h_next: float) -> bool:
    """Direct check of all ``2n`` quartics at one candidate."""
    return bool(np.all(_LineQuartics(h).margin(h_next) >= 0))


def admissible_next_line(h, search: tuple[float, float], grid: int = DEFAULT_GRID) -> AdmissibleRegion:
    lo, hi = map(float, search)
    if not lo < hi:
        raise ValueError(f"empty search interval [{lo}, {hi}]")
    if grid < 16:
        raise ValueError("grid must have at least 16 points")
    quartics = _LineQuartics(h)
    xs = np.linspace(lo, hi, grid)
    phi = quartics.margin(xs)
    ok = phi >= 0
    roots: list[float] = []
    n_fam, n_m, _ = phi.shape
    for fam in range(n_fam):
        for m in range(n_m):
            f = quartics.one(fam, m)
            row, okr = phi[fam, m], ok[fam, m]
            for i in np.nonzero(okr[:-1] != okr[1:])[0]:
                roots.append(_bisect(f, xs[i], xs[i + 1]))
            # dips between nodes that never show a negative grid value
            interior = np.nonzero(okr[1:-1] & (row[1:-1] <= row[:-2]) & (row[1:-1] <= row[2:]))[0] + 1
            for i in interior:
                res = optimize.minimize_scalar(
                    f, bounds=(xs[i - 1], xs[i + 1]), method="bounded", options={"xatol": BISECT_XTOL}
                )
                if res.fun < 0:
                    roots.append(_bisect(f, xs[i - 1], res.x))
                    roots.append(_bisect(f, res.x, xs[i + 1]))
    cuts = _dedupe(sorted(r for r in roots if lo < r < hi))
    edges = [lo, *cuts, hi]
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        if np.all(quartics.margin(0.5 * (a + b)) >= 0):
            if pieces and pieces[-1][1] == a:
                pieces[-1] = (pieces[-1][0], b)
            else:
                pieces.append((a, b))
    intervals = tuple(p for p in pieces if p[1] - p[0] >= MIN_INTERVAL)
    return AdmissibleRegion(intervals, (lo, hi), tuple(cuts), 2 * quartics.n)


def _bisect(f, a: float, b: float) -> float:
    fa, fb = f(a), f(b)
    if (fa >= 0) == (fb >= 0):
        return 0.5 * (a + b)
    if fa == 0 or fb == 0:
        return a if fa == 0 else b
    return float(optimize.bisect(f, a, b, xtol=BISECT_XTOL))


def _dedupe(points: list[float]) -> list[float]:
    out: list[float] = []
    for p in points:
        if not out or p - out[-1] > BISECT_XTOL:
            out.append(p)
    return out


@dataclass(frozen=True)
class CandidateVerdict:
    row: tuple[float, ...]
    per_coordinate: tuple[bool, ...] | None
    worst_margin: float | None
    witness: tuple[int | None, ...] | None
    error: str | None = None

    @property
    def admissible(self) -> bool:
        return self.per_coordinate is not None and all(self.per_coordinate)


def admissible_next_general(d, candidates) -> list[CandidateVerdict]:
    """Partial-sum verdict of every candidate row against the base design."""
    d = validate_design(d)

    def judge(row):
        row = tuple(float(v) for v in np.asarray(row, dtype=float).reshape(-1))
        try:
            validate_design(augment(d, row).rows)
            v = partial_sum_verdict(d, row)
        except ValidationError as exc:
            return CandidateVerdict(row, None, None, None, f"{type(exc).__name__}: {exc}")
        return CandidateVerdict(row, v.per_coordinate, v.worst_margin, v.witness)

    return ordered_map(judge, candidates)
