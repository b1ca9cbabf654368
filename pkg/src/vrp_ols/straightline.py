"""Closed forms for the intercept-plus-slope model.

The design rows are ``(1, h_i)`` for ``i = 1..n`` and the new row is
``(1, h_next)``. Prefix summaries ``S1_m``, ``S2_m`` and ``V_m`` drive every
criterion; they are accumulated once per design.

Notation follows the usual one for this problem: ``q = 1 + d`` is one plus
the leverage of the new point, ``a1..a6`` are

    (q S2_n, S2_{n+1}, q S1_n, S1_{n+1}, n q, n + 1)

and ``alpha1..alpha5`` are ``a1^2 - a2^2``, ``a1 a3 - a2 a4``, ``a3^2 - a4^2``,
``a3 a5 - a4 a6`` and ``a5^2 - a6^2``. The quadratics

    p1(x) = alpha1 - 2 alpha2 x + alpha3 x^2
    p2(x) = alpha3 - 2 alpha4 x + alpha5 x^2

evaluated at prefix means decide whether the intercept and slope variances
can grow when the new point is added.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesign, DegenerateRoot, ShapeMismatch

NONNEG_RTOL = 1e-9
DEGENERATE_V_RTOL = 1e-14
DEGENERATE_DENOM_RTOL = 1e-12


def _as_h(h) -> np.ndarray:
    arr = np.asarray(h, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ShapeMismatch("need at least one design point")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch("design points must be finite")
    return arr


@dataclass(frozen=True)
class LineSummary:
    m: int
    s1: float
    s2: float
    v: float

    @property
    def mean(self) -> float:
        return self.s1 / self.m

    @property
    def ratio_defect(self) -> float:
        """Defect of ``S2/S1 - S1/m = V / (S1/m)``; NaN when ``S1 == 0``."""
        if self.s1 == 0:
            return float("nan")
        return self.s2 / self.s1 - self.mean - self.v / self.mean


def summarize(h) -> LineSummary:
    h = _as_h(h)
    m = h.size
    mean = h.sum() / m
    return LineSummary(m, float(h.sum()), float(h @ h), float(np.mean((h - mean) ** 2)))


def prefix_summaries(h) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Arrays ``(m, S1_m, S2_m, V_m)`` for ``m = 1..n``.

    ``V_m`` is computed from sums shifted by the overall mean so that it does
    not suffer the cancellation of ``S2/m - (S1/m)^2``.
    """
    h = _as_h(h)
    m = np.arange(1, h.size + 1, dtype=float)
    c = h - h.mean()
    c1 = np.cumsum(c)
    c2 = np.cumsum(c * c)
    v = np.maximum(c2 / m - (c1 / m) ** 2, 0.0)
    return m, np.cumsum(h), np.cumsum(h * h), v


def _check_spread(s: LineSummary) -> None:
    if s.v <= DEGENERATE_V_RTOL * s.s2 / s.m:
        raise DegenerateDesign(f"design points have (near) zero variance V = {s.v:.3e}")


def leverage_line(h, h_next: float) -> tuple[float, float]:
    """Leverage ``d`` of the point ``(1, h_next)`` and ``q = 1 + d``."""
    s = summarize(h)
    _check_spread(s)
    n = s.m
    d = ((s.s1 - n * h_next) ** 2 / (n * n * s.v) + 1.0) / n
    return d, 1.0 + d


def q_from_variances(h, h_next: float) -> float:
    """``q`` recovered as ``((n+1)/n)^2 V_{n+1} / V_n``."""
    h = _as_h(h)
    n = h.size
    s0 = summarize(h)
    _check_spread(s0)
    s1 = summarize(np.append(h, h_next))
    return (n + 1) ** 2 / n**2 * s1.v / s0.v


def _alpha_values(n, s1, s2, q, x):
    a1, a2, a3, a4, a5, a6 = q * s2, s2 + x * x, q * s1, s1 + x, n * q, n + 1.0
    return (
        (a1, a2, a3, a4, a5, a6),
        (a1 * a1 - a2 * a2, a1 * a3 - a2 * a4, a3 * a3 - a4 * a4, a3 * a5 - a4 * a6, a5 * a5 - a6 * a6),
    )


@dataclass(frozen=True)
class AlphaSet:
    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    q: float

    def p1(self, x):
        return self.alpha1 - 2.0 * self.alpha2 * x + self.alpha3 * x * x

    def p2(self, x):
        return self.alpha3 - 2.0 * self.alpha4 * x + self.alpha5 * x * x

    @property
    def delta1(self) -> float:
        return self.alpha2**2 - self.alpha1 * self.alpha3

    @property
    def delta2(self) -> float:
        return self.alpha4**2 - self.alpha3 * self.alpha5


def alphas(h, h_next: float) -> AlphaSet:
    h = _as_h(h)
    s = summarize(h)
    _, q = leverage_line(h, h_next)
    a, al = _alpha_values(s.m, s.s1, s.s2, q, float(h_next))
    return AlphaSet(*a, *al, q)


def w11_diag_line(h, h_next: float, weights) -> tuple[float, float]:
    """Intercept and slope diagonal entries of ``W11`` for variance excesses
    ``weights[i] = sigma_i^2 - sigma_{n+1}^2``."""
    h = _as_h(h)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != h.size:
        raise ShapeMismatch(f"{w.size} weights for {h.size} design points")
    al = alphas(h, h_next)
    v_next = summarize(np.append(h, h_next)).v
    denom = (h.size + 1) ** 4 * v_next**2
    d11, d1h, dhh = w.sum(), w @ h, w @ (h * h)
    return (
        float((al.alpha1 * d11 - 2 * al.alpha2 * d1h + al.alpha3 * dhh) / denom),
        float((al.alpha3 * d11 - 2 * al.alpha4 * d1h + al.alpha5 * dhh) / denom),
    )


@dataclass(frozen=True)
class RootSet:
    r11: float
    r12: float
    r21: float
    r22: float
    delta1: float
    delta2: float
    alphas: AlphaSet = field(repr=False)

    def pbar1(self, x):
        return (x - self.r11) * (x - self.r12)

    def pbar2(self, x):
        return (x - self.r21) * (x - self.r22)


def _nonzero(den: float, scale: float, which: str) -> float:
    if den == 0.0 or abs(den) <= DEGENERATE_DENOM_RTOL * scale:
        raise DegenerateRoot(which)
    return den


def _ratio(num: float, den: float, scale: float, which: str) -> float:
    return num / _nonzero(den, scale, which)


def _minus_pairs(h: np.ndarray, h_next: float) -> tuple[float, float, float, float]:
    """``a1 - a2``, ``a3 - a4``, ``a5 - a6`` written with ``d = q - 1`` so the
    leading ``S2``, ``S1``, ``n`` terms cancel exactly, plus the root
    cancellation factor ``(|a1|+|a2|)/|a1-a2| + (|a3|+|a4|)/|a3-a4|``
    evaluated on these forms."""
    s = summarize(h)
    d, _ = leverage_line(h, h_next)
    x = float(h_next)
    m12, m34, m56 = d * s.s2 - x * x, d * s.s1 - x, s.m * d - 1.0
    cond = (abs(d * s.s2) + x * x) / max(abs(m12), 1e-300) + (abs(d * s.s1) + abs(x)) / max(abs(m34), 1e-300)
    return m12, m34, m56, cond


def driving_roots(h, h_next: float) -> RootSet:
    """Roots of ``p1`` and ``p2`` from the ratio forms
    ``(a1 -/+ a2)/(a3 -/+ a4)`` and ``(a3 -/+ a4)/(a5 -/+ a6)``."""
    h = _as_h(h)
    al = alphas(h, h_next)
    n, s1 = h.size, float(h.sum())
    _nonzero(s1 - n * h_next, abs(s1) + n * abs(h_next), "s1 - n*h_next")
    m12, m34, m56, _ = _minus_pairs(h, h_next)
    sc34 = abs(al.a3) + abs(al.a4)
    sc56 = abs(al.a5) + abs(al.a6)
    return RootSet(
        r11=_ratio(m12, m34, sc34, "a3 - a4"),
        r12=_ratio(al.a1 + al.a2, al.a3 + al.a4, sc34, "a3 + a4"),
        r21=_ratio(m34, m56, sc56, "a5 - a6"),
        r22=_ratio(al.a3 + al.a4, al.a5 + al.a6, sc56, "a5 + a6"),
        delta1=al.delta1,
        delta2=al.delta2,
        alphas=al,
    )


def is_increasing_nonneg(h) -> bool:
    h = np.asarray(h, dtype=float)
    return bool(np.all(h >= 0) and np.all(np.diff(h) > 0))


CONDITIONS = ("C1", "C2", "C3", "C4", "C5", "C6", "C7")


@dataclass(frozen=True, eq=False)
class ConditionReport:
    """Per-``m`` values and verdicts of the criteria C1-C7.

    Arrays of shape ``(2, n)`` hold the intercept (row 0) and slope (row 1)
    families; ``values["C7"]`` has shape ``(n,)``. C1 here is the
    all-weights statement, evaluated on the extreme step weights; the
    caller's own weights (if any) are judged in ``supplied``.
    ``tier`` is the strongest equivalence level whose hypotheses hold:
    1 (C1-C5), 2 (C1-C6) or 3 (C1-C7).
    """

    n: int
    tier: int
    values: dict
    verdicts: dict
    witnesses: dict
    alphas: AlphaSet
    roots: RootSet | None
    root_error: str | None
    supplied: tuple[float, float] | None = None
    supplied_ok: bool | None = None
    scales: dict | None = None

    def failing(self) -> list[str]:
        return [c for c in CONDITIONS if self.verdicts.get(c) is False]


def _judge(values: np.ndarray, scale: np.ndarray):
    ok = values >= -NONNEG_RTOL * scale
    if ok.ndim == 1:
        ok = ok[None, :]
    witness = []
    for fam, row in enumerate(ok):
        if not row.all():
            witness.append((fam + 1, int(np.argmin(row)) + 1))
    return bool(ok.all()), (witness[0] if witness else None)


def check_conditions(h, h_next: float, weights=None) -> ConditionReport:
    """Evaluate every ``m = 1..n`` instance of the criteria C1-C7."""
    h = _as_h(h)
    n = h.size
    al = alphas(h, h_next)
    m, s1m, s2m, vm = prefix_summaries(h)
    mu = s1m / m
    values: dict[str, np.ndarray | None] = {}
    scales: dict[str, np.ndarray] = {}

    # C2 on the extreme step weights 1_{[1..m]}, deltas built from the weight vectors
    steps = np.tril(np.ones((n, n)))
    d11, d1h, dhh = steps.sum(axis=1), steps @ h, steps @ (h * h)
    c2 = np.vstack([
        al.alpha1 * d11 - 2 * al.alpha2 * d1h + al.alpha3 * dhh,
        al.alpha3 * d11 - 2 * al.alpha4 * d1h + al.alpha5 * dhh,
    ])
    c2_scale = np.vstack([
        abs(al.alpha1) * d11 + 2 * abs(al.alpha2 * d1h) + abs(al.alpha3) * dhh,
        abs(al.alpha3) * d11 + 2 * abs(al.alpha4 * d1h) + abs(al.alpha5) * dhh,
    ])
    v_next = summarize(np.append(h, h_next)).v
    denom = (n + 1) ** 4 * v_next**2
    values["C1"], scales["C1"] = c2 / denom, c2_scale / denom
    values["C2"], scales["C2"] = c2, c2_scale

    u = np.vstack([al.p1(h), al.p2(h)])
    u_scale = np.vstack([
        abs(al.alpha1) + 2 * abs(al.alpha2 * h) + abs(al.alpha3) * h * h,
        abs(al.alpha3) + 2 * abs(al.alpha4 * h) + abs(al.alpha5) * h * h,
    ])
    values["C3"], scales["C3"] = np.cumsum(u, axis=1), np.cumsum(u_scale, axis=1)

    mean2 = s2m / m
    values["C4"] = np.vstack([
        al.alpha1 - 2 * al.alpha2 * mu + al.alpha3 * mean2,
        al.alpha3 - 2 * al.alpha4 * mu + al.alpha5 * mean2,
    ])
    scales["C4"] = np.vstack([
        abs(al.alpha1) + 2 * abs(al.alpha2 * mu) + abs(al.alpha3) * mean2,
        abs(al.alpha3) + 2 * abs(al.alpha4 * mu) + abs(al.alpha5) * mean2,
    ])
    values["C5"] = np.vstack([al.p1(mu) + al.alpha3 * vm, al.p2(mu) + al.alpha5 * vm])
    scales["C5"] = np.vstack([
        abs(al.alpha1) + 2 * abs(al.alpha2 * mu) + abs(al.alpha3) * (mu * mu + vm),
        abs(al.alpha3) + 2 * abs(al.alpha4 * mu) + abs(al.alpha5) * (mu * mu + vm),
    ])

    roots, root_error = None, None
    try:
        roots = driving_roots(h, h_next)
    except DegenerateRoot as exc:
        root_error = exc.which
    if roots is not None:
        def bar_scale(ra, rb):
            return mu * mu + np.abs(mu) * (abs(ra) + abs(rb)) + abs(ra * rb) + vm

        values["C6"] = np.vstack([roots.pbar1(mu) + vm, roots.pbar2(mu) + vm])
        scales["C6"] = np.vstack([bar_scale(roots.r11, roots.r12), bar_scale(roots.r21, roots.r22)])
        values["C7"], scales["C7"] = values["C6"][0].copy(), scales["C6"][0].copy()
    else:
        values["C6"] = values["C7"] = None

    verdicts, witnesses = {}, {}
    for name in CONDITIONS:
        if values[name] is None:
            verdicts[name], witnesses[name] = None, None
        else:
            verdicts[name], witnesses[name] = _judge(values[name], scales[name])

    tier = 1
    if al.alpha3 > 0 and al.alpha5 > 0:
        tier = 2
    if n > 1 and is_increasing_nonneg(np.append(h, h_next)):
        tier = 3

    supplied = supplied_ok = None
    if weights is not None:
        supplied = w11_diag_line(h, h_next, weights)
        w = np.asarray(weights, dtype=float)
        s = (
            abs(al.alpha1) * abs(w).sum() + 2 * abs(al.alpha2) * abs(w) @ abs(h) + abs(al.alpha3) * abs(w) @ (h * h),
            abs(al.alpha3) * abs(w).sum() + 2 * abs(al.alpha4) * abs(w) @ abs(h) + abs(al.alpha5) * abs(w) @ (h * h),
        )
        supplied_ok = all(v >= -NONNEG_RTOL * sc / denom for v, sc in zip(supplied, s))

    return ConditionReport(
        n, tier, values, verdicts, witnesses, al, roots, root_error, supplied, supplied_ok, scales
    )


def two_point_values(b: float, c: float, n: int, m: int) -> tuple[float, float]:
    """``p1(S1_m/m) + alpha3 V_m`` and ``p2(S1_m/m) + alpha5 V_m`` for the
    alternating design ``h_i = b`` (odd ``i``), ``c`` (even ``i``) with
    ``h_next`` continuing the pattern."""
    if b == c:
        raise ValueError("two-point design needs b != c")
    if not 1 <= m <= n:
        raise ValueError(f"m={m} outside 1..{n}")
    if n < 2:
        raise ValueError("two-point closed forms need n >= 2")
    gap = (b - c) ** 2
    if n % 2 == 0:
        f = 1.0 if m % 2 == 0 else (m + 1) / m
        base = 0.5 * f * (n + 1) * gap
        return base * c * c, base
    f = 1.0 if m % 2 == 0 else (m - 1) / m
    base = 0.5 * f * n * (n + 1) ** 2 / (n - 1) ** 2 * gap
    return base * b * b, base


def two_point_design(b: float, c: float, n: int) -> tuple[np.ndarray, float]:
    """Base points ``h_1..h_n`` and ``h_{n+1}`` of the alternating design."""
    pts = np.array([b if i % 2 == 1 else c for i in range(1, n + 2)], dtype=float)
    return pts[:-1], float(pts[-1])


@dataclass(frozen=True, eq=False)
class LemmaDiagnostics:
    """Both sides of the auxiliary root identities at a given ``m``.

    ``sides[name] = (lhs, rhs)`` for

    * ``r11=r21``, ``r11_closed``: the shared root and its closed form
    * ``pbar1_at_mean``: ``pbar1(S1_n/n) + V_n``
    * ``r12-r11``, ``r12-r22``: root gaps
    * ``mean_shift``, ``g_step`` (only for ``m < n``): one-step changes in ``m``

    ``r11_chain[j-1]`` is the first root of the problem truncated to
    ``h_1..h_j`` with ``h_{j+1}`` as the new point. ``term_scales[name]`` is
    the size of the terms a difference-valued side cancels. Identities whose
    own denominators vanish are listed in ``skipped`` as ``(name, denominator)``.
    """

    m: int
    sides: dict
    r11_chain: np.ndarray
    skipped: tuple = ()
    term_scales: dict = field(default_factory=dict)

    def defect(self, name: str) -> float:
        lhs, rhs = self.sides[name]
        return abs(lhs - rhs)

    def rel_defect(self, name: str) -> float:
        """Defect relative to the larger side or, for sides that are
        differences, to the magnitude of the terms being subtracted."""
        lhs, rhs = self.sides[name]
        scale = max(abs(lhs), abs(rhs), self.term_scales.get(name, 0.0), 1e-300)
        return abs(lhs - rhs) / scale


def _g(s1: float, s2: float, m: int, r: float, cond: float = 1.0) -> float:
    return _ratio(s2 - r * s1, s1 - m * r, cond * (abs(s1) + m * abs(r)), f"S1_{m} - {m}*r")


def lemma_diagnostics(h, h_next: float, m: int) -> LemmaDiagnostics:
    h = _as_h(h)
    n = h.size
    if not 1 <= m <= n:
        raise ValueError(f"m={m} outside 1..{n}")
    roots = driving_roots(h, h_next)
    s = summarize(h)
    hh = np.append(h, h_next)
    _, s1m, s2m, vm = prefix_summaries(hh)
    r11 = roots.r11
    # denominators that subtract r11 inherit its rounding error
    cond = max(1.0, _minus_pairs(h, h_next)[3])
    sides, term_scales = {}, {}

    mu, v, x = s.mean, s.v, h_next - s.mean
    sides["r11=r21"] = (roots.r11, roots.r21)
    sides["r11_closed"] = (roots.r11, _g(s.s1, s.s2, n, h_next))
    sides["pbar1_at_mean"] = (
        roots.pbar1(mu) + v,
        n * v * (s.s2 - s.s1 * h_next) / (s.s1 - h_next * n)
        * (x * x + (2 * n + 1) * v) / (s.s1 * x * x + (n * h_next + s.s1 * (2 * n + 1)) * v),
    )
    # roots are positions on the design axis: compare them on its scale
    span = max(float(np.abs(hh).max()), abs(roots.r11), abs(roots.r21))
    term_scales["r11=r21"] = term_scales["r11_closed"] = span
    term_scales["pbar1_at_mean"] = (abs(mu) + abs(roots.r11)) * (abs(mu) + abs(roots.r12)) + v
    term_scales["r12-r11"] = abs(roots.r12) + abs(roots.r11)
    term_scales["r12-r22"] = abs(roots.r12) + abs(roots.r22)
    sides["r12-r11"] = (
        roots.r12 - roots.r11,
        2 * n * v * h_next / (n * v / s.s1 + (h_next - s.s2 / s.s1))
        * ((n + 1) * n * n * v + n * n * x * x)
        / (n * n * v * (s.s1 + 2 * n * s.s1 + n * h_next) + n * n * s.s1 * x * x),
    )
    sides["r12-r22"] = (
        roots.r12 - roots.r22,
        2 * v * (n * x * x + (n * n + 1) * v)
        / (s.s1 * (x * x + h_next * v / (n * s.s1) + (2 * n + 1) * v))
        * (x * x + (2 * n + 1) * v) / (x * x + 2 * (n + 1) * v),
    )

    skipped = []
    if m < n:
        i = m - 1
        S1, S2, Vm = s1m[i], s2m[i], vm[i]
        S1p, S2p, Vp = s1m[i + 1], s2m[i + 1], vm[i + 1]
        hm1, hm2 = hh[m], hh[m + 1]
        try:
            u = _nonzero(S1 / m - r11, cond * (abs(S1 / m) + abs(r11)), "S1_m/m - r11")
            up = _nonzero(S1p / (m + 1) - r11, cond * (abs(S1p / (m + 1)) + abs(r11)), "S1_{m+1}/(m+1) - r11")
            term_scales["mean_shift"] = abs(u) + abs(Vm / u) + abs(up) + abs(Vp / up)
            sides["mean_shift"] = (
                (u + Vm / u) - (up + Vp / up),
                -(hm1 - r11) / ((m + 1) * up) * (hm1 - _g(S1, S2, m, r11, cond)),
            )
        except DegenerateRoot as exc:
            skipped.append(("mean_shift", exc.which))
        try:
            g_m = _g(S1, S2, m, hm1)
            g_m1 = _g(S1p, S2p, m + 1, hm2)
            term_scales["g_step"] = abs(g_m1) + abs(g_m)
            sides["g_step"] = (
                g_m1 - g_m,
                (hm2 - hm1) * (m * (S1 / m - hm1) ** 2 + m * (m + 1) * Vm)
                / ((S1 - hm1 * m) * (S1p - (m + 1) * hm2)),
            )
        except DegenerateRoot as exc:
            skipped.append(("g_step", exc.which))

    chain = np.full(n, np.nan)
    for j in range(1, n + 1):
        try:
            chain[j - 1] = _g(s1m[j - 1], s2m[j - 1], j, hh[j])
        except DegenerateRoot:
            pass
    return LemmaDiagnostics(m, sides, chain, tuple(skipped), term_scales)
