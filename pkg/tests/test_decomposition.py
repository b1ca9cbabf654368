from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vrp_ols.decomposition import (
    decompose,
    decompose_correlated,
    leverage,
    negative_prefix_witness,
    ols_covariance,
    plackett_update,
    step_weights,
    summation_by_parts,
    vrp_partial_sums,
    w11_equal_variance,
    w11_matrix,
    w_matrix,
)
from vrp_ols.errors import NotDiagonal, NotEqualVariance
from vrp_ols.matrixcore import invert, sym_eigenvalues
from vrp_ols.model import AugmentedProblem, line_design, validate_design, validate_noise

from instances import (
    IND_H, IND_NEXT, IND_VAR, IND_W11, COR_DIFF, COR_H, COR_NEXT, COR_NEXT_VAR, COR_S,
    BACK_DIFF, BACK_H, BACK_NEXT, BACK_VAR, line_rows, non_increasing, random_design, sandwich,
)

seeds = st.integers(0, 2**32 - 1)


def indefinite():
    return AugmentedProblem.line(IND_H, IND_NEXT, IND_VAR)


def correlated():
    return AugmentedProblem.build(line_design(COR_H), [1, COR_NEXT], {"full": COR_S.T @ COR_S}, COR_NEXT_VAR)


def random_problem(rng, n, k, variances=None):
    d = validate_design(random_design(rng, n, k))
    var = rng.uniform(0.1, 3.0, n + 1) if variances is None else variances
    return AugmentedProblem.build(d, rng.normal(size=k), var[:-1], var[-1])


# ---- ols_covariance -------------------------------------------------------


def test_ols_covariance_unit_variance_is_gram_inverse():
    d = line_design([0.3, 1.0, 2.5, 4.0])
    np.testing.assert_allclose(ols_covariance(d, np.ones(4)), invert(d.gram), atol=1e-14)


def test_ols_covariance_backstep():
    v00 = ols_covariance(line_design(BACK_H), BACK_VAR[:3])
    v11 = ols_covariance(line_design(BACK_H + [BACK_NEXT]), BACK_VAR)
    np.testing.assert_allclose(v00 - v11, BACK_DIFF, rtol=0, atol=1e-5)


def test_ols_covariance_correlated_full():
    full = np.zeros((4, 4))
    full[:3, :3] = COR_S.T @ COR_S
    full[3, 3] = COR_NEXT_VAR
    v00 = ols_covariance(line_design(COR_H), {"full": full[:3, :3]})
    v11 = ols_covariance(line_design(COR_H + [COR_NEXT]), {"full": full})
    np.testing.assert_allclose(v00 - v11, COR_DIFF, rtol=0, atol=1e-4)


def test_ols_covariance_symmetric_output():
    rng = np.random.default_rng(5)
    d = validate_design(random_design(rng, 9, 4))
    v = ols_covariance(d, rng.uniform(0.5, 2.0, 9))
    np.testing.assert_array_equal(v, v.T)


# ---- leverage / plackett --------------------------------------------------


def test_leverage_zero_row():
    assert leverage(line_design([1, 2, 3]), [0, 0]) == (0.0, 1.0)


def test_leverage_known_value():
    d, q = leverage(line_design([1, 2, 3]), [1, 4])
    # [1 4] [[7/3, -1], [-1, 1/2]] [1 4]' = 7/3 - 8 + 8
    assert d == pytest.approx(7 / 3, abs=1e-13)
    assert q == pytest.approx(10 / 3, abs=1e-13)


def test_leverage_matches_line_formula():
    h = np.array([0.2, 1.7, 2.1, 5.0, 3.3])
    x = 2.9
    n, s1 = h.size, h.sum()
    v = np.mean((h - h.mean()) ** 2)
    expected = ((s1 - n * x) ** 2 / (n * n * v) + 1) / n
    assert leverage(line_design(h), [1, x])[0] == pytest.approx(expected, rel=1e-12)


def test_plackett_zero_row_unchanged():
    g = invert(line_design([1, 2, 3]).gram)
    np.testing.assert_array_equal(plackett_update(g, [0, 0]), g)


@pytest.mark.parametrize("h, x", [([1, 2, 3], 4.0), (IND_H, IND_NEXT)])
def test_plackett_equals_direct(h, x):
    g0 = invert(line_design(h).gram)
    direct = np.linalg.inv(line_design(list(h) + [x]).gram)
    np.testing.assert_allclose(plackett_update(g0, [1, x]), direct, rtol=0, atol=1e-10)


# ---- decompose --------------------------------------------------------------


def test_decompose_indefinite_w11():
    dec = decompose(indefinite())
    np.testing.assert_allclose(dec.w11, IND_W11, rtol=0, atol=1e-4)
    assert dec.residual <= 1e-12
    assert dec.vrp_holds


def test_decompose_homoscedastic():
    p = AugmentedProblem.line([1, 2, 3], 4, [1.5, 1.5, 1.5, 1.5])
    dec = decompose(p)
    assert np.max(np.abs(dec.w11)) <= 1e-14
    np.testing.assert_allclose(dec.v11, dec.v00 - 1.5 * dec.w, atol=1e-13)


def test_decompose_random_k3():
    rng = np.random.default_rng(11)
    p = random_problem(rng, 5, 3)
    dec = decompose(p)
    assert dec.residual <= 1e-10
    # oracle: numpy sandwiches
    a1 = p.design.rows
    np.testing.assert_allclose(dec.v11, sandwich(a1, p.joint_covariance()), atol=1e-10)
    np.testing.assert_allclose(dec.v00, sandwich(a1[:-1], p.joint_covariance()[:-1, :-1]), atol=1e-10)


def test_decompose_rejects_correlated():
    with pytest.raises(NotDiagonal):
        decompose(correlated())
    p = AugmentedProblem.build(line_design([1, 2, 3]), [1, 4], [3, 2, 1], 0.5, cross_cov=[0.1, 0, 0])
    with pytest.raises(NotDiagonal):
        decompose(p)


def test_decompose_q_is_one_plus_d():
    dec = decompose(indefinite())
    assert dec.q == 1.0 + dec.d_lev


def test_w_is_psd():
    dec = decompose(indefinite())
    assert sym_eigenvalues(dec.w)[0] >= -1e-10


# ---- equal variances --------------------------------------------------------


def test_equal_variance_zero_gap():
    p = AugmentedProblem.line([1, 2, 3], 4, [2.0, 2.0, 2.0, 2.0])
    assert np.max(np.abs(w11_equal_variance(p))) == 0.0


def test_equal_variance_factor():
    p = AugmentedProblem.line([1, 2, 3], 4, [2.0, 2.0, 2.0, 1.0])
    dec = decompose(p)
    # factor 2 - (7/3)/(10/3) = 1.3, sigma^2 = 1
    np.testing.assert_allclose(w11_equal_variance(p), 1.3 * dec.w, atol=1e-13)
    np.testing.assert_allclose(w11_equal_variance(p), dec.w11, atol=1e-10)
    assert sym_eigenvalues(w11_equal_variance(p))[0] >= -1e-10


def test_equal_variance_rejects_unequal():
    with pytest.raises(NotEqualVariance):
        w11_equal_variance(indefinite())


# ---- partial sums -----------------------------------------------------------


def test_partial_sums_line123():
    p = AugmentedProblem.line([1, 2, 3], 4, [3, 2, 1.5, 1])
    v = vrp_partial_sums(p)
    assert v.partial_sums.shape == (2, 3)
    assert v.holds and v.witness == (None, None)
    # oracle: exact coefficient squares
    g0 = [[Fraction(7, 3), Fraction(-1)], [Fraction(-1), Fraction(1, 2)]]
    g1 = [[Fraction(30, 20), Fraction(-10, 20)], [Fraction(-10, 20), Fraction(4, 20)]]
    rows = [(1, 1), (1, 2), (1, 3)]
    for i in range(2):
        acc = Fraction(0)
        for j, row in enumerate(rows):
            c0 = g0[i][0] * row[0] + g0[i][1] * row[1]
            c1 = g1[i][0] * row[0] + g1[i][1] * row[1]
            acc += c0 * c0 - c1 * c1
            assert v.partial_sums[i, j] == pytest.approx(float(acc), abs=1e-12)
            assert acc >= 0


def test_partial_sums_backstep_fails():
    p = AugmentedProblem.line(BACK_H, BACK_NEXT, BACK_VAR)
    v = vrp_partial_sums(p)
    assert not v.holds
    assert v.worst_margin < 0


def test_partial_sums_scalar_case():
    p = AugmentedProblem.build(validate_design([[1.0]]), [1.0], [2.0], 1.0)
    v = vrp_partial_sums(p)
    assert v.partial_sums[0, 0] == pytest.approx(1 - 1 / 4)
    assert v.holds


# ---- correlated -------------------------------------------------------------


def test_correlated_zero_cross_equals_decompose():
    p = indefinite()
    a, b = decompose(p), decompose_correlated(p)
    assert np.max(np.abs(b.w22)) <= 1e-13
    np.testing.assert_allclose(a.v11, b.v11, atol=1e-13)
    np.testing.assert_allclose(a.w11, b.w11, atol=1e-13)


def test_correlated_correlated():
    dec = decompose_correlated(correlated())
    np.testing.assert_allclose(dec.reduction, COR_DIFF, rtol=0, atol=1e-4)
    assert not dec.vrp_holds


def test_correlated_random_instance():
    rng = np.random.default_rng(21)
    d = validate_design(random_design(rng, 4, 2))
    m = rng.normal(size=(5, 5))
    sigma = m @ m.T + 0.5 * np.eye(5)
    p = AugmentedProblem.build(d, rng.normal(size=2), {"full": sigma[:4, :4]}, sigma[4, 4], sigma[:4, 4])
    dec = decompose_correlated(p)
    assert dec.residual <= 1e-10
    np.testing.assert_allclose(dec.v11, sandwich(p.design.rows, sigma), atol=1e-10)
    assert dec.w22_defect <= 1e-10


# ---- properties -------------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(seed=seeds, n=st.integers(1, 50), k=st.integers(1, 5))
def test_decomposition_identity(seed, n, k):
    rng = np.random.default_rng(seed)
    n = max(n, k)
    p = random_problem(rng, n, k)
    dec = decompose(p)
    assert dec.residual <= 1e-9 * (1 + np.abs(dec.v00).max())
    g1 = plackett_update(p.base.gram_inverse(), p.next_row)
    direct = invert(p.design.gram)
    assert np.max(np.abs(g1 - direct)) <= 1e-9 * max(1.0, np.abs(direct).max())


@settings(max_examples=150, deadline=None)
@given(seed=seeds, n=st.integers(2, 30), k=st.integers(1, 5))
def test_w_identities(seed, n, k):
    rng = np.random.default_rng(seed)
    d = validate_design(random_design(rng, max(n, k), k))
    a = rng.normal(size=k)
    g0i = d.gram_inverse()
    w = w_matrix(g0i, a)
    lev = float(a @ g0i @ a)
    scale = max(1.0, np.abs(w).max()) * max(1.0, np.abs(d.gram).max()) * max(1.0, np.abs(g0i).max())
    assert np.max(np.abs(w @ d.gram @ w - lev / (1 + lev) * w)) <= 1e-10 * scale
    assert np.max(np.abs(w @ np.outer(a, a) @ g0i - lev * w)) <= 1e-10 * scale * max(1.0, a @ a)


@settings(max_examples=150, deadline=None)
@given(seed=seeds, n=st.integers(1, 30), k=st.integers(1, 5))
def test_equal_variance_formula(seed, n, k):
    rng = np.random.default_rng(seed)
    n = max(n, k)
    s_next = rng.uniform(0.1, 1.0)
    s_base = s_next + rng.uniform(0.0, 2.0)
    p = random_problem(rng, n, k, np.append(np.full(n, s_base), s_next))
    dec = decompose(p)
    closed = w11_equal_variance(p)
    assert np.max(np.abs(dec.w11 - closed)) <= 1e-10 * max(1.0, np.abs(dec.w11).max())
    assert np.all(np.diag(dec.reduction) >= -1e-10)


@settings(max_examples=100, deadline=None)
@given(seed=seeds, n=st.integers(2, 25), k=st.integers(1, 4))
def test_criterion_soundness(seed, n, k):
    rng = np.random.default_rng(seed)
    n = max(n, k)
    d = validate_design(random_design(rng, n, k))
    a = rng.normal(size=k) * rng.uniform(0.1, 3)
    verdict = vrp_partial_sums(AugmentedProblem.build(d, a, np.ones(n), 1.0))
    for i in range(k):
        if verdict.per_coordinate[i]:
            scale = np.abs(verdict.terms[i]).sum()
            for _ in range(200):
                weights = non_increasing(rng, n, 0.0, 1.0)
                assert w11_matrix(d, a, weights)[i, i] >= -1e-9 * max(scale, 1e-300)
        else:
            m = verdict.witness[i]
            assert w11_matrix(d, a, step_weights(n, m))[i, i] < 0


# ---- summation by parts -----------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(seed=seeds, n=st.integers(1, 30))
def test_summation_by_parts(seed, n):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n)
    w = non_increasing(rng, n, 0.0, 1.0)
    assert summation_by_parts(w, u) == pytest.approx(float(w @ u), abs=1e-12 * (1 + np.abs(u).sum()))
    m = negative_prefix_witness(u)
    if m is None:
        for _ in range(500):
            assert non_increasing(rng, n, 0.0, 1.0) @ u >= -1e-12
    else:
        assert step_weights(n, m) @ u < 0
