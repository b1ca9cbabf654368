import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vrp_ols.decomposition import vrp_partial_sums
from vrp_ols.errors import DegenerateDesign
from vrp_ols.model import AugmentedProblem, line_design, validate_design
from vrp_ols.planner import admissible_next_general, admissible_next_line, is_admissible_line

from instances import IND_H, IND_NEXT, BACK_H, BACK_NEXT, increasing_h

seeds = st.integers(0, 2**32 - 1)


def direct_verdict(h, x):
    return vrp_partial_sums(AugmentedProblem.line(h, x, np.ones(len(h) + 1))).holds


def test_indefinite_query_admissible():
    region = admissible_next_line(IND_H, (0.0, 4.0))
    assert region.contains(IND_NEXT)
    assert is_admissible_line(IND_H, IND_NEXT)


def test_backstep_query_inadmissible():
    region = admissible_next_line(BACK_H, (0.0, 4.0))
    assert not region.contains(BACK_NEXT)
    assert not is_admissible_line(BACK_H, BACK_NEXT)


def test_line123_whole_interval():
    region = admissible_next_line([1, 2, 3], (3.0, 10.0))
    assert region.intervals == ((3.0, 10.0),)
    assert region.polynomials_checked == 6


def test_region_inside_domain_and_ordered():
    region = admissible_next_line([0.3, 2.0, 1.1, 0.4], (-5.0, 5.0))
    flat = [v for iv in region.intervals for v in iv]
    assert flat == sorted(flat)
    assert all(-5.0 <= v <= 5.0 for v in flat)
    for a, b in region.intervals:
        assert b - a >= 1e-8


def test_region_endpoints_are_boundaries():
    region = admissible_next_line(BACK_H, (-3.0, 6.0))
    ends = {v for iv in region.intervals for v in iv} - {-3.0, 6.0}
    for e in ends:
        assert region.distance_to_boundary(e) <= 1e-9


def test_query_outside_domain():
    region = admissible_next_line([1, 2, 3], (3.0, 10.0))
    with pytest.raises(ValueError):
        region.contains(11.0)


def test_planner_rejects_bad_input():
    with pytest.raises(DegenerateDesign):
        admissible_next_line([2.0, 2.0, 2.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        admissible_next_line([1, 2, 3], (0.0, 1.0), grid=8)
    with pytest.raises(ValueError):
        admissible_next_line([1, 2, 3], (1.0, 1.0))


def test_general_candidates():
    d = line_design(BACK_H)
    out = admissible_next_general(d, [[1, BACK_NEXT], [1, 1.96], [1, 1.6]])
    assert [v.admissible for v in out] == [False, True, direct_verdict(BACK_H, 1.6)]
    assert out[0].worst_margin < 0


def test_general_indefinite():
    (v,) = admissible_next_general(line_design(IND_H), [[1, IND_NEXT]])
    assert v.per_coordinate == (True, True)


def test_general_duplicate_row_of_saturated_design():
    d = validate_design([[1.0, 0.0], [0.0, 1.0]])
    (v,) = admissible_next_general(d, [[1.0, 0.0]])
    assert v.error is None and v.per_coordinate is not None


def test_general_bad_candidate_reported():
    out = admissible_next_general(line_design([1, 2, 3]), [[1, 2, 3], [1, 5]])
    assert out[0].error is not None and not out[0].admissible
    assert out[1].admissible


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(2, 12))
def test_region_consistency(seed, n):
    rng = np.random.default_rng(seed)
    h = rng.uniform(-2.0, 3.0, n)
    lo, hi = h.min() - 2.0, h.max() + 2.0
    region = admissible_next_line(h, (lo, hi))
    for x in rng.uniform(lo, hi, 50):
        if region.distance_to_boundary(x) <= 1e-8:
            continue
        assert region.contains(x) == direct_verdict(h, x)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, n=st.integers(2, 20))
def test_monotone_sufficiency(seed, n):
    rng = np.random.default_rng(seed)
    h = increasing_h(rng, n, hi=5.0)
    region = admissible_next_line(h, (h[-1], h[-1] + 10.0))
    for x in rng.uniform(h[-1] + 1e-6, h[-1] + 10.0, 20):
        assert region.contains(x)
