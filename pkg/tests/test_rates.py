import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mergelab.qstate import LayoutError, PureState, SystemLayout, ket, tensor
from mergelab.rates import (
    ACHIEVABLE,
    EXCLUDED,
    UNKNOWN,
    RateBounds,
    ResourcePair,
    axis_values,
    classify_pair,
    compute_bounds,
    e0_pure,
    e_min,
    ec_sum_lower_bound,
    flower_rates,
    flower_rates_numeric,
    parse_axis,
    region_csv,
    separable_bounds,
    separable_family_rates,
    timeshare,
)
from mergelab.info import shannon_entropy
from mergelab.statezoo import (
    SeparableFamily,
    flower,
    max_entangled,
    random_density,
    random_pure,
    random_separable_family,
    separable_family_state,
)

seeds = st.integers(0, 2 ** 32 - 1)


def _ghz():
    amps = np.zeros(8)
    amps[0] = amps[7] = 1 / math.sqrt(2)
    return PureState(SystemLayout.of(("R", 2), ("A", 2), ("B", 2)), amps)


def test_sum_bound_examples():
    assert abs(ec_sum_lower_bound(_ghz())) < 1e-12
    prod = tensor(tensor(ket("R", [1, 0]), ket("A", [1, 1])), ket("B", [1, 0]))
    assert np.isclose(ec_sum_lower_bound(prod), 1)
    for d in (2, 3, 4):
        assert np.isclose(ec_sum_lower_bound(flower(d)), 1)
    with pytest.raises(LayoutError, match="missing"):
        ec_sum_lower_bound(max_entangled(2))


def test_e_min_examples():
    psi = tensor(ket("R", [1, 0]), max_entangled(2))
    assert np.isclose(e_min(psi), -1)
    rho_a = random_density((2,), seed=1, labels=("A",))
    prod = tensor(tensor(ket("R", [1, 0]).density(), rho_a), random_density((3,), seed=2, labels=("B",)))
    from mergelab.info import von_neumann_entropy

    assert np.isclose(e_min(prod), von_neumann_entropy(rho_a))
    for d in (2, 3):
        assert abs(e_min(flower(d))) < 1e-9


def test_e0_examples():
    p = np.array([0.2, 0.3, 0.5])
    t = np.zeros((3, 3, 1))
    for x in range(3):
        t[x, x, 0] = math.sqrt(p[x])
    psi = PureState(SystemLayout.of(("R", 3), ("A", 3), ("B", 1)), t.reshape(-1))
    assert np.isclose(e0_pure(psi), shannon_entropy(p))
    assert np.isclose(e0_pure(flower(4)), 1)
    with pytest.raises(TypeError):
        e0_pure(flower(2).density())


def test_classify_examples():
    b = compute_bounds(random_pure((2, 2, 2), seed=3))
    assert classify_pair(ResourcePair(b.e0, 0), b) == ACHIEVABLE
    assert classify_pair(ResourcePair(b.e_min - 0.1, 10), b) == EXCLUDED
    fb = flower_rates(4).bounds
    assert classify_pair(ResourcePair(0, 1), fb) == UNKNOWN
    assert classify_pair(ResourcePair(0, 0.5), fb) == EXCLUDED
    assert classify_pair(ResourcePair(2, -1), fb) == ACHIEVABLE


def test_timeshare_examples():
    a, b = ResourcePair(1, 0), ResourcePair(0, 1)
    assert timeshare(a, b, 0) == b
    assert timeshare(a, b, 1) == a
    assert timeshare(a, b, 0.5) == ResourcePair(0.5, 0.5)
    with pytest.raises(ValueError):
        timeshare(a, b, 1.5)
    with pytest.raises(ValueError):
        ResourcePair(float("nan"), 0)


def test_separable_family_rates_examples():
    c, front = separable_family_rates(np.array([[0.5, 0.5]]), [[[1, 0], [0, 1]]])
    assert c == 0 and front(0.3) == ResourcePair(0, 0)
    c, front = separable_family_rates(np.array([[1.0]]), [[[2 ** -0.5, 2 ** -0.5]]])
    assert np.isclose(c, 1)
    assert np.isclose(front(0.25).E, 0.25) and np.isclose(front(0.25).C, 0.75)
    c, _ = separable_family_rates(np.array([[0.5], [0.5]]), [[[2 ** -0.5, 2 ** -0.5]], [[1, 0]]])
    assert np.isclose(c, 0.5)
    with pytest.raises(ValueError, match=r"\(i,j,k\)=\(0,0,1\)"):
        separable_family_rates(np.array([[0.5, 0.5]]), [[[1, 0], [1, 0]]])


def test_flower_rates_examples():
    assert flower_rates(2).theorem3_coherence_floor == 1.5
    assert flower_rates(4).theorem3_coherence_floor == 2
    num = flower_rates_numeric(8)
    assert abs(num.e0 - 1) < 1e-9 and abs(num.e_min) < 1e-9
    assert "zero initial" in flower_rates(2).to_dict()["caveat"]
    with pytest.raises(ValueError):
        flower_rates(1)


def test_rate_bounds_invariants():
    with pytest.raises(ValueError):
        RateBounds(-0.1, 0)
    with pytest.raises(ValueError):
        RateBounds(1, 0.5, e0=0.2)


def test_mixed_states_have_no_e0():
    b = compute_bounds(random_density((2, 2, 2), seed=4))
    assert b.e0 is None and not b.e_min_binding
    rank_one = compute_bounds(random_pure((2, 2, 2), seed=5).density())
    assert rank_one.e0 is not None


def test_region_csv_and_axes():
    assert parse_axis("E:-1:3:0.05") == ("E", -1.0, 3.0, 0.05)
    assert len(axis_values(-1, 3, 0.05)) == 81
    for bad in ("E:1:0:0.1", "X:0:1:0.1", "E:0:1", "E:0:1:0"):
        with pytest.raises(ValueError):
            parse_axis(bad)
    text = region_csv(flower_rates(2).bounds, (0, 1, 0.5), (0, 1, 0.5))
    lines = text.splitlines()
    assert lines[0] == "E,C,classification"
    assert len(lines) == 10
    assert "0.0,0.0,excluded" in lines and "1.0,0.0,achievable" in lines


@settings(max_examples=50, deadline=None)
@given(seeds, st.sampled_from([(2, 2, 2), (2, 3, 2), (3, 2, 3)]))
def test_pure_state_tightness(seed, dims):
    psi = random_pure(dims, seed=seed)
    assert abs(ec_sum_lower_bound(psi) - e0_pure(psi)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 8))
def test_sum_bound_nonnegative(seed, rank):
    assert ec_sum_lower_bound(random_density((2, 2, 2), rank=rank, seed=seed)) >= -1e-9


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.floats(0, 2))
def test_classification_monotone_and_no_double_gain(seed, e, c, x, y):
    b = compute_bounds(random_pure((2, 2, 2), seed=seed))
    if classify_pair(ResourcePair(e, c), b) == ACHIEVABLE:
        assert not (e < 0 and c < 0)
        assert classify_pair(ResourcePair(e + x, c + y), b) == ACHIEVABLE


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 2), st.integers(2, 3))
def test_separable_frontier_saturates_sum_bound(seed, ni, nj, da):
    fam = random_separable_family(ni, nj, da, seed=seed)
    c, front = separable_family_rates(fam)
    lower = ec_sum_lower_bound(separable_family_state(fam))
    assert abs(c - lower) < 1e-9
    for pair in front():
        assert abs(pair.E + pair.C - lower) < 1e-9
    assert classify_pair(front(0.5), separable_bounds(fam)) == ACHIEVABLE
