import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cascade_hum.errors import InvalidArgument
from cascade_hum.tree import (
    AdaptedField,
    branch,
    build_tree,
    conditional_expectation,
    expectation,
    martingale_coefficient,
)

from oracles import enumerate_paths

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_single_step_tree():
    t = build_tree(1, 1.0)
    assert t.total_nodes == 3
    assert t.dt == 1.0
    np.testing.assert_array_equal(t.increments(1), [1.0, -1.0])


def test_two_step_tree():
    t = build_tree(2, 1.0)
    assert t.total_nodes == 7
    assert t.dt == 0.5


@pytest.mark.parametrize("depth, horizon", [(0, 1.0), (-1, 1.0), (3, 0.0), (3, -2.0)])
def test_invalid_tree(depth, horizon):
    with pytest.raises(InvalidArgument):
        build_tree(depth, horizon)


@given(st.integers(1, 12), st.floats(0.01, 10.0))
def test_topology(depth, horizon):
    t = build_tree(depth, horizon)
    assert all(t.n_nodes(m) == 2**m for m in range(depth + 1))
    assert abs(t.weights(depth).sum() - 1.0) <= 1e-14
    up, down = t.children(depth - 1, 0)
    assert up == (depth, 0) and down == (depth, 1)
    inc = t.increments(depth)
    assert inc[0] == t.sqrt_dt and inc[1] == -t.sqrt_dt


def test_node_index_is_level_contiguous():
    t = build_tree(3, 1.0)
    idx = [t.node_index(m, k) for m in range(4) for k in range(2**m)]
    assert idx == list(range(15))


def test_midpoint():
    t = build_tree(1, 1.0)
    assert conditional_expectation(np.array([2.0, 4.0]), 1, t)[0] == 3.0


def test_constant_is_preserved():
    t = build_tree(4, 1.0)
    c = np.full((16, 5), 2.5)
    np.testing.assert_array_equal(conditional_expectation(c, 4, t), np.full((8, 5), 2.5))


def test_level_mismatch():
    t = build_tree(3, 1.0)
    with pytest.raises(InvalidArgument):
        conditional_expectation(np.zeros(3), 2, t)
    with pytest.raises(InvalidArgument):
        martingale_coefficient(np.zeros(4), 0, t)


@given(st.integers(1, 8), st.data())
def test_tower_property(depth, data):
    t = build_tree(depth, 1.0)
    f = data.draw(arrays(float, (2**depth, 3), elements=finite))
    lhs = expectation(conditional_expectation(f, depth, t), depth - 1, t)
    rhs = expectation(f, depth, t)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(f)))


def test_martingale_coefficient_examples():
    t = build_tree(2, 0.5)
    assert martingale_coefficient(np.array([1.0, 1.0, 3.0, 3.0]), 2, t).tolist() == [0.0, 0.0]
    s = t.sqrt_dt
    np.testing.assert_allclose(martingale_coefficient(np.array([s, -s]), 1, t), [1.0], rtol=1e-15)


@given(st.integers(1, 6), st.data())
def test_martingale_coefficient_matches_enumeration(depth, data):
    t = build_tree(depth, 0.7)
    xi = data.draw(arrays(float, (2**depth,), elements=finite))
    got = martingale_coefficient(xi, depth, t)
    dW = t.increments(depth)
    brute = np.array([(xi[2 * k] * dW[2 * k] + xi[2 * k + 1] * dW[2 * k + 1]) / 2 / t.dt for k in range(2 ** (depth - 1))])
    np.testing.assert_allclose(got, brute, rtol=1e-12, atol=1e-12 * max(1.0, np.max(np.abs(xi))))


def test_expectation_examples():
    t = build_tree(3, 1.0)
    assert expectation(np.full(8, 1.5), 3, t) == 1.5
    assert expectation(np.array([1.0, 4.0]), 1, t) == 2.5


def test_isometry():
    t = build_tree(6, 2.0)
    for m in range(1, 7):
        assert expectation(t.increments(m) ** 2, m, t) == pytest.approx(t.dt, rel=1e-15)


def test_martingale_chain_has_constant_expectation(rng):
    t = build_tree(7, 1.0)
    f = rng.standard_normal(2**7)
    means = [expectation(f, 7, t)]
    for m in range(7, 0, -1):
        f = conditional_expectation(f, m, t)
        means.append(expectation(f, m - 1, t))
    assert np.ptp(means) <= 1e-13


@given(st.integers(1, 6), st.data(), finite, finite)
def test_linearity(depth, data, a, b):
    t = build_tree(depth, 1.0)
    f = data.draw(arrays(float, (2**depth, 2), elements=finite))
    g = data.draw(arrays(float, (2**depth, 2), elements=finite))
    scale = 1e-13 * max(1.0, abs(a) + abs(b)) * max(1.0, np.max(np.abs(f)) + np.max(np.abs(g)))
    for op in (conditional_expectation, martingale_coefficient):
        lhs = op(a * f + b * g, depth, t)
        rhs = a * op(f, depth, t) + b * op(g, depth, t)
        assert np.max(np.abs(lhs - rhs)) <= scale / t.sqrt_dt


def test_path_increments_match_enumeration():
    t = build_tree(4, 1.0)
    for k, signs in enumerate(enumerate_paths(4)):
        np.testing.assert_array_equal(t.path_increments(k), signs * t.sqrt_dt)


def test_branch_compression():
    t = build_tree(3, 1.0)
    center = np.ones((1, 4))
    assert branch(center, None, 0, t).shape == (1, 4)
    assert branch(center, np.zeros((1, 4)), 1, t).shape == (1, 4)
    out = branch(center, np.ones((1, 4)), 1, t)
    assert out.shape == (4, 4)
    np.testing.assert_allclose(out[:, 0], 1 + t.sqrt_dt * np.array([1, -1, 1, -1]))


def test_adapted_field_levels():
    t = build_tree(3, 1.0)
    f = AdaptedField.deterministic(t, np.arange(4.0))
    assert f.m_hi == 3 and f.is_deterministic(2)
    assert f.full(2).shape == (4, 4)
    np.testing.assert_array_equal(f.expectation(3), np.arange(4.0))
    with pytest.raises(InvalidArgument):
        f[4]
