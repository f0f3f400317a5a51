import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnstab.kinetics import (LyapunovContext, RateAssignment, RateError, RateSchedule, jacobian, load_rates,
                              lyapunov_gradient, lyapunov_lie_derivative, lyapunov_value, rhs, rhs_variable)
from crnstab.network import analyze
from oracles import central_difference_jacobian, rhs_by_loops
from support import CB_STATE, networks, random_network, random_rates


def test_triangle_rhs_unit_rates(triangle):
    k = RateAssignment.of(triangle, [1] * 5)
    assert np.allclose(rhs(triangle, k, [1, 1, 1]), [3.0, 0.0, -3.0], atol=0, rtol=1e-15)


def test_square_rhs_components(square):
    rng = np.random.default_rng(1)
    for _ in range(20):
        a1, k2, k3, k4, a5 = rng.uniform(0.1, 3, 5)
        x, y = rng.uniform(0.1, 3, 2)
        f = rhs(square, RateAssignment.of(square, [a1, k2, k3, k4, a5]), [x, y])
        assert f[0] == pytest.approx(a1 + a5 - k3 * x * y, rel=1e-13, abs=1e-13)
        assert f[1] == pytest.approx(a5 + k2 * x - k4 * y, rel=1e-13, abs=1e-13)


def test_cubic_rhs_and_slope(cubic):
    k = RateAssignment.of(cubic, [1, 1, 1, 1])
    assert rhs(cubic, k, [1.0])[0] == pytest.approx(0.0, abs=1e-15)
    assert jacobian(cubic, k, [1.0])[0, 0] == pytest.approx(-2.0, rel=1e-15)
    rng = np.random.default_rng(2)
    for _ in range(10):
        k1, k2, k3, k4 = rng.uniform(0.1, 5, 4)
        x = rng.uniform(0.1, 4)
        got = rhs(cubic, RateAssignment.of(cubic, [k1, k2, k3, k4]), [x])[0]
        assert got == pytest.approx(k1 - k2 * x + k3 * x**2 - k4 * x**3, rel=1e-12, abs=1e-12)


def test_rhs_matches_loop_oracle():
    rng = np.random.default_rng(3)
    for _ in range(50):
        net = random_network(rng, int(rng.integers(1, 5)), int(rng.integers(2, 7)), max_coeff=3)
        k = random_rates(net, rng)
        x = rng.uniform(0.1, 3.0, net.n)
        ref = rhs_by_loops(net.Y, net.edges, k.as_array(), x)
        assert np.allclose(rhs(net, k, x), ref, rtol=1e-12, atol=1e-12)


def test_rhs_lies_in_stoichiometric_subspace():
    rng = np.random.default_rng(4)
    for _ in range(100):
        net = random_network(rng, int(rng.integers(1, 5)), int(rng.integers(2, 7)))
        f = rhs(net, random_rates(net, rng), rng.uniform(0.1, 3.0, net.n))
        W = analyze(net).complement_basis
        assert np.linalg.norm(W @ f) <= 1e-10 * max(1.0, np.linalg.norm(f))


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(30):
        net = random_network(rng, int(rng.integers(1, 5)), int(rng.integers(2, 7)), max_coeff=3)
        k = random_rates(net, rng)
        for _ in range(5):
            x = rng.uniform(0.2, 3.0, net.n)
            J = jacobian(net, k, x)
            Jfd = central_difference_jacobian(lambda z: rhs(net, k, z), x)
            assert np.max(np.abs(J - Jfd)) <= 1e-6 * max(1.0, np.max(np.abs(J)))


def test_rates_validation(triangle):
    with pytest.raises(RateError):
        RateAssignment.of(triangle, [1, 1, 1, 1])
    with pytest.raises(RateError):
        RateAssignment.of(triangle, [1, 1, 0, 1, 1])
    with pytest.raises(RateError):
        RateAssignment.of(triangle, [1, 1, float("nan"), 1, 1])


def test_rates_from_mapping(triangle, tmp_path):
    mapping = {"3X -> X+Y+Z": 1, "X+Y+Z -> 3Z": 2, "3Z -> 3X": 2, "3Z -> 3Y": 2, "3Y -> 3X": 1}
    k = RateAssignment.from_mapping(triangle, mapping)
    assert k.values == (1, 2, 2, 2, 1)
    assert k.is_rational
    p = tmp_path / "rates.json"
    p.write_text(json.dumps(mapping))
    assert load_rates(triangle, p).values == k.values
    with pytest.raises(RateError):
        RateAssignment.from_mapping(triangle, {**mapping, "3X -> 3Y": 1})
    incomplete = dict(mapping)
    incomplete.pop("3Y -> 3X")
    with pytest.raises(RateError):
        RateAssignment.from_mapping(triangle, incomplete)


def test_state_must_be_positive(triangle_cb):
    net, k = triangle_cb
    with pytest.raises(ValueError, match="strictly positive"):
        rhs(net, k, [1.0, 0.0, 1.0])


def test_rhs_variable_constant_schedule(triangle_cb):
    net, k = triangle_cb
    sched = RateSchedule.constant(k)
    x = np.array([0.7, 1.3, 2.1])
    assert np.array_equal(rhs_variable(net, sched, 3.0, x), rhs(net, k, x))


def test_rhs_variable_bounds(triangle):
    sched = RateSchedule(tuple((lambda t: 1.0 + t) for _ in range(5)), eps_bound=0.25)
    x = np.ones(3)
    rhs_variable(net := triangle, sched, 2.9, x)
    with pytest.raises(RateError, match="outside"):
        rhs_variable(net, sched, 3.5, x)
    with pytest.raises(ValueError):
        rhs_variable(net, sched, -1.0, x)
    with pytest.raises(RateError):
        RateSchedule((lambda t: 1.0,), eps_bound=1.5)


def test_lyapunov_reference_values():
    ctx = LyapunovContext(np.array([1.0]))
    assert lyapunov_value(ctx, [np.e]) == pytest.approx(1.0, rel=1e-15)
    assert lyapunov_value(ctx, [1.0]) == 0.0
    ctx3 = LyapunovContext(CB_STATE)
    assert lyapunov_value(ctx3, CB_STATE) == pytest.approx(0.0, abs=1e-15)


@given(st.lists(st.floats(0.01, 50), min_size=3, max_size=3), st.lists(st.floats(0.01, 50), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_lyapunov_nonnegative(x_star, x):
    ctx = LyapunovContext(np.array(x_star))
    assert lyapunov_value(ctx, x) >= -1e-12 * sum(x_star)


@given(st.lists(st.floats(0.05, 20), min_size=3, max_size=3),
       st.lists(st.floats(0.05, 20), min_size=3, max_size=3),
       st.lists(st.floats(0.05, 20), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_lyapunov_strictly_convex(x_star, a, b):
    ctx = LyapunovContext(np.array(x_star))
    a, b = np.array(a), np.array(b)
    mid = 0.5 * (a + b)
    gap = 0.5 * (lyapunov_value(ctx, a) + lyapunov_value(ctx, b)) - lyapunov_value(ctx, mid)
    # Hessian diag(1/x) bounds the midpoint gap from below by |a - b|^2 / (8 max x)
    assert gap >= np.sum((a - b) ** 2) / (8 * max(a.max(), b.max())) * (1 - 1e-9) - 1e-12


def test_lyapunov_gradient_matches_difference():
    ctx = LyapunovContext(CB_STATE)
    x = np.array([0.4, 2.2, 1.7])
    fd = central_difference_jacobian(lambda z: np.array([lyapunov_value(ctx, z)]), x)[0]
    assert np.allclose(lyapunov_gradient(ctx, x), fd, rtol=1e-7, atol=1e-9)


def test_lie_derivative_nonpositive_on_balanced_systems(triangle_cb, square, isomer):
    from crnstab.complex_balance import reference_steady_state

    systems = [
        triangle_cb,
        (square, RateAssignment.of(square, [1, 2, 2, 1, 1])),  # k2 k4 / k3 = a1
        (isomer, RateAssignment.of(isomer, [1.7, 0.3])),
    ]
    rng = np.random.default_rng(6)
    for net, k in systems:
        ctx = LyapunovContext(reference_steady_state(net, k))
        for _ in range(100):
            x = np.exp(rng.uniform(-2, 2, net.n))
            assert lyapunov_lie_derivative(ctx, net, k, x) <= 1e-12


@given(networks(weakly_reversible=True))
@settings(max_examples=40, deadline=None)
def test_rhs_exact_zero_sum_on_conserved_total(net):
    # for unit rates on random weakly reversible graphs the field stays in S
    k = RateAssignment.of(net, [1.0] * net.r)
    f = rhs(net, k, np.full(net.n, 1.3))
    W = analyze(net).complement_basis
    assert np.linalg.norm(W @ f) <= 1e-10 * max(1.0, np.linalg.norm(f))
