import math

import numpy as np
import pytest

from pintkit.integrators import BlowUpError, Method, SolverSpec, integrate_interval, rk_step


def grow(t, u):
    return u


def decay(t, u):
    return -u


def zero(t, u):
    return np.zeros_like(u)


def test_solver_spec_validation():
    assert SolverSpec("rk4", 3).method is Method.RK4
    with pytest.raises(ValueError):
        SolverSpec(Method.RK1, 0)
    with pytest.raises(ValueError):
        SolverSpec("RK5", 1)


def test_rk1_is_forward_euler():
    np.testing.assert_allclose(rk_step(grow, 0.0, [1.0], 0.1, Method.RK1), [1.1])


def test_rk4_linear_step_is_truncated_exponential():
    expected = sum(1 / math.factorial(j) for j in range(5))
    np.testing.assert_allclose(rk_step(grow, 0.0, [1.0], 1.0, "RK4"), [expected], rtol=1e-15)


def test_rk8_linear_step_matches_exponential_through_h8():
    # the stability polynomial agrees with exp through h^8, so the remainder is O(h^9)
    def remainder(h):
        return rk_step(grow, 0.0, [1.0], h, "RK8")[0] - sum(h**j / math.factorial(j) for j in range(9))

    ratio = remainder(0.8) / remainder(0.4)
    assert 2**9 * 0.8 <= ratio <= 2**9 * 1.25


@pytest.mark.parametrize("method", list(Method))
def test_zero_field_is_identity(method):
    u = np.array([5.0, -1.0])
    np.testing.assert_array_equal(rk_step(zero, 0.3, u, 0.7, method), u)
    np.testing.assert_array_equal(integrate_interval(zero, 0.0, 1.0, u, SolverSpec(method, 5)), u)


def test_rk4_many_steps_reaches_e():
    out = integrate_interval(grow, 0.0, 1.0, [1.0], SolverSpec(Method.RK4, 1000))
    assert abs(out[0] - math.e) < 1e-10


def test_rk4_halving_ratio():
    err = [abs(integrate_interval(grow, 0.0, 1.0, [1.0], SolverSpec("RK4", n))[0] - math.e) for n in (10, 20)]
    assert 14 <= err[0] / err[1] <= 18


@pytest.mark.parametrize("method,steps", [(Method.RK1, (64, 128, 256)), (Method.RK4, (8, 16, 32)), (Method.RK8, (2, 4, 8))])
def test_observed_order(method, steps):
    errs = [abs(integrate_interval(decay, 0.0, 1.0, [1.0], SolverSpec(method, n))[0] - math.exp(-1)) for n in steps]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    for p in orders:
        assert abs(p - method.order) <= 0.3


def test_deterministic():
    rhs = lambda t, u: np.sin(t) * u - u**3  # noqa: E731
    u0 = np.array([0.3, -0.7, 1.1])
    a = integrate_interval(rhs, 0.0, 2.0, u0, SolverSpec(Method.RK8, 20))
    b = integrate_interval(rhs, 0.0, 2.0, u0, SolverSpec(Method.RK8, 20))
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("method", list(Method))
def test_composition_is_bitwise(method):
    # autonomous field: step times then play no role and the step sizes coincide exactly
    rhs = lambda t, u: u - u**3  # noqa: E731
    u0 = np.array([0.3, -0.7, 1.1])
    whole = integrate_interval(rhs, 0.0, 2.0, u0, SolverSpec(method, 20))
    spec = SolverSpec(method, 10)
    split = integrate_interval(rhs, 1.0, 2.0, integrate_interval(rhs, 0.0, 1.0, u0, spec), spec)
    np.testing.assert_array_equal(whole, split)


def test_batch_rows_match_single_integrations():
    rhs = lambda t, u: -u * u + np.cos(t)  # noqa: E731
    U = np.array([[0.1, 0.2], [0.5, -0.3], [1.0, 0.0]])
    t0 = np.array([0.0, 1.0, 2.0])
    batch = integrate_interval(rhs, t0, t0 + 1.0, U, SolverSpec("RK8", 7))
    for r in range(3):
        single = integrate_interval(rhs, t0[r], t0[r] + 1.0, U[r], SolverSpec("RK8", 7))
        np.testing.assert_array_equal(batch[r], single)


def test_blowup_reports_time_and_component():
    rhs = lambda t, u: u**2  # noqa: E731
    with pytest.raises(BlowUpError) as info:
        integrate_interval(rhs, 0.0, 2.0, np.array([0.0, 2.0]), SolverSpec("RK1", 50))
    assert info.value.index == 1
    assert 0.0 < info.value.t <= 2.0
    err = info.value.attach_interval(7)
    assert "interval 7" in str(err)


def test_nonpositive_dt_rejected():
    with pytest.raises(ValueError):
        rk_step(grow, 0.0, [1.0], 0.0, "RK1")
    with pytest.raises(ValueError):
        integrate_interval(grow, 1.0, 1.0, [1.0], SolverSpec("RK1", 1))
