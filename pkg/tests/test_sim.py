import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from folmi.errors import StepFailure
from folmi.interval import DelaySpec
from folmi.sim import History, SimConfig, envelope_nonincreasing, gl_coeffs, simulate, simulate_closed_loop
from folmi.synthesis import Controller

from conftest import A_LO, A_UP, B_LO, B_UP, C_OUT

A_C = 0.5 * (np.array(A_LO) + np.array(A_UP))
B_C = 0.5 * (np.array(B_LO) + np.array(B_UP))
EX2_DELAY = DelaySpec(0.25, 0.15, "sin_exp", a=0.15)


def scalar_run(a, alpha, h, horizon, x0=1.0):
    cfg = SimConfig(h, horizon, history=[x0])
    return simulate([[a]], [[0.0]], DelaySpec(0.0), alpha, cfg)


# coefficients --------------------------------------------------------------------


def test_gl_coeffs_examples():
    np.testing.assert_array_equal(gl_coeffs(1.0, 5), [1.0, -1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(gl_coeffs(0.5, 4), [1.0, -0.5, -0.125, -0.0625], rtol=0, atol=1e-15)
    assert gl_coeffs(0.3, 2)[1] == pytest.approx(-0.3)
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            gl_coeffs(bad, 3)
    with pytest.raises(ValueError):
        gl_coeffs(0.5, 0)


@given(st.floats(0.05, 0.95), st.integers(2, 60))
def test_gl_coeffs_binomial(alpha, count):
    # c_j = (-1)^j binom(alpha, j)
    c = gl_coeffs(alpha, count)
    for j in range(count):
        ref = (-1) ** j * math.gamma(alpha + 1) / (math.gamma(j + 1) * math.gamma(alpha - j + 1))
        assert c[j] == pytest.approx(ref, rel=1e-9, abs=1e-14)


# basic behaviour -------------------------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0])
def test_zero_dynamics_constant(alpha):
    x0 = [1.5, -2.0]
    tr = simulate(np.zeros((2, 2)), np.zeros((2, 2)), DelaySpec(0.1), alpha, SimConfig(0.01, 2.0, history=x0))
    np.testing.assert_array_equal(tr.states, np.tile(x0, (len(tr.times), 1)))
    assert not tr.diverged


def test_exponential_example():
    tr = scalar_run(-1.0, 1.0, 1e-3, 5.0)
    assert np.max(np.abs(tr.states[:, 0] - np.exp(-tr.times))) <= 5e-3


@given(st.floats(-3.0, -0.1), st.floats(-2.0, 2.0).filter(lambda v: abs(v) > 0.05))
def test_exponential_oracle(a, x0):
    tr = scalar_run(a, 1.0, 1e-3, 5.0, x0)
    err = np.max(np.abs(tr.states[:, 0] - x0 * np.exp(a * tr.times)))
    assert err <= 5e-3


def test_half_order_mittag_leffler():
    # D^0.5 x = -x, x(0) = 1 has x(t) = E_{1/2}(-sqrt t) = exp(t) erfc(sqrt t)
    tr = scalar_run(-1.0, 0.5, 1e-3, 4.0)
    ref = np.array([math.exp(t) * math.erfc(math.sqrt(t)) for t in tr.times])
    assert np.max(np.abs(tr.states[:, 0] - ref)) <= 2e-2


def test_step_halving_ratio():
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        tr = scalar_run(-1.0, 1.0, h, 2.0)
        errs.append(abs(tr.states[-1, 0] - math.exp(-2.0)))
    for e1, e2 in zip(errs, errs[1:]):
        assert e1 / e2 == pytest.approx(2.0, rel=0.3)


def implicit_euler(a, a_d, lag, x0, h, steps):
    n = a.shape[0]
    xs = [x0.copy()]
    m = np.linalg.inv(np.eye(n) - h * a)
    for k in range(1, steps + 1):
        xd = xs[k - lag] if k >= lag else x0
        xs.append(m @ (xs[k - 1] + h * a_d @ xd))
    return np.array(xs)


@given(st.integers(0, 10**6), st.integers(1, 3), st.integers(1, 8))
def test_alpha_one_is_implicit_euler(seed, n, lag):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) - 2.0 * np.eye(n)
    a_d = 0.5 * rng.standard_normal((n, n))
    x0 = rng.standard_normal(n)
    h = 0.01
    cfg = SimConfig(h, 1.0, history=x0)
    tr = simulate(a, a_d, DelaySpec(lag * h), 1.0, cfg)
    ref = implicit_euler(a, a_d, lag, x0, h, cfg.steps)
    assert np.max(np.abs(tr.states - ref) / (1.0 + np.abs(ref))) <= 1e-10


def test_history_continuity_and_table():
    hist = History([-0.2, -0.1, 0.0], [[0.0, 1.0], [2.0, 0.0], [0.5, -0.5]])
    a = np.array([[-1.0, 0.0], [0.0, -2.0]])
    tr = simulate(a, 0.3 * np.eye(2), DelaySpec(0.2), 0.6, SimConfig(0.01, 1.0, history=hist))
    np.testing.assert_array_equal(tr.states[0], [0.5, -0.5])
    # constant extrapolation before the first sample, linear in between
    np.testing.assert_array_equal(hist(-1.0)[0], [0.0, 1.0])
    np.testing.assert_allclose(hist(-0.15)[0], [1.0, 0.5])


def test_uniform_times():
    tr = scalar_run(-1.0, 0.5, 0.01, 1.0)
    np.testing.assert_allclose(np.diff(tr.times), 0.01, atol=1e-15)
    assert len(tr.times) == 101


# errors ----------------------------------------------------------------------------------


def test_singular_step_matrix():
    # I - h^a a is singular for a = h^-a
    h, alpha = 0.01, 0.5
    with pytest.raises(StepFailure) as exc:
        simulate([[h**-alpha]], [[0.0]], DelaySpec(0.1), alpha, SimConfig(h, 1.0, history=[1.0]))
    assert exc.value.step == 1


def test_step_exceeds_delay():
    with pytest.raises(ValueError):
        simulate([[-1.0]], [[0.0]], DelaySpec(0.25), 0.5, SimConfig(1.0, 5.0, history=[1.0]))


def test_missing_history():
    with pytest.raises(ValueError):
        simulate([[-1.0]], [[0.0]], DelaySpec(0.25), 0.5, SimConfig(0.01, 1.0))


def test_divergence_flag():
    tr = simulate([[2.0]], [[0.0]], DelaySpec(0.1), 0.8, SimConfig(0.01, 50.0, history=[1.0]))
    assert tr.diverged
    assert tr.last_step < 5000
    assert len(tr.times) == tr.last_step + 1
    assert np.all(np.isfinite(tr.states))


def test_csv_format():
    tr = simulate(np.diag([-1.0, -2.0]), np.zeros((2, 2)), DelaySpec(0.0), 0.5, SimConfig(0.1, 0.3, history=[1.0, 1.0 / 3]))
    lines = tr.to_csv().split("\n")
    assert lines[0] == "t,x1,x2,norm"
    assert lines[1] == "0,1,0.333333333333,1.05409255339"
    assert lines[-1] == "" and len(lines) == 6
    assert "\r" not in tr.to_csv()


# closed loops ------------------------------------------------------------------------------


def test_zero_controller_matches_plant():
    a = np.array([[-1.0, 0.5], [0.0, -2.0]])
    b = np.array([[1.0], [1.0]])
    k = Controller(np.array([[-1.0]]), np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    cfg = SimConfig(0.01, 3.0, history=[1.0, -1.0])
    tr_cl = simulate_closed_loop(a, b, np.array(C_OUT), k, EX2_DELAY, 0.3, cfg)
    tr_p = simulate(a, np.zeros((2, 2)), EX2_DELAY, 0.3, cfg)
    np.testing.assert_allclose(tr_cl.states[:, :2], tr_p.states, atol=1e-14)
    np.testing.assert_array_equal(tr_cl.states[:, 2], 0.0)


def loop_run(a, b, k, horizon=50.0, memory="full"):
    cfg = SimConfig(0.01, horizon, memory, history=[1.0, 1.0])
    return simulate_closed_loop(a, b, np.array(C_OUT), k, EX2_DELAY, 0.3, cfg)


def test_center_synthesized_decays(ex2_static_result):
    tr = loop_run(A_C, B_C, ex2_static_result.controller)
    assert not tr.diverged
    assert tr.norm_series[-1] < tr.norm_series[0]
    assert envelope_nonincreasing(tr)


def test_center_table_gain_decays():
    tr = loop_run(A_C, B_C, Controller.static([[-1.4215]]))
    assert not tr.diverged
    assert tr.norm_series[-1] < tr.norm_series[0]
    assert envelope_nonincreasing(tr)


def test_upper_vertex_bounded(ex2_static_result):
    tr = loop_run(np.array(A_UP), np.array(B_UP), ex2_static_result.controller)
    assert not tr.diverged
    assert tr.norm_series[-1] < tr.norm_series[0]


def test_memory_truncation(ex2_static_result):
    # full memory vs 4/5 of the steps, alpha = 0.3; the dropped weight tail is
    # about L^-a / Gamma(1 - a), so this is expected to miss 1e-3 at L = 4000
    k = ex2_static_result.controller
    full = loop_run(A_C, B_C, k)
    short = loop_run(A_C, B_C, k, memory=4 * 5000 // 5)
    assert np.max(np.abs(full.states[-1] - short.states[-1])) < 1e-3
