import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from folmi.errors import DimensionError, IntervalError
from folmi.interval import IntervalMatrix, UncertaintyFactors, build_factors, certain_factors
from folmi.linalg import sym_eig
from folmi.stability import (
    VERDICTS,
    DelayedPair,
    analyze_certain,
    analyze_interval,
    analyze_pair,
    assemble_certain,
    assemble_interval,
    sector_csv,
    sector_scan,
)
from folmi.synthesis import close_loop

seeds = st.integers(0, 2**32 - 1)
NAMES = ["P", "Q", "Z", "T1", "T2", "T3", "N1", "N2", "N3"]


def random_values(rng, n, eta=True):
    v = {}
    for k in NAMES:
        x = rng.standard_normal((n, n))
        v[k] = x + x.T if k in "PQZ" else x
    if eta:
        v["eta"] = np.array([[rng.uniform(0.05, 3.0)]])
    return v


def gamma_by_hand(v, a, b, tau, mu):
    """Gamma blocks of the certain test written out entry by entry, independently of the assembler."""
    P, Q, Z = v["P"], v["Q"], v["Z"]
    T1, T2, T3 = v["T1"], v["T2"], v["T3"]
    N1, N2, N3 = v["N1"], v["N2"], v["N3"]
    g11 = Q + N1 + N1.T - a.T @ T1.T - T1 @ a
    g12 = N2.T - N1 - a.T @ T2.T - T1 @ b
    g13 = P + N3.T + T1 - a.T @ T3.T
    g22 = -(1 - mu) * Q - N2 - N2.T - T2 @ b - b.T @ T2.T
    g23 = -N3.T + T2 - b.T @ T3.T
    g33 = tau * Z + T3 + T3.T
    return np.block(
        [
            [g11, g12, g13, tau * N1],
            [g12.T, g22, g23, tau * N2],
            [g13.T, g23.T, g33, tau * N3],
            [tau * N1.T, tau * N2.T, tau * N3.T, -tau * Z],
        ]
    )


def robust_parts_by_hand(v, a_uf, b_uf, tau, mu):
    """``phi + eta R^T R`` and the border ``Mt`` built directly with numpy."""
    n = a_uf.shape[0]
    phi = gamma_by_hand(v, a_uf.center, b_uf.center, tau, mu)
    eta = float(v["eta"][0, 0])
    rr = np.zeros((4 * n, 4 * n))
    rr[:n, :n] = a_uf.r_factor.T @ a_uf.r_factor
    rr[n : 2 * n, n : 2 * n] = b_uf.r_factor.T @ b_uf.r_factor
    mt = np.zeros((4 * n, a_uf.n_slots + b_uf.n_slots))
    for i in range(3):
        t = v[f"T{i + 1}"]
        mt[i * n : (i + 1) * n] = np.hstack([-t @ a_uf.m_factor, -t @ b_uf.m_factor])
    return phi + eta * rr, mt, eta


# certain systems -------------------------------------------------------------------


def test_scalar_stable_certified():
    rep = analyze_certain(DelayedPair([[-1.0]], [[0.0]]), 0.1, 0.0)
    assert rep.certified and rep.verify_report.passed
    assert rep.certificate.scalar("P") > 0


def test_scalar_unstable_not_certified():
    rep = analyze_certain(DelayedPair([[1.0]], [[0.0]]), 0.1, 0.0)
    assert rep.verdict == "unknown" and rep.certificate is None


def test_delayed_scalar_certified():
    assert analyze_certain(DelayedPair([[0.0]], [[-1.0]]), 0.1, 0.0).certified


def _max_tau(b):
    lo, hi = 0.0, 4.0
    for _ in range(7):
        mid = 0.5 * (lo + hi)
        if analyze_certain(DelayedPair([[0.0]], [[b]]), mid, 0.0).certified:
            lo = mid
        else:
            hi = mid
    return lo


def test_certified_delay_shrinks_with_gain():
    taus = [_max_tau(b) for b in (-1.0, -2.0, -4.0)]
    assert taus[0] > taus[1] > taus[2] > 0.0


def test_assemble_certain_sizes_and_errors():
    prob = assemble_certain(DelayedPair(np.eye(2), np.eye(2)), 0.5, 0.2)
    assert prob.constraints[0].expr.shape == (8, 8)
    assert [v.name for v in prob.vars] == NAMES
    with pytest.raises(IntervalError):
        assemble_certain(DelayedPair(np.eye(2), np.eye(2)), 0.5, 1.0)
    with pytest.raises(IntervalError):
        assemble_certain(DelayedPair(np.eye(2), np.eye(2)), 0.0, 0.0)
    with pytest.raises(DimensionError):
        DelayedPair(np.eye(2), np.eye(3))


@given(seeds, st.integers(1, 3), st.floats(0.01, 2.0), st.floats(-1.0, 0.95))
def test_block_fidelity(seed, n, tau, mu):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    v = random_values(rng, n, eta=False)
    got = assemble_certain(DelayedPair(a, b), tau, mu).constraints[0].expr.evaluate(v)
    want = gamma_by_hand(v, a, b, tau, mu)
    assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


# interval systems ---------------------------------------------------------------------


def _random_interval_pair(rng, n, width):
    a0 = rng.standard_normal((n, n)) - 2.5 * np.eye(n)
    b0 = 0.3 * rng.standard_normal((n, n))
    ra = width * rng.random((n, n))
    rb = width * rng.random((n, n))
    return build_factors(IntervalMatrix(a0 - ra, a0 + ra)), build_factors(IntervalMatrix(b0 - rb, b0 + rb))


def feasible_interval_data():
    rng = np.random.default_rng(2024)
    a_uf, b_uf = _random_interval_pair(rng, 2, 0.2)
    rep = analyze_interval(a_uf, b_uf, 0.2, 0.1)
    assert rep.certified
    return a_uf, b_uf, rep.certificate.values


@pytest.fixture(scope="module")
def feasible_interval():
    return feasible_interval_data()


def test_robust_lmi_size(feasible_interval):
    a_uf, b_uf, _ = feasible_interval
    prob = assemble_interval(a_uf, b_uf, 0.2, 0.1)
    assert prob.constraints[0].expr.shape == (4 * 2 + 4 + 4,) * 2


@given(seeds, st.floats(0.0, 3.0))
def test_schur_equivalence(feasible_interval, seed, t):
    # perturb a feasible certificate by a growing amount to see both outcomes
    a_uf, b_uf, base = feasible_interval
    rng = np.random.default_rng(seed)
    noise = random_values(rng, 2)
    v = {}
    for k in NAMES:
        v[k] = base[k] + t * noise[k] * np.max(np.abs(base[k]))
    v["eta"] = np.array([[float(base["eta"][0, 0]) * (1.0 + t * rng.uniform(-0.9, 2.0))]])
    prob = assemble_interval(a_uf, b_uf, 0.2, 0.1)
    bordered = prob.constraints[0].expr.evaluate(v)
    phi, mt, eta = robust_parts_by_hand(v, a_uf, b_uf, 0.2, 0.1)
    n4 = phi.shape[0]
    # the assembled border agrees with the hand-built one ...
    assert np.max(np.abs(bordered[:n4, :n4] - phi)) <= 1e-10 * max(1.0, np.max(np.abs(phi)))
    assert np.max(np.abs(bordered[:n4, n4:] - mt)) <= 1e-10 * max(1.0, np.max(np.abs(mt)))
    # ... and its sign matches the pre-Schur form phi + eta^-1 Mt Mt^T
    pre = phi + mt @ mt.T / eta
    lb = sym_eig(0.5 * (bordered + bordered.T))[-1]
    lp = sym_eig(0.5 * (pre + pre.T))[-1]
    if abs(lb) > 1e-9 and abs(lp) > 1e-9:
        assert (lb < 0) == (lp < 0)


def test_degenerate_interval_agrees_with_certain():
    rng = np.random.default_rng(7)
    agree = certified = 0
    for i in range(100):
        shift = 2.5 if i % 2 == 0 else -1.0
        a = rng.standard_normal((2, 2)) - shift * np.eye(2)
        b = 0.3 * rng.standard_normal((2, 2))
        r1 = analyze_certain(DelayedPair(a, b), 0.2, 0.1)
        r2 = analyze_interval(certain_factors(a), certain_factors(b), 0.2, 0.1)
        agree += r1.verdict == r2.verdict
        certified += r1.certified
    assert agree == 100
    # both verdicts occur
    assert 0 < certified < 100


def test_wide_radii_not_certified(docs):
    a_uf, b_uf = close_loop(docs["ex1_plant_negfb"].plant(), docs["ex1_plant_negfb"].controller)
    assert analyze_interval(a_uf, b_uf, 0.1, 0.0).certified

    def widen(uf):
        return UncertaintyFactors(uf.center, 100 * uf.radius, 10 * uf.m_factor, 10 * uf.r_factor)

    assert not analyze_interval(widen(a_uf), widen(b_uf), 0.1, 0.0).certified


def test_reference_closed_loop_center_is_unstable(docs):
    # the reference closed loop has a positive real eigenvalue at zero delay, which
    # no sufficient condition can certify
    pair = docs["ex1_closed_loop"].pair()
    a_uf, b_uf = pair.factors()
    lam = np.linalg.eigvals(a_uf.center + b_uf.center)
    assert lam.real.max() > 1.0


def test_analyze_pair_on_point_matrices():
    assert analyze_pair(DelayedPair(-np.eye(2), 0.1 * np.eye(2)), 0.5, 0.0).certified


def test_no_unstable_verdict():
    assert VERDICTS == ("certified_stable", "unknown")


# sector scan -------------------------------------------------------------------------


def test_sector_stable_scalar():
    (s,) = sector_scan(IntervalMatrix.certain([[-1.0]]), 0.5, 1)
    assert s.worst_margin == pytest.approx(math.pi - math.pi / 4)


def test_sector_unstable_scalar():
    for alpha in (0.1, 0.5, 0.9):
        (s,) = sector_scan(IntervalMatrix.certain([[1.0]]), alpha, 1)
        assert s.worst_margin < 0


def test_sector_csv_deterministic(ex1_plant_a):
    a = sector_csv(sector_scan(ex1_plant_a, 0.3, 50, seed=3), 0.3)
    b = sector_csv(sector_scan(ex1_plant_a, 0.3, 50, seed=3), 0.3)
    assert a == b
    lines = a.splitlines()
    assert lines[0].startswith("# alpha=0.3,boundary=")
    assert lines[1] == "sample_id,eig_index,re,im,arg,margin"
    assert len(lines) == 2 + 50 * 2


def test_sector_scan_rejects_bad_alpha(ex1_plant_a):
    with pytest.raises(IntervalError):
        sector_scan(ex1_plant_a, 1.0, 3)
