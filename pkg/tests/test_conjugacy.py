import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nds_lab.conjugacy import (ConjugacyState, LiftHomeo, conjugacy_residual, identity_state,
                               iteration_budget, oscillation_bound, oscillation_table, sigma_step,
                               solve_equiconjugacy, state_distance)
from nds_lab.errors import DegreeMismatch, NoConvergence, PreconditionError
from nds_lab.systems import CircleMap, NdsSequence, circle_dist

F = CircleMap("linear", 2)
PERTURBED = NdsSequence((CircleMap("perturbed-trig", 2, 0.2),) * 8, F)
ALTERNATING = NdsSequence((CircleMap("perturbed-trig", 2, 0.2), CircleMap("perturbed-trig", 2, -0.2)) * 8, F)


@pytest.fixture(scope="module")
def solved():
    return solve_equiconjugacy(PERTURBED, F, 8, tol=1e-10, grid=8192)


def bumped_state(nds, T, N, amp):
    x = np.arange(N) / N
    hs = [LiftHomeo(amp * np.sin(2 * np.pi * (k + 1) * x) / (2 * np.pi * (k + 1))) for k in range(T)]
    return ConjugacyState(tuple(hs) + (LiftHomeo.identity(N),), F, nds)


def test_identity_is_fixed_point():
    state = identity_state(NdsSequence.constant(F), F, 4, 512)
    assert state_distance(state, sigma_step(state)) == 0.0


def test_constant_sequence_solves_immediately():
    pis, rep = solve_equiconjugacy(NdsSequence.constant(F), F, 3, grid=512)
    assert rep["iterations"] == 1
    assert all(np.all(h.p == 0) for h in pis)
    assert rep["residual"] == 0.0


@pytest.mark.parametrize("a", [0.3, -0.6])
def test_one_step_matches_branch_solve(a):
    nds = NdsSequence((CircleMap("perturbed-trig", 2, a),), F)
    state = sigma_step(identity_state(nds, F, 1, 256))
    x = state.hs[0].nodes
    ref = np.array([oracles.lift_inverse(2, a, 2 * t) for t in x])
    assert np.max(np.abs(state.hs[0].lift(x) - ref)) < 1e-12
    assert np.all(state.hs[1].p == 0)


def test_contraction_trace_within_grid_slack(solved):
    _, rep = solved
    trace = rep["contraction_trace"]
    lam = PERTURBED.uniform_lambda
    assert all(b <= a / lam + 2 / rep["grid"] for a, b in zip(trace, trace[1:]))


@settings(max_examples=6, deadline=None)
@given(st.floats(-0.1, 0.1, allow_nan=False))
def test_contraction_from_bumped_start(amp):
    N = 2048
    s0 = bumped_state(PERTURBED, 8, N, amp)
    s1 = sigma_step(s0)
    s2 = sigma_step(s1)
    lam = PERTURBED.uniform_lambda
    assert state_distance(s1, s2) <= state_distance(s0, s1) / lam + 2 / N


def test_two_initial_states_agree():
    N = 2048
    a, _ = solve_equiconjugacy(PERTURBED, F, 8, grid=N)
    b, _ = solve_equiconjugacy(PERTURBED, F, 8, grid=N, init=bumped_state(PERTURBED, 8, N, 0.08))
    assert max(np.max(np.abs(g.p - h.p)) for g, h in zip(a, b)) < 10 / N


def test_solved_within_budget_and_residual(solved):
    pis, rep = solved
    assert rep["converged"]
    assert rep["iterations"] <= iteration_budget(1e-10, 2.0 - 0.2) == rep["budget"]
    assert rep["residual"] < 1e-8


def test_homeomorphism_round_trip(solved):
    pis, _ = solved
    x = np.random.default_rng(5).random(2000)
    for h in pis:
        assert h.is_monotone()
        assert np.max(circle_dist(h.inverse(h(x)), x)) < 1e-8


def test_truncated_iteration_is_worse(solved):
    _, rep = solved
    with pytest.raises(NoConvergence) as err:
        solve_equiconjugacy(PERTURBED, F, 8, tol=1e-10, max_iter=2, grid=8192)
    short = err.value.report
    assert len(short["contraction_trace"]) == 2
    assert short["residual"] > 10 * rep["residual"]
    assert err.value.to_dict()["residual_trace"] == short["contraction_trace"]


def test_degree_mismatch():
    nds = NdsSequence((CircleMap("linear", 3),), F)
    with pytest.raises(DegreeMismatch):
        solve_equiconjugacy(nds, F, 2, grid=256)


def test_preconditions():
    with pytest.raises(PreconditionError):
        solve_equiconjugacy(PERTURBED, F, 0)
    with pytest.raises(PreconditionError):
        solve_equiconjugacy(NdsSequence.constant(CircleMap("perturbed-trig", 2, 0.1)), F, 2, grid=256)


def test_residual_identity_zero():
    pis = [LiftHomeo.identity(256)] * 3
    assert conjugacy_residual(pis, NdsSequence.constant(F), F) == 0.0


def test_alternating_conjugacy_and_oscillation():
    pis, rep = solve_equiconjugacy(ALTERNATING, F, 16, grid=8192)
    # off-node error is limited by how well the grid resolves the finest h_k, see the ledger
    assert rep["node_residual"] < 1e-8
    deltas = [0.01, 0.05]
    table = oscillation_table(pis, deltas)
    for j, d in enumerate(deltas):
        bound = oscillation_bound(pis, ALTERNATING, F, d)
        assert max(row[j] for row in table) <= bound
