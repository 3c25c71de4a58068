import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nds_lab.errors import PrecondViolated, PreconditionError, RadiusTooLarge
from nds_lab.metrics import (arc_threshold, bowen_ball, bowen_distance, count_separated, distortion_sweep,
                             count_spanning, distortion_constant, distortion_ratio, grid_cover,
                             grid_pack, triangle_violations, volume_lemma_check)
from nds_lab.systems import CircleMap, NdsSequence

DOUBLING = NdsSequence.constant(CircleMap("linear", 2))
PERTURBED = NdsSequence.constant(CircleMap("perturbed-trig", 2, 0.1))
MIXED = NdsSequence((CircleMap("perturbed-trig", 2, 0.4), CircleMap("linear", 3),
                     CircleMap("perturbed-trig", 3, -0.5)), CircleMap("linear", 2))
MIXED_PAIRS = [(2, 0.4), (3, 0.0), (3, -0.5), (2, 0.0)]
unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)


@settings(max_examples=80, deadline=None)
@given(unit, unit, st.integers(0, 6))
def test_bowen_distance_matches_oracle(x, y, n):
    assert bowen_distance(MIXED, 0, n, x, y) == pytest.approx(oracles.bowen(MIXED_PAIRS, n, x, y), abs=1e-12)


def test_bowen_distance_rejects_negative_order():
    with pytest.raises(PreconditionError):
        bowen_distance(DOUBLING, 0, -1, 0.1, 0.2)


def test_triangle_inequality_sampled():
    assert triangle_violations(MIXED, 0, 5, 5000, seed=3) == 0


def test_separated_count_small_cases():
    assert count_separated(DOUBLING, 0, 0.25, 1000) == 4
    assert count_spanning(DOUBLING, 0, 0.5, 1001) == 1


def test_doubling_ball_measure():
    ball = bowen_ball(DOUBLING, 0, 3, 0.3, 0.05)
    assert ball.measure == pytest.approx(2 * 0.05 / 8, abs=1e-12)


def test_radius_above_threshold_rejected():
    with pytest.raises(RadiusTooLarge):
        bowen_ball(DOUBLING, 0, 2, 0.3, arc_threshold(DOUBLING))


def test_arc_threshold_and_distortion_constant():
    m = CircleMap("perturbed-trig", 2, 0.1)
    assert arc_threshold(PERTURBED) == pytest.approx(1 / (2 * 2.1))
    assert distortion_constant(PERTURBED) == pytest.approx(m.gamma / (m.lam - 1))
    with pytest.raises(PreconditionError):
        distortion_constant(NdsSequence.constant(CircleMap("identity", 1, 0.0)))


def test_resolution_floor_enforced():
    with pytest.raises(PreconditionError):
        count_separated(DOUBLING, 2, 0.01, 500)


@pytest.mark.parametrize("seq,pairs", [(DOUBLING, [(2, 0.0)]), (PERTURBED, [(2, 0.1)]), (MIXED, MIXED_PAIRS)])
@pytest.mark.parametrize("n,eps", [(0, 0.05), (2, 0.04), (3, 0.02)])
def test_arc_packing_matches_brute_force(seq, pairs, n, eps):
    R = 600
    count, mask = grid_pack(seq, n, eps, R, return_mask=True)
    ref = oracles.greedy_pack(pairs, n, eps, R)
    assert count == len(ref)
    assert np.flatnonzero(mask).tolist() == ref


def test_weighted_order_packing_matches_brute_force():
    R = 500
    order = np.random.default_rng(7).permutation(R)
    count, mask = grid_pack(MIXED, 3, 0.03, R, order=order, return_mask=True)
    ref = oracles.greedy_pack(MIXED_PAIRS, 3, 0.03, R, order=order.tolist())
    assert count == len(ref)
    assert sorted(ref) == np.flatnonzero(mask).tolist()


def test_general_mode_packing_matches_brute_force():
    R = 300
    eps = 0.3
    assert eps >= arc_threshold(DOUBLING, 0, 2)
    count = count_separated(DOUBLING, 2, eps, R) if R >= 10 / eps else None
    assert count == len(oracles.greedy_pack([(2, 0.0)], 2, eps, R))


def test_general_mode_grid_limit():
    with pytest.raises(PreconditionError):
        count_spanning(DOUBLING, 2, 0.3, 1 << 14)


@pytest.mark.parametrize("seq,pairs", [(DOUBLING, [(2, 0.0)]), (MIXED, MIXED_PAIRS)])
@pytest.mark.parametrize("n,eps", [(0, 0.05), (2, 0.04), (3, 0.1)])
def test_cover_is_valid_and_sandwiched(seq, pairs, n, eps):
    R = 400
    count, mask = grid_cover(seq, n, eps, R, return_mask=True)
    assert oracles.is_cover(pairs, n, eps, R, np.flatnonzero(mask).tolist())
    sep = count_separated(seq, n, eps, R)
    assert count <= sep
    if R >= 20 / eps:
        assert sep <= count_spanning(seq, n, eps / 2, R)


def test_weighted_cover_prefers_light_centres_and_stays_valid():
    R = 400
    w = np.cos(np.arange(R) * 0.37)
    _, mask = grid_cover(MIXED, 2, 0.05, R, weights=w, return_mask=True)
    assert oracles.is_cover(MIXED_PAIRS, 2, 0.05, R, np.flatnonzero(mask).tolist())


def test_doubling_sandwich_example():
    R = 1 << 16
    span = count_spanning(DOUBLING, 0, 0.01, R)
    sep = count_separated(DOUBLING, 0, 0.01, R)
    span_half = count_spanning(DOUBLING, 0, 0.005, R)
    assert span <= sep <= span_half
    assert (span, sep, span_half) == (50, 99, 101)


def test_distortion_ratio_requires_bowen_closeness():
    with pytest.raises(PrecondViolated):
        distortion_ratio(PERTURBED, 4, 0.1, 0.4)


@settings(max_examples=40, deadline=None)
@given(unit, st.floats(1e-6, 1e-3), st.integers(1, 8))
def test_distortion_ratio_bounded(x, h, n):
    y = (x + h) % 1.0
    d = bowen_distance(PERTURBED, 0, n, x, y)
    if bowen_distance(PERTURBED, 0, n - 1, x, y) >= arc_threshold(PERTURBED, 0, n):
        return
    ratio = distortion_ratio(PERTURBED, n, x, y)
    bound = math.exp(distortion_constant(PERTURBED) * d)
    assert 1 / bound - 1e-12 <= ratio <= bound + 1e-12


def test_volume_products_constant_for_linear():
    rep = volume_lemma_check(DOUBLING, 0.01, 12, 64, seed=1)
    assert rep["max_product"] - rep["min_product"] < 1e-10
    assert rep["min_product"] == pytest.approx(0.02, abs=1e-10)


def test_volume_ratio_within_distortion_bound():
    rep = volume_lemma_check(PERTURBED, 0.01, 10, 64, seed=2)
    assert rep["ratio"] <= rep["ratio_bound"]


@pytest.mark.parametrize("a", [0.1, 0.5, 0.9])
def test_distortion_sweep_within_closed_form(a):
    rep = distortion_sweep(NdsSequence.constant(CircleMap("perturbed-trig", 2, a)), 6, 1000, seed=1)
    assert rep["pairs"] > 900
    assert not rep["enlarged"]
    assert rep["c0_empirical"] <= rep["c0"] == rep["c0_used"]


def test_distortion_constant_enlarged_and_logged(monkeypatch, caplog):
    import nds_lab.metrics as met

    monkeypatch.setattr(met, "distortion_constant", lambda seq: 1e-6)
    with caplog.at_level("WARNING", logger="nds_lab.metrics"):
        rep = met.distortion_sweep(PERTURBED, 5, 500, seed=2)
    assert rep["enlarged"] and rep["c0_used"] == rep["c0_empirical"] > 1e-6
    assert "above the closed form" in caplog.text
