import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nds_lab.errors import ConfigError, NonConvergence, PreconditionError
from nds_lab.systems import (CircleMap, ComposedMap, NdsSequence, branch_preimages, circle_dist,
                             compose_eval, log_jacobian_sum, orbit, preimage_table, primitive_steps)

unit = st.floats(0.0, 1.0, exclude_max=True, allow_nan=False)
amps = st.floats(-0.9, 0.9, allow_nan=False)
degrees = st.integers(2, 5)


def test_linear_triple_preimages():
    m = CircleMap("linear", 3)
    assert branch_preimages(m, 0.3) == pytest.approx([0.1, 0.1 + 1 / 3, 0.1 + 2 / 3], abs=1e-15)


def test_identity_is_flagged_not_expanding():
    ident = CircleMap("identity", 1, 0.0)
    assert not ident.expanding
    assert ident(0.37) == pytest.approx(0.37)


@pytest.mark.parametrize("kwargs", [
    dict(family="linear", degree=1),
    dict(family="linear", degree=2, amplitude=0.1),
    dict(family="perturbed-trig", degree=2, amplitude=1.0),
    dict(family="perturbed-trig", degree=2, amplitude=0.2, lam=1.9),
    dict(family="perturbed-trig", degree=2, amplitude=0.2, gamma=1.0),
    dict(family="mystery", degree=2),
])
def test_invalid_maps_rejected(kwargs):
    with pytest.raises(ConfigError):
        CircleMap(**kwargs)


def test_degree_one_message_names_invariant():
    with pytest.raises(ConfigError, match="degree must be >= 2"):
        CircleMap("linear", 1)


def test_branch_tolerance_must_be_positive():
    with pytest.raises(PreconditionError):
        branch_preimages(CircleMap("linear", 2), 0.2, tol=0.0)


def test_branch_residual_check_raises():
    with pytest.raises(NonConvergence):
        branch_preimages(CircleMap("perturbed-trig", 2, 0.3), 0.123456789, tol=1e-300)


@settings(max_examples=60, deadline=None)
@given(degrees, amps, unit)
def test_preimages_match_root_finder(d, a, x):
    m = CircleMap("perturbed-trig", d, a) if a else CircleMap("linear", d)
    ours = branch_preimages(m, x)
    ref = oracles.preimages(d, a, x)
    assert len(ours) == d
    gaps = circle_dist(np.array(ours)[:, None], np.array(ref)[None, :])
    assert np.max(np.min(gaps, axis=1)) < 1e-12
    assert np.max(np.min(gaps, axis=0)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(degrees, amps, st.floats(-5.0, 5.0, allow_nan=False))
def test_lift_inverse_matches_root_finder(d, a, v):
    m = CircleMap("perturbed-trig", d, a) if a else CircleMap("linear", d)
    assert float(m.lift_inverse(v)) == pytest.approx(oracles.lift_inverse(d, a, v), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(degrees, amps, unit)
def test_lift_is_degree_equivariant(d, a, x):
    m = CircleMap("perturbed-trig", d, a) if a else CircleMap("linear", d)
    assert float(m.lift(x + 1)) == pytest.approx(float(m.lift(x)) + d, abs=1e-12)
    assert float(m(x)) == pytest.approx(oracles.step(d, a, x), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(degrees, amps), min_size=1, max_size=4), unit)
def test_composition_matches_orbit(pairs, x):
    maps = [CircleMap("perturbed-trig", d, a) if a else CircleMap("linear", d) for d, a in pairs]
    seq = NdsSequence(tuple(maps), maps[-1])
    n = len(maps)
    ref = oracles.orbit(pairs, x, n)
    assert np.max(circle_dist(orbit(seq, 0, n, x), np.array(ref))) < 1e-10
    assert circle_dist(compose_eval(seq, 0, n, x), ref[-1]) < 1e-10
    comp = ComposedMap(tuple(maps))
    assert comp.degree == math.prod(d for d, _ in pairs)
    assert circle_dist(comp(x), ref[-1]) < 1e-10


def test_composed_map_preimages_roundtrip():
    comp = ComposedMap((CircleMap("perturbed-trig", 2, 0.3), CircleMap("linear", 3)))
    ys = preimage_table(comp, [0.41])[0]
    assert ys.size == 6
    assert np.max(circle_dist(comp(ys), 0.41)) < 1e-12


def test_log_jacobian_sum_oracle():
    pairs = [(2, 0.3), (3, -0.2), (2, 0.0)]
    seq = NdsSequence(tuple(CircleMap("perturbed-trig", d, a) if a else CircleMap("linear", d) for d, a in pairs),
                      CircleMap("linear", 2))
    x = 0.2718
    pts = oracles.orbit(pairs, x, 3)
    ref = sum(math.log(oracles.deriv(d, a, p)) for (d, a), p in zip(pairs, pts))
    assert log_jacobian_sum(seq, 3, x) == pytest.approx(ref, abs=1e-13)


def test_sequence_indexing_and_periodic():
    a, b = CircleMap("linear", 2), CircleMap("linear", 3)
    seq = NdsSequence.periodic((a, b), 3)
    assert [m.degree for m in seq.window(0, 8)] == [2, 3, 2, 3, 2, 3, 2, 2]
    with pytest.raises(PreconditionError):
        seq.map_at(-1)


def test_primitive_steps_observe_only_composite_ends():
    comp = ComposedMap((CircleMap("linear", 2), CircleMap("linear", 3)))
    deg, amp, obs = primitive_steps(NdsSequence((comp,), CircleMap("linear", 2)), 0, 2)
    assert deg.tolist() == [2.0, 3.0, 2.0]
    assert obs.tolist() == [False, True, True]


@settings(max_examples=100, deadline=None)
@given(unit, unit)
def test_circle_distance_is_a_metric_on_pairs(x, y):
    d = circle_dist(x, y)
    assert 0.0 <= d <= 0.5
    assert d == pytest.approx(circle_dist(y, x))
    assert d == pytest.approx(oracles.arc(x, y), abs=1e-15)
