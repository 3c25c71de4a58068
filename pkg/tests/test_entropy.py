import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from nds_lab.entropy import (IntervalPartition, PartitionSequence, growth_table, halves,
                             joined_partition, metric_entropy_estimate, metric_entropy_formula,
                             partition_entropy, top_entropy_formula, top_entropy_separated,
                             volume_gate)
from nds_lab.errors import CellBlowup, PreconditionError
from nds_lab.metrics import count_separated
from nds_lab.systems import CircleMap, NdsSequence
from nds_lab.transfer import GridDensity

DOUBLING = NdsSequence.constant(CircleMap("linear", 2))
PERIODIC = NdsSequence.periodic((CircleMap("linear", 2), CircleMap("linear", 3)), 20, CircleMap("linear", 2))
UNIFORM = GridDensity.uniform(1024)


def perturbed(a, d=2):
    return NdsSequence.constant(CircleMap("perturbed-trig", d, a))


def test_joined_partition_doubling_is_dyadic():
    part = joined_partition(DOUBLING, PartitionSequence(), 3)
    assert np.allclose(part.breakpoints, np.arange(8) / 8)


def test_joined_partition_cells_match_preimage_oracle():
    seq = perturbed(0.3)
    part = joined_partition(seq, PartitionSequence(), 2)
    ref = {0.0, 0.5}
    ref |= {y for b in (0.0, 0.5) for y in oracles.preimages(2, 0.3, b)}
    ref = np.sort([r % 1.0 for r in ref])
    ref = ref[np.concatenate(([True], np.diff(ref) > 1e-9))]
    if ref[-1] > 1 - 1e-9:
        ref = ref[:-1]
    assert len(part) == len(ref)
    assert np.max(np.abs(np.asarray(part.breakpoints) - ref)) < 1e-12


def test_cell_budget_enforced():
    with pytest.raises(CellBlowup):
        joined_partition(DOUBLING, PartitionSequence(), 12, cell_budget=1000)


@pytest.mark.parametrize("k", [1, 2, 5, 16])
def test_equal_partition_entropy_is_log_k(k):
    assert partition_entropy(UNIFORM, IntervalPartition.equal(k)) == pytest.approx(math.log(k), abs=1e-12)


@pytest.mark.parametrize("bad", [(), (0.5, 0.2), (0.1, 1.0), (0.2, 0.2)])
def test_partition_validation(bad):
    with pytest.raises(PreconditionError):
        IntervalPartition(bad)


def test_doubling_metric_estimate_exact():
    est = metric_entropy_estimate(DOUBLING, PartitionSequence(), UNIFORM, 10)
    assert est.value == pytest.approx(math.log(2), abs=1e-12)
    assert est.window == [7, 8, 9, 10]


def test_periodic_formulas_equal_log_sqrt6():
    target = 0.5 * math.log(6)
    assert top_entropy_formula(PERIODIC, 12).value == pytest.approx(target, abs=1e-12)
    assert metric_entropy_formula(PERIODIC, 12).value == pytest.approx(target, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9, allow_nan=False), st.integers(2, 4))
def test_top_formula_is_log_degree_for_any_amplitude(a, d):
    # the integral of the Jacobian of f^n is d^n; tolerance covers quadrature of a peaked integrand
    assert top_entropy_formula(perturbed(a, d) if a else NdsSequence.constant(CircleMap("linear", d)), 6).value \
        == pytest.approx(math.log(d), abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.9, 0.9, allow_nan=False))
def test_metric_formula_first_term_closed_form(a):
    seq = perturbed(a) if a else DOUBLING
    first = metric_entropy_formula(seq, 3).trace[0][1]
    assert first == pytest.approx(math.log((2 + math.sqrt(4 - a * a)) / 2), abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.9, 0.9, allow_nan=False))
def test_jensen_metric_below_top(a):
    seq = perturbed(a) if a else DOUBLING
    assert metric_entropy_formula(seq, 8).value <= top_entropy_formula(seq, 8).value + 1e-12


def test_perturbed_metric_estimate_close_to_formula():
    seq = perturbed(0.1)
    est = metric_entropy_estimate(seq, PartitionSequence(), GridDensity.uniform(4096), 12)
    assert est.value <= metric_entropy_formula(seq, 12).value + 0.05
    assert est.value <= math.log(2) + 0.05


def test_growth_table_rates_match_oracle():
    counts = [99, 205, 410, 820, 1650]
    logs = {(n, 0.01): math.log(c) for n, c in enumerate(counts)}
    rows, est = growth_table(logs, [0.01], 4, 1 / 3)
    assert [r[4] for r in rows[1:]] == pytest.approx(oracles.log_count_rate(counts))
    assert est[0.01].value == pytest.approx(max(oracles.log_count_rate(counts)[-2:]))


def test_separated_table_uses_grid_counts():
    tab = top_entropy_separated(DOUBLING, [0.02, 0.04], 4, 1 << 14)
    assert tab.monotone_ok
    counts = [r[2] for r in tab.rows if r[1] == 0.02]
    assert counts == [count_separated(DOUBLING, n, 0.02, 1 << 14) for n in range(5)]
    assert tab.estimate == tab.estimates[0.02].value


def test_non_monotone_counts_warn(caplog, monkeypatch):
    import nds_lab.entropy as ent

    monkeypatch.setattr(ent, "count_separated", lambda seq, n, eps, R: 10 if eps > 0.03 else 5)
    with caplog.at_level(logging.WARNING, logger="nds_lab.entropy"):
        tab = ent.top_entropy_separated(DOUBLING, [0.02, 0.04], 2, 1 << 12)
    assert not tab.monotone_ok
    assert "not monotone" in caplog.text


def test_halves_default():
    assert halves().breakpoints == (0.0, 0.5)
    assert PartitionSequence().at(7) == halves()


def test_volume_gate_reports_halves_above_threshold():
    rep = volume_gate(PartitionSequence(), 4)
    assert rep["max_element"] == 0.5 and not rep["ok"]
    assert rep["gate"] == pytest.approx(math.exp(-1))
    assert volume_gate(PartitionSequence.constant(IntervalPartition.equal(3)), 4)["ok"]
