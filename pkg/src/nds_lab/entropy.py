"""Entropy estimators: partition refinements, Jacobian integral formulas and separated-set growth."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import CellBlowup, PreconditionError
from .metrics import count_separated
from .systems import NdsSequence, log_jacobian_sum, preimage_table
from .transfer import GridDensity

log = logging.getLogger(__name__)

DEFAULT_CELL_BUDGET = 1 << 22
MERGE_TOL = 1e-12
# smallness gate on partition elements; reported, not enforced (halves exceed it)
VOLUME_GATE = math.exp(-1.0)


@dataclass(frozen=True)
class IntervalPartition:
    """Arcs [b_0, b_1), ..., [b_{k-1}, b_0 + 1) cut at sorted breakpoints."""

    breakpoints: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.breakpoints)
        if not b:
            raise PreconditionError("a partition needs at least one breakpoint")
        if any(not 0.0 <= v < 1.0 for v in b):
            raise PreconditionError("breakpoints must lie in [0, 1)")
        if any(b[i + 1] <= b[i] for i in range(len(b) - 1)):
            raise PreconditionError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)

    def __len__(self) -> int:
        return len(self.breakpoints)

    @classmethod
    def equal(cls, k: int, offset: float = 0.0) -> "IntervalPartition":
        return cls(tuple(np.sort(np.mod(offset + np.arange(k) / k, 1.0))))

    def lengths(self) -> np.ndarray:
        b = np.asarray(self.breakpoints)
        return np.diff(np.append(b, b[0] + 1.0))


def halves() -> IntervalPartition:
    return IntervalPartition((0.0, 0.5))


@dataclass(frozen=True)
class PartitionSequence:
    prefix: tuple = ()
    tail: IntervalPartition = field(default_factory=halves)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))

    def at(self, n: int) -> IntervalPartition:
        return self.prefix[n] if n < len(self.prefix) else self.tail

    @classmethod
    def constant(cls, part: IntervalPartition) -> "PartitionSequence":
        return cls((), part)


def volume_gate(parts: PartitionSequence, n: int) -> dict:
    """Largest element length among the partitions at times 0..n against VOLUME_GATE."""
    largest = max(float(parts.at(i).lengths().max()) for i in range(n + 1))
    return {"max_element": largest, "gate": VOLUME_GATE, "ok": largest <= VOLUME_GATE}


@dataclass
class Estimate:
    """Finite-horizon estimate: ``value`` is taken over ``window`` of ``trace``."""

    value: float
    trace: list
    window: list


def _window(ns: list, fraction: float) -> list:
    size = max(1, math.ceil(len(ns) * fraction))
    return ns[-size:]


def _limsup(trace, fraction) -> Estimate:
    ns = [n for n, _ in trace]
    win = _window(ns, fraction)
    vals = dict(trace)
    return Estimate(max(vals[n] for n in win), list(trace), win)


def _liminf(trace, fraction) -> Estimate:
    ns = [n for n, _ in trace]
    win = _window(ns, fraction)
    vals = dict(trace)
    return Estimate(min(vals[n] for n in win), list(trace), win)


def _merge(points: np.ndarray) -> np.ndarray:
    pts = np.sort(np.mod(points, 1.0))
    if pts.size == 0:
        return pts
    keep = np.concatenate(([True], np.diff(pts) > MERGE_TOL))
    pts = pts[keep]
    if pts.size > 1 and pts[-1] > 1.0 - MERGE_TOL + pts[0]:
        pts = pts[:-1]
    return pts


class _Refiner:
    """Incremental construction of the joined partitions for n = 1, 2, ..."""

    def __init__(self, seq: NdsSequence, parts: PartitionSequence, budget: int):
        self.seq = seq
        self.parts = parts
        self.budget = budget
        self.points = np.empty(0)
        self.level = 0

    def advance(self) -> np.ndarray:
        i = self.level
        pts = np.asarray(self.parts.at(i).breakpoints)
        expected = pts.size * math.prod(m.degree for m in self.seq.window(0, i))
        if expected > self.budget:
            raise CellBlowup(f"level {i} alone contributes {expected} breakpoints (budget {self.budget})")
        for k in reversed(range(i)):
            pts = preimage_table(self.seq.map_at(k), pts).ravel()
        self.points = _merge(np.concatenate((self.points, pts)))
        if self.points.size > self.budget:
            raise CellBlowup(f"joined partition has {self.points.size} cells (budget {self.budget})")
        self.level += 1
        return self.points


def joined_partition(seq: NdsSequence, parts: PartitionSequence, n: int,
                     cell_budget: int = DEFAULT_CELL_BUDGET) -> IntervalPartition:
    """Common refinement of f_0^{-i} P_i over i < n."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    ref = _Refiner(seq, parts, cell_budget)
    for _ in range(n):
        pts = ref.advance()
    return IntervalPartition(tuple(pts))


def _cell_masses(mu0: GridDensity, breakpoints) -> np.ndarray:
    b = np.asarray(breakpoints, dtype=float)
    return mu0.arc_mass(b, np.roll(b, -1)) if b.size > 1 else np.array([mu0.integral()])


def _entropy_of_masses(masses) -> float:
    m = np.asarray(masses)
    m = m[m > 0]
    return float(-np.sum(m * np.log(m)))


def partition_entropy(mu0: GridDensity, part: IntervalPartition) -> float:
    """-sum mu0(P) log mu0(P) over the arcs of the partition."""
    return _entropy_of_masses(_cell_masses(mu0, part.breakpoints))


def metric_entropy_estimate(seq: NdsSequence, parts: PartitionSequence, phi: GridDensity,
                            n_max: int, window_fraction: float = 1 / 3,
                            cell_budget: int = DEFAULT_CELL_BUDGET) -> Estimate:
    """Terminal-window max of (1/n) H_phi(joined partition at n)."""
    if n_max < 2:
        raise PreconditionError("n_max must be at least 2")
    ref = _Refiner(seq, parts, cell_budget)
    trace = []
    for n in range(1, n_max + 1):
        pts = ref.advance()
        trace.append((n, _entropy_of_masses(_cell_masses(phi, pts)) / n))
    return _limsup(trace, window_fraction)


def _quad_nodes(quad_points: int) -> np.ndarray:
    if quad_points < 128:
        raise PreconditionError("quad_points must be at least 128")
    return (np.arange(quad_points) + 0.5) / quad_points


def _jacobian_traces(seq: NdsSequence, n_max: int, quad_points: int):
    x = _quad_nodes(quad_points)
    total = np.zeros_like(x)
    for n in range(1, n_max + 1):
        m = seq.map_at(n - 1)
        total = total + np.log(m.derivative(x))
        x = m(x)
        yield n, total


def metric_entropy_formula(seq: NdsSequence, n_max: int, quad_points: int = 4096,
                           window_fraction: float = 1 / 3) -> Estimate:
    """Terminal-window max of (1/n) * integral of the log-Jacobian sum."""
    trace = [(n, float(np.mean(s)) / n) for n, s in _jacobian_traces(seq, n_max, quad_points)]
    return _limsup(trace, window_fraction)


def top_entropy_formula(seq: NdsSequence, n_max: int, quad_points: int = 4096,
                        window_fraction: float = 1 / 3) -> Estimate:
    """Terminal-window max of (1/n) log of the integral of the Jacobian, in log space."""
    trace = [
        (n, float(logsumexp(s) - math.log(quad_points)) / n)
        for n, s in _jacobian_traces(seq, n_max, quad_points)
    ]
    return _limsup(trace, window_fraction)


@dataclass
class SeparatedTable:
    """Separated-set growth table.

    ``rows`` hold (n, eps, count, rate_raw, rate) with rate_raw = (1/n) log
    count and rate = (1/n) log(count / count at n = 0).  The second removes
    the log(1/eps)/n offset of the raw rate and has the same limit.
    """

    rows: list
    estimates: dict
    estimate: float
    monotone_ok: bool


def growth_table(counts: dict, eps_list, n_max, window_fraction, base: dict | None = None):
    """Shared by the entropy and pressure tables.  ``counts[(n, eps)]`` holds a
    log-size; ``base[eps]`` the n = 0 normaliser (defaults to counts at n = 0)."""
    rows, estimates = [], {}
    for eps in eps_list:
        ref = counts[(0, eps)] if base is None else base[eps]
        trace = []
        for n in range(0, n_max + 1):
            value = counts[(n, eps)]
            raw = value / n if n else float("nan")
            rate = (value - ref) / n if n else float("nan")
            rows.append((n, eps, value, raw, rate))
            if n:
                trace.append((n, rate))
        estimates[eps] = _limsup(trace, window_fraction)
    return rows, estimates


def top_entropy_separated(seq: NdsSequence, eps_list, n_max: int, resolution: int,
                          window_fraction: float = 1 / 3) -> SeparatedTable:
    """Growth rate of greedy separated counts on a grid, per eps."""
    eps_list = sorted(float(e) for e in eps_list)
    counts = {(n, e): count_separated(seq, n, e, resolution) for e in eps_list for n in range(n_max + 1)}
    monotone = all(
        counts[(n, eps_list[k])] >= counts[(n, eps_list[k + 1])]
        for n in range(n_max + 1) for k in range(len(eps_list) - 1)
    )
    if not monotone:
        log.warning("separated counts are not monotone in eps; grid too coarse?")
    logs = {key: math.log(c) for key, c in counts.items()}
    rows, estimates = growth_table(logs, eps_list, n_max, window_fraction)
    rows = [(n, e, counts[(n, e)], raw, rate) for n, e, _, raw, rate in rows]
    return SeparatedTable(rows, estimates, estimates[eps_list[0]].value, monotone)
