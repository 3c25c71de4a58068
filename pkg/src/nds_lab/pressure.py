"""Topological and metric pressure, power systems and the variational gap."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .entropy import (DEFAULT_CELL_BUDGET, Estimate, PartitionSequence, _liminf,
                      growth_table, metric_entropy_estimate)
from .errors import PreconditionError
from .metrics import grid_cover, grid_pack
from .systems import ComposedMap, NdsSequence, primitive_steps
from .transfer import GridDensity, evolve, interpolate


@dataclass(frozen=True, eq=False)
class PotentialSequence:
    """Potentials phi_0, phi_1, ... sampled on a common grid of N nodes i/N."""

    prefix: tuple
    tail: np.ndarray

    def __post_init__(self):
        tail = np.asarray(self.tail, dtype=float)
        prefix = tuple(np.asarray(p, dtype=float) for p in self.prefix)
        N = tail.shape[0]
        if tail.ndim != 1 or N < 2 or any(p.shape != tail.shape for p in prefix):
            raise PreconditionError("potentials must be 1-d samples on one common grid")
        for arr in prefix + (tail,):
            if not np.all(np.isfinite(arr)):
                raise PreconditionError("potential samples must be finite")
            arr.setflags(write=False)
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "tail", tail)

    @property
    def N(self) -> int:
        return self.tail.shape[0]

    @property
    def members(self) -> tuple:
        return self.prefix + (self.tail,)

    @property
    def uniform_bound(self) -> float:
        return max(float(np.max(np.abs(p))) for p in self.members)

    @property
    def modulus(self) -> float:
        """Largest grid Lipschitz quotient over all members."""
        return max(float(np.max(np.abs(np.diff(np.append(p, p[0]))))) * self.N for p in self.members)

    def at(self, n: int) -> np.ndarray:
        return self.prefix[n] if n < len(self.prefix) else self.tail

    def __call__(self, n: int, x):
        return interpolate(self.at(n), x)

    def shifted(self, c: float) -> "PotentialSequence":
        return PotentialSequence(tuple(p + c for p in self.prefix), self.tail + c)

    @classmethod
    def constant(cls, c: float, N: int = 1024) -> "PotentialSequence":
        return cls((), np.full(N, float(c)))

    @classmethod
    def zero(cls, N: int = 1024) -> "PotentialSequence":
        return cls.constant(0.0, N)

    @classmethod
    def from_function(cls, func, N: int = 1024) -> "PotentialSequence":
        return cls((), func(np.arange(N) / N))

    @classmethod
    def neg_log_derivative(cls, seq: NdsSequence, N: int = 4096) -> "PotentialSequence":
        """phi_n = -log F_n' sampled at the nodes."""
        x = np.arange(N) / N
        return cls(tuple(-np.log(m.derivative(x)) for m in seq.prefix), -np.log(seq.tail.derivative(x)))


def birkhoff_sum(seq: NdsSequence, pot: PotentialSequence, n: int, x):
    """S_n(x) = sum over i < n of phi_i(f_0^i x), phi_i linearly interpolated."""
    if n < 0:
        raise PreconditionError("n must be nonnegative")
    y = np.asarray(x, dtype=float)
    total = np.zeros(y.shape)
    for i in range(n):
        total = total + pot(i, y)
        y = seq.map_at(i)(y)
    return total if total.shape else float(total)


def grid_birkhoff(seq: NdsSequence, pot: PotentialSequence, n: int, resolution: int) -> np.ndarray:
    deg, amp, obs = primitive_steps(seq, 0, n)
    pots = np.ascontiguousarray(np.stack([pot.at(i) for i in range(n)])) if n else np.zeros((0, pot.N))
    return _kernels.birkhoff_grid(int(resolution), deg, amp, obs, pots, pot.N)


def _is_flat(w: np.ndarray) -> bool:
    return bool(np.all(w == w[0]))


def pressure_separated(seq: NdsSequence, pot: PotentialSequence, n: int, eps: float,
                       resolution: int, return_points: bool = False):
    """log of the weight sum of a descending-weight greedy separated packing.

    Ties keep grid-index order, so flat weights reproduce the index-order
    packing of ``count_separated`` exactly.
    """
    w = grid_birkhoff(seq, pot, n, resolution)
    order = None if _is_flat(w) else np.argsort(-w, kind="stable")
    _, mask = grid_pack(seq, n, eps, resolution, order=order, return_mask=True)
    value = float(logsumexp(w[mask]))
    return (value, np.flatnonzero(mask)) if return_points else value


def pressure_spanning(seq: NdsSequence, pot: PotentialSequence, n: int, eps: float,
                      resolution: int, return_points: bool = False):
    """log of the weight sum of a greedy cover preferring low weights among the best-covering candidates."""
    w = grid_birkhoff(seq, pot, n, resolution)
    _, mask = grid_cover(seq, n, eps, resolution, weights=None if _is_flat(w) else w, return_mask=True)
    value = float(logsumexp(w[mask]))
    return (value, np.flatnonzero(mask)) if return_points else value


@dataclass
class PressureTable:
    """rows: (n, eps, logS, logR, rate_raw, rate); rate = (logS_n - logS_0)/n."""

    rows: list
    estimates: dict
    estimate: float


def top_pressure_estimate(seq: NdsSequence, pot: PotentialSequence, eps_list, n_max: int,
                          resolution: int, window_fraction: float = 1 / 3,
                          spanning: bool = False) -> PressureTable:
    eps_list = sorted(float(e) for e in eps_list)
    logS, logR = {}, {}
    for e in eps_list:
        for n in range(n_max + 1):
            logS[(n, e)] = pressure_separated(seq, pot, n, e, resolution)
            logR[(n, e)] = pressure_spanning(seq, pot, n, e, resolution) if spanning else float("nan")
    rows, estimates = growth_table(logS, eps_list, n_max, window_fraction)
    rows = [(n, e, s, logR[(n, e)], raw, rate) for n, e, s, raw, rate in rows]
    return PressureTable(rows, estimates, estimates[eps_list[0]].value)


@dataclass
class MetricPressure:
    value: float
    entropy: Estimate
    average: Estimate
    # evaluated on supplied partitions only, hence a lower bound of the sup over partitions
    lower_bound: bool = True


def potential_integrals(seq: NdsSequence, pot: PotentialSequence, phi: GridDensity, n: int) -> list[float]:
    """[int phi_i d mu_i for i < n] with mu_i the pushed-forward densities."""
    dens = evolve(seq, phi, max(n - 1, 0))
    x = phi.nodes
    return [float(np.mean(pot(i, x) * dens[i].values)) for i in range(n)]


def metric_pressure(seq: NdsSequence, pot: PotentialSequence, phi: GridDensity,
                    parts: PartitionSequence, n_max: int, window_fraction: float = 1 / 3,
                    cell_budget: int = DEFAULT_CELL_BUDGET) -> MetricPressure:
    """Partition entropy (terminal max) plus the terminal min of running potential averages."""
    if np.any(phi.values <= 0):
        raise PreconditionError("initial density must be strictly positive")
    ent = metric_entropy_estimate(seq, parts, phi, n_max, window_fraction, cell_budget)
    ints = np.cumsum(potential_integrals(seq, pot, phi, n_max))
    trace = [(n, float(ints[n - 1]) / n) for n in range(1, n_max + 1)]
    avg = _liminf(trace, window_fraction)
    return MetricPressure(ent.value + avg.value, ent, avg)


def power_system(seq: NdsSequence, pot: PotentialSequence, k: int):
    """k-th power: f^[k]_n = f_{nk}^k and psi_n = sum_j phi_{nk+j} o f_{nk}^j on the grid."""
    if k < 1:
        raise PreconditionError("k must be at least 1")
    if k == 1:
        return seq, pot
    length = math.ceil(max(len(seq.prefix), len(pot.prefix)) / k)
    x = np.arange(pot.N) / pot.N

    def block(n):
        maps = seq.window(n * k, k)
        y = x
        total = np.zeros_like(x)
        for j, m in enumerate(maps):
            total = total + pot(n * k + j, y)
            y = m(y)
        return ComposedMap(tuple(maps)), total

    blocks = [block(n) for n in range(length + 1)]
    new_seq = NdsSequence(tuple(b[0] for b in blocks[:length]), blocks[length][0])
    new_pot = PotentialSequence(tuple(b[1] for b in blocks[:length]), blocks[length][1])
    return new_seq, new_pot


def variational_gap(seq: NdsSequence, pot: PotentialSequence, phi: GridDensity,
                    parts: PartitionSequence, eps: float, n_max: int, resolution: int,
                    window_fraction: float = 1 / 3) -> dict:
    """Top pressure estimate minus metric pressure (expected >= 0 up to estimator error)."""
    top = top_pressure_estimate(seq, pot, [eps], n_max, resolution, window_fraction)
    met = metric_pressure(seq, pot, phi, parts, n_max, window_fraction)
    return {"P_top_est": top.estimate, "P_metric_est": met.value, "gap": top.estimate - met.value,
            "metric_lower_bound": met.lower_bound}
