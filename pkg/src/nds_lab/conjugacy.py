"""Equi-conjugacy between a sequence of degree-d circle maps and one fixed map.

Homeomorphisms are carried as lifts h(x) = x + p(x) with p 1-periodic and
sampled on a grid.  All lifts fix 0 (F(0) = 0 for every map of the family),
so 0 is the base point and the anchoring h_k(0) = F_0^k(h_0(0)) = 0 holds
automatically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegreeMismatch, NoConvergence, NonMonotone, PreconditionError
from .systems import CircleMap, NdsSequence, circle_dist


_INVERSE_NEWTON_STEPS = 3


@dataclass(frozen=True, eq=False)
class LiftHomeo:
    """Lift x + p(x) with p sampled at i/N and read through a periodic cubic spline."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        nodes = np.arange(p.shape[0] + 1) / p.shape[0]
        object.__setattr__(self, "_spline", CubicSpline(nodes, np.append(p, p[0]), bc_type="periodic"))

    @property
    def N(self) -> int:
        return self.p.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    @classmethod
    def identity(cls, N: int) -> "LiftHomeo":
        return cls(np.zeros(N))

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        return x + self._spline(np.mod(x, 1.0))

    def __call__(self, x):
        return np.mod(self.lift(x), 1.0)

    def is_monotone(self) -> bool:
        h = self.nodes + self.p
        return bool(np.all(np.diff(np.append(h, h[0] + 1.0)) > 0))

    def inverse_lift(self, x):
        x = np.asarray(x, dtype=float)
        base = np.concatenate((self.nodes - 1.0, self.nodes, self.nodes + 1.0, [2.0]))
        knots = base + np.concatenate((self.p, self.p, self.p, self.p[:1]))
        r = np.mod(x, 1.0)
        y = np.interp(r, knots, base)
        # polish the piecewise-linear guess against the spline
        for _ in range(_INVERSE_NEWTON_STEPS):
            y = y - (self.lift(y) - r) / (1.0 + self._spline(np.mod(y, 1.0), 1))
        return y + (x - r)

    def inverse(self, x):
        return np.mod(self.inverse_lift(x), 1.0)

    def inverse_displacement(self) -> np.ndarray:
        return self.inverse_lift(self.nodes) - self.nodes


@dataclass(frozen=True)
class ConjugacyState:
    hs: tuple
    target: CircleMap
    nds: NdsSequence

    @property
    def horizon(self) -> int:
        return len(self.hs) - 1


def _check_degrees(nds: NdsSequence, f: CircleMap, T: int):
    for k in list(range(T + 1)) + [len(nds.prefix)]:
        if nds.map_at(k).degree != f.degree:
            raise DegreeMismatch(
                f"map {k} has degree {nds.map_at(k).degree}, target has degree {f.degree}"
            )


def identity_state(nds: NdsSequence, f: CircleMap, T: int, N: int = 8192) -> ConjugacyState:
    return ConjugacyState(tuple(LiftHomeo.identity(N) for _ in range(T + 1)), f, nds)


def sigma_step(state: ConjugacyState) -> ConjugacyState:
    """h_k <- F_k^{-1} o h_{k+1} o F for k < T; h_T stays the identity."""
    hs = state.hs
    x = hs[0].nodes
    v = state.target.lift(x)
    new = []
    for k in range(state.horizon):
        y = state.nds.map_at(k).lift_inverse(hs[k + 1].lift(v))
        h = LiftHomeo(y - x)
        if not h.is_monotone():
            raise NonMonotone(f"updated h_{k} is not increasing on the grid")
        new.append(h)
    new.append(hs[-1])
    return ConjugacyState(tuple(new), state.target, state.nds)


def state_distance(a: ConjugacyState, b: ConjugacyState) -> float:
    """max over k of sup|h - h'| + sup|h^{-1} - h'^{-1}| on the grid."""
    return max(
        float(np.max(np.abs(g.p - h.p)))
        + float(np.max(np.abs(g.inverse_displacement() - h.inverse_displacement())))
        for g, h in zip(a.hs, b.hs)
    )


def iteration_budget(tol: float, lam: float) -> int:
    return math.ceil(math.log(tol) / math.log(1.0 / lam)) + 5


def _samples(samples, seed=0) -> np.ndarray:
    if np.ndim(samples) == 0:
        return np.random.default_rng(seed).random(int(samples))
    return np.asarray(samples, dtype=float)


def conjugacy_residual(pis, nds: NdsSequence, f: CircleMap, samples=4096, seed: int = 0) -> float:
    """max over samples x and k < T of d(pi_{k+1}(f x), f_k(pi_k x))."""
    x = _samples(samples, seed)
    fx = f(x)
    worst = 0.0
    for k in range(len(pis) - 1):
        gap = circle_dist(pis[k + 1](fx), nds.map_at(k)(pis[k](x)))
        worst = max(worst, float(np.max(gap)))
    return worst


def solve_equiconjugacy(nds: NdsSequence, f: CircleMap, T: int, tol: float = 1e-10,
                        max_iter: int | None = None, grid: int = 8192,
                        init: ConjugacyState | None = None, samples=4096, seed: int = 0):
    """Iterate sigma from the identity until successive states are tol-close.

    Returns (pis, report) where pis are the lifts h_0..h_T (call them to get
    the circle maps) and report holds iterations, residual and the
    successive-distance trace.
    """
    if T < 1:
        raise PreconditionError("horizon T must be at least 1")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    _check_degrees(nds, f, T)
    if nds.tail != f:
        raise PreconditionError("the sequence tail must equal the target map")
    if not (f.expanding and nds.is_expanding):
        raise PreconditionError("maps must be expanding")
    budget = iteration_budget(tol, nds.uniform_lambda) if max_iter is None else int(max_iter)
    state = identity_state(nds, f, T, grid) if init is None else init
    trace = []
    converged = False
    for _ in range(budget):
        nxt = sigma_step(state)
        trace.append(state_distance(state, nxt))
        state = nxt
        if trace[-1] < tol:
            converged = True
            break
    pis = list(state.hs)
    report = {
        "iterations": len(trace),
        "budget": budget,
        "converged": converged,
        "contraction_trace": trace,
        "residual": conjugacy_residual(pis, nds, f, samples, seed),
        "node_residual": conjugacy_residual(pis, nds, f, pis[0].nodes),
        "grid": grid,
    }
    if not converged:
        report["pis"] = pis
        raise NoConvergence(f"no convergence to {tol:g} within {budget} iterations", report)
    return pis, report


def oscillation_table(pis, deltas) -> list[list[float]]:
    """osc[k][j] = max over grid x, 0 <= t <= deltas[j] of |pi_k(x+t) - pi_k(x)| (lift values)."""
    table = []
    for h in pis:
        N = h.N
        row = []
        for delta in deltas:
            best = 0.0
            for s in range(1, int(delta * N) + 1):
                best = max(best, float(np.max(np.abs(s / N + np.roll(h.p, -s) - h.p))))
            row.append(best)
        table.append(row)
    return table


def oscillation_bound(pis, nds: NdsSequence, f: CircleMap, delta: float, depth: int = 8) -> float:
    """min over m <= depth of 2 c lam^{-m} + lam^{-m} Lip(F^m) delta, with c = max sup|p_k|."""
    c = max(float(np.max(np.abs(h.p))) for h in pis)
    lam = nds.uniform_lambda
    lip = f.slope_bound
    return min(2 * c * lam ** -m + lam ** -m * lip ** m * delta for m in range(depth + 1))
