"""Expanding circle maps given by lifts, and sequences of them.

The circle is [0, 1) with circumference 1.  Every map in the family is the
projection of the lift F(x) = d*x + a*sin(2*pi*x)/(2*pi), so F(0) = 0 and
F(x + 1) = F(x) + d.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ConfigError, NonConvergence, PreconditionError

TWO_PI = 2.0 * np.pi
FAMILIES = ("linear", "perturbed-trig", "identity")

# bisection to width 1e-14 on [0, 1] needs 47 halvings
_BISECT_STEPS = 47
_NEWTON_STEPS = 2


def circle_dist(a, b):
    """Arc distance on the unit-circumference circle (values in [0, 1/2])."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), 1.0)
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class CircleMap:
    """One map x -> F(x) mod 1 of the lift family.

    ``lam`` is a certified lower bound of F' and ``gamma`` an upper bound
    of |F'| and |F''|.  Both default to the tightest closed-form values.
    The ``identity`` family is the degree-one, non-expanding map used in
    counterexamples; it is accepted but flagged by ``expanding``.
    """

    family: str = "linear"
    degree: int = 2
    amplitude: float = 0.0
    lam: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown map family {self.family!r}; expected one of {FAMILIES}")
        if int(self.degree) != self.degree:
            raise ConfigError(f"degree must be an integer, got {self.degree!r}")
        d = int(self.degree)
        a = float(self.amplitude)
        object.__setattr__(self, "degree", d)
        object.__setattr__(self, "amplitude", a)
        if self.family == "identity":
            if d != 1 or a != 0.0:
                raise ConfigError("identity map requires degree 1 and amplitude 0")
            object.__setattr__(self, "lam", 1.0)
            object.__setattr__(self, "gamma", 1.0)
            return
        if d < 2:
            raise ConfigError(f"invariant violated: degree must be >= 2 for an expanding map, got {d}")
        if self.family == "linear" and a != 0.0:
            raise ConfigError("linear family requires amplitude 0")
        lam = d - abs(a) if self.lam is None else float(self.lam)
        if not lam > 1.0:
            raise ConfigError(f"invariant violated: lambda must exceed 1, got {lam}")
        if d - abs(a) < lam:
            raise ConfigError(
                f"invariant violated: d - |a| = {d - abs(a)} must be >= lambda = {lam}"
            )
        floor_gamma = max(d + abs(a), TWO_PI * abs(a))
        gamma = floor_gamma if self.gamma is None else float(self.gamma)
        if gamma < floor_gamma or gamma < lam:
            raise ConfigError(
                f"invariant violated: gamma = {gamma} must be >= max(d+|a|, 2*pi*|a|, lambda)"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)

    @property
    def parts(self) -> tuple["CircleMap", ...]:
        return (self,)

    @property
    def expanding(self) -> bool:
        return self.lam > 1.0

    @property
    def slope_bound(self) -> float:
        return self.degree + abs(self.amplitude)

    def lift(self, x):
        x = np.asarray(x, dtype=float)
        if self.amplitude == 0.0:
            return self.degree * x
        return self.degree * x + self.amplitude * np.sin(TWO_PI * x) / TWO_PI

    def __call__(self, x):
        return np.mod(self.lift(x), 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.amplitude == 0.0:
            return np.full(x.shape, float(self.degree)) if x.shape else float(self.degree)
        return self.degree + self.amplitude * np.cos(TWO_PI * x)

    def second_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -TWO_PI * self.amplitude * np.sin(TWO_PI * x)

    def lift_inverse(self, v):
        """Solve F(y) = v on the real line (F is strictly increasing)."""
        v = np.asarray(v, dtype=float)
        if self.amplitude == 0.0:
            return v / self.degree
        d = float(self.degree)
        q = np.floor(v / d)
        s = v - q * d
        return _solve_unit_branch(self, s) + q


def _solve_unit_branch(m: CircleMap, s):
    """Root of F(y) = s with y in [0, 1] for s in [0, d]: bisection then Newton."""
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        above = m.lift(mid) > s
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    y = 0.5 * (lo + hi)
    for _ in range(_NEWTON_STEPS):
        y = y - (m.lift(y) - s) / m.derivative(y)
    return y


@dataclass(frozen=True)
class ComposedMap:
    """Composition maps[-1] o ... o maps[0], evaluated through its parts."""

    maps: tuple

    def __post_init__(self):
        flat: list[CircleMap] = []
        for m in self.maps:
            flat.extend(m.parts)
        if not flat:
            raise ConfigError("a composed map needs at least one factor")
        object.__setattr__(self, "maps", tuple(flat))

    family = "composite"

    @property
    def parts(self) -> tuple[CircleMap, ...]:
        return self.maps

    @property
    def degree(self) -> int:
        return int(np.prod([m.degree for m in self.maps]))

    @property
    def lam(self) -> float:
        return float(np.prod([m.lam for m in self.maps]))

    @property
    def gamma(self) -> float:
        # bounds the first derivative of the composite; used for injectivity radii
        return float(np.prod([m.gamma for m in self.maps]))

    @property
    def expanding(self) -> bool:
        return self.lam > 1.0

    @property
    def slope_bound(self) -> float:
        return float(np.prod([m.slope_bound for m in self.maps]))

    def lift(self, x):
        return reduce(lambda acc, m: m.lift(acc), self.maps, np.asarray(x, dtype=float))

    def __call__(self, x):
        return np.mod(self.lift(x), 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        total = np.ones(x.shape)
        for m in self.maps:
            total = total * m.derivative(x)
            x = m.lift(x)
        return total if total.shape else float(total)

    def lift_inverse(self, v):
        return reduce(lambda acc, m: m.lift_inverse(acc), reversed(self.maps), np.asarray(v, dtype=float))


def eval_map(m, x):
    """F(x) mod 1."""
    return m(x)


def derivative(m, x):
    return m.derivative(x)


def preimage_table(m, xs) -> np.ndarray:
    """All preimages of each point of ``xs``; row i holds the sorted preimages of xs[i]."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    cur = xs[:, None]
    for part in reversed(m.parts):
        j = np.arange(part.degree, dtype=float)
        cur = part.lift_inverse(cur[:, :, None] + j[None, None, :]).reshape(len(xs), -1)
    return np.sort(np.mod(cur, 1.0), axis=1)


def branch_preimages(m, x: float, tol: float = 1e-12) -> list[float]:
    """The ``degree`` preimages of x, sorted, each verified to round-trip within tol."""
    if not tol > 0:
        raise PreconditionError(f"tol must be positive, got {tol}")
    ys = preimage_table(m, [x])[0]
    residual = circle_dist(m(ys), x)
    if not np.all(residual <= tol):
        raise NonConvergence(
            f"branch solve residual {float(np.max(residual)):.3e} exceeds tol {tol:.3e}"
        )
    return [float(y) for y in ys]


@dataclass(frozen=True)
class NdsSequence:
    """Maps f_0, f_1, ... given by a finite prefix and a repeated tail map."""

    prefix: tuple = ()
    tail: CircleMap = field(default_factory=CircleMap)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        degrees_ok = all(m.degree >= 1 for m in self.members)
        if not degrees_ok:
            raise ConfigError("every map needs a positive degree")

    @property
    def members(self) -> tuple:
        return self.prefix + (self.tail,)

    @property
    def uniform_lambda(self) -> float:
        return min(m.lam for m in self.members)

    @property
    def uniform_gamma(self) -> float:
        return max(m.gamma for m in self.members)

    @property
    def is_expanding(self) -> bool:
        return self.uniform_lambda > 1.0

    def map_at(self, n: int):
        if n < 0:
            raise PreconditionError(f"index must be nonnegative, got {n}")
        return self.prefix[n] if n < len(self.prefix) else self.tail

    def window(self, i: int, n: int) -> list:
        return [self.map_at(i + j) for j in range(n)]

    @classmethod
    def constant(cls, m) -> "NdsSequence":
        return cls((), m)

    @classmethod
    def periodic(cls, cycle: Sequence, repeats: int, tail=None) -> "NdsSequence":
        cycle = tuple(cycle)
        return cls(cycle * repeats, cycle[0] if tail is None else tail)


def primitive_steps(seq: NdsSequence, i: int, n: int):
    """Flatten f_i, ..., f_{i+n-1} into primitive (degree, amplitude) arrays.

    ``observe[m]`` is True when the primitive step m completes one map of the
    sequence, so that composite members only contribute their endpoints to
    Bowen metrics.
    """
    degs, amps, obs = [], [], []
    for m in seq.window(i, n):
        parts = m.parts
        for j, p in enumerate(parts):
            degs.append(float(p.degree))
            amps.append(p.amplitude)
            obs.append(j == len(parts) - 1)
    return (np.array(degs, dtype=float), np.array(amps, dtype=float), np.array(obs, dtype=bool))


def compose_eval(seq: NdsSequence, k: int, n: int, x):
    """f_k^n(x) = f_{k+n-1} o ... o f_k (x); n = 0 returns x."""
    if k < 0 or n < 0:
        raise PreconditionError("k and n must be nonnegative")
    y = np.asarray(x, dtype=float)
    for m in seq.window(k, n):
        y = m(y)
    return y if y.shape else float(y)


def orbit(seq: NdsSequence, k: int, n: int, x) -> np.ndarray:
    """Array of shape (n + 1, *x.shape) with f_k^j(x) for j = 0..n."""
    y = np.asarray(x, dtype=float)
    out = [y]
    for m in seq.window(k, n):
        y = m(y)
        out.append(y)
    return np.stack(out)


def log_jacobian_sum(seq: NdsSequence, n: int, x, k: int = 0):
    """Sum of log F_{k+i}'(f_k^i x) over i < n."""
    if n < 0:
        raise PreconditionError("n must be nonnegative")
    y = np.asarray(x, dtype=float)
    total = np.zeros(y.shape)
    for m in seq.window(k, n):
        total = total + np.log(m.derivative(y))
        y = m(y)
    return total if total.shape else float(total)


# short public alias; shadows the builtin only inside this module
eval = eval_map
