"""Transfer (Perron-Frobenius) operator on grid densities and loss-of-memory experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KappaTooLarge, NonConvergence, NonPositiveDensity, PreconditionError
from .systems import NdsSequence, circle_dist, preimage_table


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density sampled at the nodes i/N and linearly interpolated between them.

    The integral of the interpolant over the circle equals the mean of the
    node values, so normalisation divides by that mean.
    ``mass_defect`` records how far the integral was from 1 before the last
    renormalisation (zero for densities built directly).
    """

    values: np.ndarray
    mass_defect: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        N = v.shape[0]
        if v.ndim != 1 or N < 128 or N & (N - 1):
            raise PreconditionError(f"grid size must be a power of two >= 128, got {N}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise PreconditionError("density values must be finite and nonnegative")
        if abs(v.mean() - 1.0) > 1e-12:
            raise PreconditionError(f"density integrates to {v.mean():.15g}, not 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N) / self.N

    @classmethod
    def from_values(cls, values, mass_defect: float = 0.0) -> "GridDensity":
        v = np.asarray(values, dtype=float)
        return cls(v / v.mean(), mass_defect)

    @classmethod
    def from_function(cls, func, N: int) -> "GridDensity":
        return cls.from_values(func(np.arange(N) / N))

    @classmethod
    def uniform(cls, N: int) -> "GridDensity":
        return cls(np.ones(N))

    def __call__(self, x):
        return interpolate(self.values, x)

    def integral(self) -> float:
        return float(self.values.mean())

    def cumulative(self, t):
        """Integral of the interpolant over [0, t] for t in [0, 1]."""
        t = np.asarray(t, dtype=float)
        v = self.values
        N = self.N
        h = 1.0 / N
        nxt = np.roll(v, -1)
        csum = np.concatenate(([0.0], np.cumsum(0.5 * h * (v + nxt))))
        pos = t * N
        j = np.minimum(np.floor(pos).astype(np.int64), N - 1)
        s = pos - j
        return csum[j] + h * (v[j] * s + 0.5 * (nxt[j] - v[j]) * s * s)

    def arc_mass(self, a, b):
        """Mass of the arc running counter-clockwise from a to b (both in [0, 1))."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        ca, cb = self.cumulative(a), self.cumulative(b)
        return np.where(b >= a, cb - ca, cb - ca + self.cumulative(1.0))


def interpolate(values: np.ndarray, x):
    """Periodic linear interpolation of node values at i/N."""
    N = values.shape[0]
    t = np.asarray(x, dtype=float) * N
    j = np.floor(t)
    frac = t - j
    j = j.astype(np.int64) % N
    j1 = (j + 1) % N
    return values[j] + frac * (values[j1] - values[j])


def perron_frobenius(m, phi: GridDensity, tol: float = 1e-12) -> GridDensity:
    """Sum of phi(y)/F'(y) over the preimages y of each node, renormalised.

    The pre-normalisation integral minus one is stored as ``mass_defect``.
    """
    x = phi.nodes
    ys = preimage_table(m, x)
    residual = circle_dist(m(ys), x[:, None])
    if not np.all(residual <= tol):
        raise NonConvergence(
            f"branch solve residual {float(residual.max()):.3e} exceeds tol {tol:.3e}"
        )
    raw = np.sum(phi(ys) / m.derivative(ys), axis=1)
    mass = raw.mean()
    return GridDensity(raw / mass, float(mass - 1.0))


def evolve(seq: NdsSequence, phi: GridDensity, n: int, tol: float = 1e-12) -> list[GridDensity]:
    """[phi_0, ..., phi_n] with phi_{k+1} the transfer of phi_k by f_k."""
    out = [phi]
    for k in range(n):
        out.append(perron_frobenius(seq.map_at(k), out[-1], tol))
    return out


def lipschitz_ratio_constant(phi: GridDensity, eps: float) -> float:
    """max |phi(x)/phi(y) - 1| / d(x, y) over node pairs with 0 < d(x, y) < eps."""
    v = phi.values
    if np.any(v <= 0):
        raise NonPositiveDensity("density must be strictly positive")
    N = phi.N
    if not eps > 1.0 / N:
        raise PreconditionError("eps must exceed the grid spacing")
    best = 0.0
    max_shift = min(int(np.ceil(eps * N)) - 1, N // 2)
    for k in range(1, max_shift + 1):
        dist = k / N
        if dist >= eps:
            break
        other = np.roll(v, -k)
        ratio = np.maximum(np.abs(v / other - 1.0), np.abs(other / v - 1.0))
        best = max(best, float(ratio.max()) / dist)
    return best


def renormalize(phi: GridDensity, kappa: float) -> GridDensity:
    """(phi - kappa/2) / (1 - kappa/2); keeps unit mass and positivity for kappa < 2 min phi."""
    lowest = float(phi.values.min())
    if kappa >= 2.0 * lowest:
        raise KappaTooLarge(f"kappa {kappa} must be below 2 * min(phi) = {2 * lowest}")
    if kappa < 0:
        raise PreconditionError("kappa must be nonnegative")
    if kappa == 0:
        return phi
    return GridDensity((phi.values - 0.5 * kappa) / (1.0 - 0.5 * kappa))


def l1_distance(phi: GridDensity, psi: GridDensity) -> float:
    return float(np.mean(np.abs(phi.values - psi.values)))


def fit_rate(trace, floor: float = 1e-12, noise=None) -> dict:
    """OLS of log distance on n over the informative window.

    The window is the leading run of entries above ``floor`` and, when a
    per-entry ``noise`` estimate is given, above ten times that noise.
    """
    ns, ds = [], []
    for k, (n, d) in enumerate(trace):
        level = floor if noise is None else max(floor, 10.0 * noise[k])
        if not d > level:
            break
        ns.append(n)
        ds.append(d)
    ns = np.array(ns, dtype=float)
    ds = np.array(ds, dtype=float)
    window = [int(ns[0]), int(ns[-1])] if ns.size else []
    if ns.size < 4:
        return {"rate": None, "r2": None, "slope": None, "window": window, "degenerate": True}
    y = np.log(ds)
    slope, intercept = np.polyfit(ns, y, 1)
    resid = y - (slope * ns + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"rate": float(np.exp(slope)), "r2": r2, "slope": float(slope),
            "window": window, "degenerate": False}


def _coarsen(phi: GridDensity) -> GridDensity:
    return GridDensity.from_values(phi.values[::2])


def loss_of_memory(seq: NdsSequence, phi: GridDensity, psi: GridDensity, n_max: int,
                   floor: float = 1e-12, tol: float = 1e-12, richardson: bool = True,
                   lipschitz_eps: float = 0.1) -> dict:
    """Evolve two densities and fit the exponential decay of their L1 distance.

    With ``richardson`` the experiment is repeated on the half-resolution
    grid; |d_n(N) - d_n(N/2)| / 3 estimates the quadrature error of d_n
    (second-order scheme), and the fit stops where the trace sinks into it.
    ``lipschitz_eps`` is the locality radius of the Lipschitz-ratio diagnostic.
    """
    if n_max < 8:
        raise PreconditionError("n_max must be at least 8")
    if phi.N != psi.N:
        raise PreconditionError("densities must share a grid")
    a = evolve(seq, phi, n_max, tol)
    b = evolve(seq, psi, n_max, tol)
    trace = [(n, l1_distance(p, q)) for n, (p, q) in enumerate(zip(a, b))]
    noise = None
    if richardson and phi.N >= 256:
        ca = evolve(seq, _coarsen(phi), n_max, tol)
        cb = evolve(seq, _coarsen(psi), n_max, tol)
        noise = [abs(d - l1_distance(p, q)) / 3.0 for (n, d), p, q in zip(trace, ca, cb)]
    report = fit_rate(trace, floor, noise)
    report["l1_trace"] = trace
    report["noise_trace"] = noise
    lowest = min(float(d.values.min()) for d in a + b)
    report["kappa"] = 0.9 * lowest
    report["lipschitz_trace"] = [
        (n, lipschitz_ratio_constant(p, lipschitz_eps), lipschitz_ratio_constant(q, lipschitz_eps))
        for n, (p, q) in enumerate(zip(a, b))
    ] if lowest > 0 else []
    report["max_mass_defect"] = max(abs(d.mass_defect) for d in a + b)
    return report


def mass_defect_study(m, func, sizes=(512, 1024, 2048, 4096)) -> dict:
    """Pre-normalisation mass defect of one transfer step across grid sizes."""
    defects = [abs(perron_frobenius(m, GridDensity.from_function(func, N)).mass_defect) for N in sizes]
    slope = float(np.polyfit(np.log(sizes), np.log(defects), 1)[0])
    return {"sizes": list(sizes), "defects": defects, "slope": slope}


def duality_gap(m, phi: GridDensity, g) -> float:
    """|int g * P(phi) - int (g o f) * phi| with node-mean quadrature."""
    x = phi.nodes
    lhs = float(np.mean(g(x) * perron_frobenius(m, phi).values))
    rhs = float(np.mean(g(m(x)) * phi.values))
    return abs(lhs - rhs)
