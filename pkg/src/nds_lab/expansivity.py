"""Expansivity on finite nets: s.u.e. horizons, Frink metrics and adapted metrics.

Everything here is a certificate on a finite net over a finite horizon.  A
positive answer holds for the net only; a negative one comes with an
explicit witness pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .entropy import IntervalPartition, PartitionSequence, _limsup, metric_entropy_estimate
from .errors import DepthInsufficient, HypothesisViolated, PreconditionError
from .systems import CircleMap, ComposedMap, NdsSequence, circle_dist, orbit
from .transfer import GridDensity


@dataclass(frozen=True)
class Failure:
    """No horizon up to ``N_max`` works; (x, y) stays delta-close at ``base_time``."""

    base_time: int
    x: float
    y: float
    distance: float
    bowen_distance: float
    N_max: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def uniform_net(size: int) -> np.ndarray:
    return np.arange(size) / size


def _pair_dist(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return circle_dist(p[:, None], p[None, :])


def bowen_matrices(seq: NdsSequence, n: int, net, depth: int):
    """Yield D_k = d_{n,k} on net x net for k = 0..depth."""
    orb = orbit(seq, n, depth, np.asarray(net, dtype=float))
    D = np.zeros((orb.shape[1], orb.shape[1]))
    for k in range(depth + 1):
        D = np.maximum(D, _pair_dist(orb[k]))
        yield k, D


def sue_horizon(seq: NdsSequence, delta: float, eps: float, N_max: int,
                time_window: int = 0, net_size: int = 256):
    """Smallest N <= N_max with d_{i,N}(x,y) < delta => d(x,y) < eps on the net
    for every base time i <= time_window, or a Failure witness."""
    if not 0 < eps < delta <= 0.5:
        raise PreconditionError("need 0 < eps < delta <= 1/2")
    if N_max < 0 or time_window < 0:
        raise PreconditionError("N_max and time_window must be nonnegative")
    net = uniform_net(net_size)
    far = _pair_dist(net) >= eps
    horizon = 0
    for i in range(time_window + 1):
        found = None
        for N, D in bowen_matrices(seq, i, net, N_max):
            bad = far & (D < delta)
            if not bad.any():
                found = N
                break
        if found is None:
            a, b = np.argwhere(bad)[0]
            return Failure(i, float(net[a]), float(net[b]), float(circle_dist(net[a], net[b])),
                           float(D[a, b]), N_max)
        horizon = max(horizon, found)
    return horizon


def time_expansivity_witness(seq: NdsSequence, delta: float, n_max: int):
    """Search for a pair (0, y) whose time-0 orbits stay delta-close and then collide.

    y is the smallest positive preimage of 0 under f_0^n, so f_0^n y = f_0^n 0.
    Returns the first n <= n_max that works, or None.
    """
    for n in range(1, n_max + 1):
        y = float(ComposedMap(tuple(seq.window(0, n))).lift_inverse(1.0))
        orb = orbit(seq, 0, n, np.array([0.0, y]))
        dists = circle_dist(orb[:, 0], orb[:, 1])
        if dists[n] < 1e-12 and dists.max() < delta - 1e-12:
            return {"n": n, "x": 0.0, "y": y, "distance": y,
                    "max_orbit_distance": float(dists.max()), "collision_time": n}
    return None


def alternating_blocks(f: CircleMap, blocks: int) -> NdsSequence:
    """id x1, f x1, id x2, f x2, ... up to block length ``blocks``, then f forever."""
    ident = CircleMap("identity", 1, 0.0)
    prefix = []
    for L in range(1, blocks + 1):
        prefix += [ident] * L + [f] * L
    return NdsSequence(tuple(prefix), f)


def identity_block_start(L: int) -> int:
    """Index where the identity block of length L begins in ``alternating_blocks``."""
    return L * (L - 1)


def growing_degree(terms: int) -> NdsSequence:
    """Linear maps of degree n + 2 at time n (the tail keeps the last degree)."""
    maps = tuple(CircleMap("linear", n + 2, 0.0) for n in range(terms + 1))
    return NdsSequence(maps[:-1], maps[-1])


def build_neighborhoods(seq: NdsSequence, n: int, delta: float, depth: int, net,
                        require_separation: bool = True) -> list[np.ndarray]:
    """V_0 = all pairs and V_k = {d_{n,k} < delta} for 1 <= k <= depth."""
    net = np.asarray(net, dtype=float)
    if np.unique(net).size != net.size:
        raise PreconditionError("net points must be distinct")
    m = net.size
    rel = [np.ones((m, m), dtype=bool)]
    for k, D in bowen_matrices(seq, n, net, depth):
        if k:
            rel.append(D < delta)
    for k in range(1, len(rel)):
        assert not np.any(rel[k] & ~rel[k - 1])
    if require_separation and depth and np.any(rel[-1] & ~np.eye(m, dtype=bool)):
        raise DepthInsufficient(f"level {depth} still relates distinct net points")
    return rel


def minimal_separating_depth(seq: NdsSequence, n: int, delta: float, net, max_depth: int = 64) -> int:
    net = np.asarray(net, dtype=float)
    off = ~np.eye(net.size, dtype=bool)
    for k, D in bowen_matrices(seq, n, net, max_depth):
        if k and not np.any((D < delta) & off):
            return k
    raise DepthInsufficient(f"no separating depth up to {max_depth}")


def _compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a.astype(np.int32) @ b.astype(np.int32)) > 0


def _chain(U: np.ndarray, x: int, z: int):
    for a in np.flatnonzero(U[x]):
        for b in np.flatnonzero(U[a]):
            if U[b, z]:
                return [int(x), int(a), int(b), int(z)]
    return None


def triple_violations(U: np.ndarray, outer: np.ndarray) -> np.ndarray:
    """Pairs in U o U o U that are missing from ``outer``."""
    return np.argwhere(_compose(_compose(U, U), U) & ~outer)


def check_triple(U: np.ndarray, outer: np.ndarray, level: int = 0):
    bad = triple_violations(U, outer)
    if bad.size:
        x, z = bad[0]
        raise HypothesisViolated(
            f"triple composition at level {level} leaves the outer relation",
            {"level": level, "chain": _chain(U, x, z)},
        )


def frink_levels(seq: NdsSequence, n: int, delta: float, K: int, N: int, net) -> list[np.ndarray]:
    """U_0 = all pairs and U_k = V_{(k-1)N} for 1 <= k <= K."""
    V = build_neighborhoods(seq, n, delta, (K - 1) * N, net, require_separation=False)
    net = np.asarray(net, dtype=float)
    levels = [V[0], _pair_dist(net) < delta] + [V[(k - 1) * N] for k in range(2, K + 1)]
    if np.any(levels[-1] & ~np.eye(net.size, dtype=bool)):
        raise DepthInsufficient(f"level {K} still relates distinct net points")
    return levels


def _deepest_level(U: list[np.ndarray]) -> np.ndarray:
    depth = np.zeros(U[0].shape, dtype=np.int64)
    for k in range(1, len(U)):
        depth[U[k]] = k
    return depth


def frink_metric(U: list[np.ndarray]) -> np.ndarray:
    """Shortest-path metric for edge weights 2^-(deepest level containing the pair)."""
    K = len(U) - 1
    m = U[0].shape[0]
    eye = np.eye(m, dtype=bool)
    for k, rel in enumerate(U):
        if not np.array_equal(rel, rel.T):
            raise HypothesisViolated(f"level {k} is not symmetric", {"level": k})
        if not rel[eye].all():
            raise HypothesisViolated(f"level {k} misses the diagonal", {"level": k})
        if k and np.any(rel & ~U[k - 1]):
            raise HypothesisViolated(f"level {k} is not nested in level {k - 1}", {"level": k})
    if not U[0].all():
        raise HypothesisViolated("level 0 must contain every pair", {"level": 0})
    if np.any(U[K] & ~eye):
        raise HypothesisViolated("deepest level must be the diagonal", {"level": K})
    for k in range(1, K + 1):
        check_triple(U[k], U[k - 1], k)
    weights = np.exp2(-_deepest_level(U).astype(float))
    weights[eye] = 0.0
    rho = shortest_path(weights, method="FW", directed=False)
    sandwich = frink_sandwich(U, rho)
    if sandwich["violations"]:
        raise HypothesisViolated("sandwich inclusion failed", sandwich["violations"][0])
    return rho


def frink_sandwich(U: list[np.ndarray], rho: np.ndarray) -> dict:
    """U_k => rho <= 2^-k and rho < 2^-k => U_{k-1}, for 1 <= k <= K."""
    violations = []
    for k in range(1, len(U)):
        left = np.argwhere(U[k] & (rho > 2.0 ** -k))
        right = np.argwhere((rho < 2.0 ** -k) & ~U[k - 1])
        for side, pairs in (("inner", left), ("outer", right)):
            if pairs.size:
                violations.append({"level": k, "side": side, "pair": [int(v) for v in pairs[0]]})
    return {"levels": len(U) - 1, "violations": violations}


def metric_violations(rho: np.ndarray, tol: float = 1e-12) -> int:
    """Symmetry, zero diagonal, positivity and exhaustive triangle-inequality failures."""
    count = int(np.count_nonzero(np.abs(rho - rho.T) > tol))
    count += int(np.count_nonzero(np.abs(np.diag(rho)) > tol))
    off = ~np.eye(rho.shape[0], dtype=bool)
    count += int(np.count_nonzero(rho[off] <= 0))
    for j in range(rho.shape[0]):
        count += int(np.count_nonzero(rho > rho[:, j:j + 1] + rho[j:j + 1, :] + tol))
    return count


def pushed_nets(seq: NdsSequence, n: int, net, steps: int) -> list[np.ndarray]:
    """net_{n+i+1} = f_{n+i}(net_{n+i}) with duplicates merged (images are exact net points)."""
    nets = [np.unique(np.asarray(net, dtype=float))]
    for i in range(steps):
        img = np.round(np.mod(seq.map_at(n + i)(nets[-1]), 1.0), 13)
        nets.append(np.unique(np.where(img >= 1.0, 0.0, img)))
    return nets


def project(net: np.ndarray, pts) -> tuple[np.ndarray, float]:
    """Indices of the nearest net points (circle distance) and the largest projection distance."""
    pts = np.mod(np.asarray(pts, dtype=float), 1.0)
    right = np.searchsorted(net, pts) % net.size
    left = (right - 1) % net.size
    dl = circle_dist(net[left], pts)
    dr = circle_dist(net[right], pts)
    idx = np.where(dr <= dl, right, left)
    gap = np.minimum(dl, dr)
    return idx, float(gap.max()) if gap.size else 0.0


@dataclass
class FrinkNet:
    points: np.ndarray
    time: int
    depth: int
    levels: list
    rho: np.ndarray


@dataclass
class AdaptedFamily:
    """Frink metrics on pushed-forward nets and the adapted metrics built from them."""

    seq: NdsSequence
    n: int
    N: int
    delta: float
    nets: list
    frink: list
    pushed: bool
    slack: float = 0.0

    @property
    def mu(self) -> float:
        return 2.0 ** (1.0 / (3 * self.N))


def build_frink_family(seq: NdsSequence, n: int, net, delta: float, K: int, N: int,
                       extra: int = 1, pushed: bool = False) -> AdaptedFamily:
    """Frink metrics rho_{n+i} for i <= 3N - 1 + extra.

    By default every time shares ``net`` and off-net images are projected to
    the nearest net point; the largest projection distance met while building
    the adapted metrics is kept as ``slack``.  With ``pushed`` the net at
    time n+i+1 is the image of the net at time n+i, so no projection occurs.
    """
    if N < 1:
        raise PreconditionError("N must be at least 1")
    steps = 3 * N - 1 + extra
    if pushed:
        nets = pushed_nets(seq, n, net, steps)
    else:
        nets = [np.unique(np.asarray(net, dtype=float))] * (steps + 1)
    frink = []
    for i, pts in enumerate(nets):
        U = frink_levels(seq, n + i, delta, K, N, pts)
        frink.append(FrinkNet(pts, n + i, K, U, frink_metric(U)))
    return AdaptedFamily(seq, n, N, delta, nets, frink, pushed)


def adapted_metric(family: AdaptedFamily, start: int = 0) -> np.ndarray:
    """rho'_{n+start} = sum over i < 3N of mu^-i rho_{n+start+i}(f^i x, f^i y)."""
    N = family.N
    if 3 * N < 3:
        raise PreconditionError("need at least three terms")
    if start + 3 * N > len(family.frink):
        raise PreconditionError("family too short for this start time")
    seq = family.seq
    base = family.nets[start]
    mu = family.mu
    out = np.zeros((base.size, base.size))
    pts = base
    for i in range(3 * N):
        fr = family.frink[start + i]
        idx, gap = project(fr.points, pts)
        family.slack = max(family.slack, gap)
        out += mu ** -i * fr.rho[np.ix_(idx, idx)]
        pts = np.mod(seq.map_at(family.n + start + i)(pts), 1.0)
    return out


def expansion_check(family: AdaptedFamily, threshold: float = 1.0 / 32.0) -> dict:
    """Over net pairs with 0 < rho'_n < threshold, compare rho'_{n+1}(f x, f y) with mu rho'_n(x, y)."""
    r0 = adapted_metric(family, 0)
    r1 = adapted_metric(family, 1)
    base = family.nets[0]
    idx, gap = project(family.nets[1], family.seq.map_at(family.n)(base))
    family.slack = max(family.slack, gap)
    image = r1[np.ix_(idx, idx)]
    mask = (r0 > 0) & (r0 < threshold)
    mu = family.mu
    lhs = image[mask]
    rhs = r0[mask]
    slack = 2.0 * family.slack
    bad = lhs < mu * rhs - slack - 1e-12
    ratio = lhs / rhs if rhs.size else np.empty(0)
    return {
        "threshold": threshold,
        "mu": mu,
        "pairs_checked": int(mask.sum()),
        "violations": int(bad.sum()),
        "min_ratio": float(ratio.min()) if ratio.size else math.inf,
        "slack": slack,
    }


def uniform_total_boundedness(eps: float, times: int = 1) -> dict:
    """Arcs of radius eps needed to cover the circle, per time (stationary spaces)."""
    if not 0 < eps:
        raise PreconditionError("eps must be positive")
    count = math.ceil(1.0 / (2.0 * eps) - 1e-12)
    return {"eps": eps, "counts": [count] * times}


def generator_entropy(seq: NdsSequence, delta: float, n_max: int, N: int = 4096) -> float:
    """Metric entropy of the partition into arcs of length at most delta, uniform start density.

    Rates are (H_n - H_1)/(n - 1): removing the entropy of the single
    partition drops the log(cells)/n offset, as the count rates do.
    """
    if n_max < 3:
        raise PreconditionError("n_max must be at least 3")
    part = IntervalPartition.equal(math.ceil(1.0 / delta - 1e-12))
    est = metric_entropy_estimate(seq, PartitionSequence.constant(part), GridDensity.uniform(N), n_max)
    H = {n: v * n for n, v in est.trace}
    return _limsup([(n, (H[n] - H[1]) / (n - 1)) for n in range(2, n_max + 1)], 1 / 3).value
