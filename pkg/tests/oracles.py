"""Independent reference computations used by the tests.

These are deliberately naive: scalar loops, scipy root finding and dense
brute force.  They share no code with the package beyond plain arithmetic.
"""
import math

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi


def lift(d, a, x):
    return d * x + a * math.sin(TWO_PI * x) / TWO_PI


def deriv(d, a, x):
    return d + a * math.cos(TWO_PI * x)


def step(d, a, x):
    return lift(d, a, x) % 1.0


def arc(x, y):
    t = abs(x - y) % 1.0
    return min(t, 1.0 - t)


def orbit(maps, x, n):
    """maps: list of (d, a); returns [x, f_0 x, ..., f_0^n x]."""
    out = [x]
    for k in range(n):
        d, a = maps[k] if k < len(maps) else maps[-1]
        x = step(d, a, x)
        out.append(x)
    return out


def bowen(maps, n, x, y):
    return max(arc(u, v) for u, v in zip(orbit(maps, x, n), orbit(maps, y, n)))


def preimages(d, a, x):
    """All y in [0,1) with F(y) = x mod 1, by bracketing each branch."""
    out = []
    for j in range(d):
        target = x + j
        out.append(brentq(lambda y: lift(d, a, y) - target, -1e-9, 1.0 + 1e-9, xtol=1e-15, rtol=1e-15) % 1.0)
    return sorted(out)


def lift_inverse(d, a, v):
    q = math.floor(v / d)
    s = v - q * d
    return q + brentq(lambda y: lift(d, a, y) - s, -1e-9, 1.0 + 1e-9, xtol=1e-15, rtol=1e-15)


def greedy_pack(maps, n, eps, R, order=None):
    chosen = []
    for i in (range(R) if order is None else order):
        x = i / R
        if all(bowen(maps, n, x, c / R) >= eps for c in chosen):
            chosen.append(i)
    return chosen


def is_cover(maps, n, eps, R, centers):
    for j in range(R):
        if not any(bowen(maps, n, j / R, c / R) < eps for c in centers):
            return False
    return True


def transfer_node(d, a, phi, x):
    """sum over preimages y of phi(y) / F'(y) at one point."""
    return sum(phi(y) / deriv(d, a, y) for y in preimages(d, a, x))


def floyd_warshall(w):
    w = np.array(w, dtype=float)
    m = w.shape[0]
    dist = w.copy()
    for k in range(m):
        for i in range(m):
            for j in range(m):
                if dist[i, k] + dist[k, j] < dist[i, j]:
                    dist[i, j] = dist[i, k] + dist[k, j]
    return dist


def log_count_rate(counts):
    """(1/n) log(c_n / c_0) for a list of counts indexed by n."""
    return [math.log(c / counts[0]) / n for n, c in enumerate(counts) if n]
