"""Compiled inner loops for grid packing and covering under Bowen metrics.

Maps enter as flat primitive-step arrays (degree, amplitude, observe); see
``systems.primitive_steps``.  Grid point i sits at i / R.
"""
import math

import numpy as np
from numba import njit

_TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _step(x, d, a):
    if a == 0.0:
        y = d * x
    else:
        y = d * x + a * math.sin(_TWO_PI * x) / _TWO_PI
    return y - math.floor(y)


@njit(cache=True, inline="always")
def _arc(u, v):
    # abs keeps the result symmetric in (u, v) under rounding
    t = abs(u - v)
    t = t - math.floor(t)
    return min(t, 1.0 - t)


@njit(cache=True)
def bowen_separated(x, y, deg, amp, obs, eps):
    """True when max_j arc(f^j x, f^j y) >= eps over the observed times."""
    if _arc(x, y) >= eps:
        return True
    for m in range(deg.shape[0]):
        x = _step(x, deg[m], amp[m])
        y = _step(y, deg[m], amp[m])
        if obs[m] and _arc(x, y) >= eps:
            return True
    return False


@njit(cache=True, inline="always")
def _close(i, j, R, deg, amp, obs, eps):
    return not bowen_separated(i / R, j / R, deg, amp, obs, eps)


@njit(cache=True)
def bowen_distance_grid(x, y, deg, amp, obs):
    best = _arc(x, y)
    for m in range(deg.shape[0]):
        x = _step(x, deg[m], amp[m])
        y = _step(y, deg[m], amp[m])
        if obs[m]:
            best = max(best, _arc(x, y))
    return best


# ---------------------------------------------------------------- Fenwick tree
@njit(cache=True, inline="always")
def _fw_add(tree, i):
    i += 1
    n = tree.shape[0]
    while i < n:
        tree[i] += 1
        i += i & (-i)


@njit(cache=True, inline="always")
def _fw_prefix(tree, i):
    # number of marked indices <= i
    s = 0
    i += 1
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


@njit(cache=True, inline="always")
def _fw_kth(tree, k, log):
    # smallest index with prefix count >= k (k >= 1)
    pos = 0
    step = log
    while step > 0:
        nxt = pos + step
        if nxt < tree.shape[0] and tree[nxt] < k:
            pos = nxt
            k -= tree[nxt]
        step >>= 1
    return pos


# -------------------------------------------------------------------- packing
@njit(cache=True)
def pack(R, order, deg, amp, obs, eps, arc_mode, mask):
    """Greedy first-fit (n, eps)-separated packing of the grid.

    Candidates are visited in ``order`` (index order when ``order`` is
    empty).  In arc mode Bowen balls are arcs whose endpoints move
    monotonically with the centre, so only the two circular neighbours among
    accepted points can conflict.  Otherwise every accepted point within
    arc distance eps is tested.  Returns the packing size; ``mask`` (if not
    empty) receives the chosen points.
    """
    sequential = order.shape[0] == 0
    record = mask.shape[0] > 0
    count = 0
    if arc_mode and sequential:
        first = -1
        last = -1
        for i in range(R):
            ok = True
            if count > 0:
                if _close(i, last, R, deg, amp, obs, eps):
                    ok = False
                elif _close(i, first, R, deg, amp, obs, eps):
                    ok = False
            if ok:
                if count == 0:
                    first = i
                last = i
                count += 1
                if record:
                    mask[i] = True
        return count
    if arc_mode:
        tree = np.zeros(R + 1, dtype=np.int32)
        log = 1
        while log * 2 <= R:
            log *= 2
        for t in range(R):
            i = order[t]
            ok = True
            if count > 0:
                below = _fw_prefix(tree, i)
                if below > 0:
                    pred = _fw_kth(tree, below, log)
                else:
                    pred = _fw_kth(tree, count, log)
                if below < count:
                    succ = _fw_kth(tree, below + 1, log)
                else:
                    succ = _fw_kth(tree, 1, log)
                if _close(i, pred, R, deg, amp, obs, eps):
                    ok = False
                elif succ != pred and _close(i, succ, R, deg, amp, obs, eps):
                    ok = False
            if ok:
                _fw_add(tree, i)
                count += 1
                if record:
                    mask[i] = True
        return count
    chosen = np.empty(R, dtype=np.int64)
    for t in range(R):
        i = order[t] if not sequential else t
        ok = True
        for s in range(count):
            j = chosen[s]
            if _arc(i / R, j / R) < eps and _close(i, j, R, deg, amp, obs, eps):
                ok = False
                break
        if ok:
            chosen[count] = i
            count += 1
            if record:
                mask[i] = True
    return count


# ------------------------------------------------------------------- covering
@njit(cache=True)
def cover_arcs(R, weights, deg, amp, obs, eps, mask):
    """Greedy cover when Bowen balls are arcs.

    From the first uncovered point u, the candidates are the points whose
    ball contains u; those reaching furthest forward cover the most new grid
    points, and among them the smallest weight (then smallest index) wins.
    """
    weighted = weights.shape[0] > 0
    record = mask.shape[0] > 0
    u = 0
    end = R
    count = 0
    while u < end:
        c_last = u
        while c_last + 1 < u + R and _close(u % R, (c_last + 1) % R, R, deg, amp, obs, eps):
            c_last += 1
        r = c_last
        while r + 1 < c_last + R and _close(c_last % R, (r + 1) % R, R, deg, amp, obs, eps):
            r += 1
        best = c_last
        bw = weights[c_last % R] if weighted else 0.0
        c = c_last - 1
        while c >= u and _close(c % R, r % R, R, deg, amp, obs, eps):
            w = weights[c % R] if weighted else 0.0
            if w <= bw:
                best = c
                bw = w
            c -= 1
        if count == 0:
            left = best
            while left - 1 > best - R and _close(best % R, (left - 1) % R, R, deg, amp, obs, eps):
                left -= 1
            if left < 0:
                end = R + left
        count += 1
        if record:
            mask[best % R] = True
        u = r + 1
    return count


@njit(cache=True)
def cover_general(R, weights, deg, amp, obs, eps, mask):
    """Greedy cover without the arc structure (quadratic; small grids only)."""
    weighted = weights.shape[0] > 0
    covered = np.zeros(R, dtype=np.bool_)
    count = 0
    u = 0
    while True:
        while u < R and covered[u]:
            u += 1
        if u >= R:
            break
        best = -1
        best_gain = -1
        best_w = 0.0
        for c in range(R):
            if _arc(u / R, c / R) >= eps or not _close(u, c, R, deg, amp, obs, eps):
                continue
            gain = 0
            for y in range(R):
                if not covered[y] and _arc(c / R, y / R) < eps and _close(c, y, R, deg, amp, obs, eps):
                    gain += 1
            w = weights[c] if weighted else 0.0
            if gain > best_gain or (gain == best_gain and w < best_w):
                best = c
                best_gain = gain
                best_w = w
        for y in range(R):
            if _arc(best / R, y / R) < eps and _close(best, y, R, deg, amp, obs, eps):
                covered[y] = True
        count += 1
        if mask.shape[0] > 0:
            mask[best] = True
    return count


@njit(cache=True)
def birkhoff_grid(R, deg, amp, obs, pots, pot_len):
    """S_n of grid points: pots is a stacked array of potentials, one row per
    observed step, each sampled on pot_len nodes and linearly interpolated."""
    out = np.empty(R)
    n_obs = pots.shape[0]
    for i in range(R):
        x = i / R
        s = 0.0
        k = 0
        if n_obs > 0:
            s += _interp(pots[0], pot_len, x)
        for m in range(deg.shape[0]):
            x = _step(x, deg[m], amp[m])
            if obs[m]:
                k += 1
                if k < n_obs:
                    s += _interp(pots[k], pot_len, x)
        out[i] = s
    return out


@njit(cache=True, inline="always")
def _interp(vals, N, x):
    t = x * N
    j = int(math.floor(t))
    frac = t - j
    j = j % N
    j1 = (j + 1) % N
    return vals[j] + frac * (vals[j1] - vals[j])
