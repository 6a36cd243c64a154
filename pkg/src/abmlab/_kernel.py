"""Compiled time-stepping kernel shared by the coalescing and annihilating systems.

Each step moves every particle by an independent Gaussian increment and
then tests only adjacent gaps.  The gap of two independent unit-rate
motions is a rate-2 Brownian motion, so conditionally on its values ``a``
and ``b`` at the ends of the step it touches zero with probability
``exp(-a b / dt)``.  Hit times are sampled from the conditioned bridge and
the hits of one step are resolved in time order; a hit that makes two
other particles adjacent triggers a fresh bridge test of their gap over
the rest of the step.
"""

import heapq
import math

import numpy as np
from numba import njit

_MU_CAP = 1e9


@njit(cache=True, nogil=True)
def invgauss_sample(mu, lam, rng):
    """Inverse Gaussian variate (mean ``mu``, shape ``lam``).

    Transformation with rejection, written so that neither root suffers
    from cancellation when ``mu`` is large.
    """
    if mu > _MU_CAP:
        mu = _MU_CAP
    z = rng.standard_normal()
    y = z * z
    my = mu * y
    r = math.sqrt(my * my + 4.0 * mu * lam * y)
    denom = 2.0 * lam + my + r
    small = 2.0 * mu * lam / denom
    if rng.random() * (mu + small) <= mu:
        return small
    return mu * denom / (2.0 * lam)


@njit(cache=True, nogil=True)
def bridge_hit_time(a, b, rem, rng):
    """Time at which a rate-2 bridge from ``a > 0`` to ``b`` over ``rem`` first hits 0.

    The bridge is conditioned to hit (automatic when ``b <= 0``).  With
    ``u = s / (rem - s)`` the hit time maps to an inverse Gaussian variable
    with mean ``a/|b|`` and shape ``a**2 / (2 rem)``.
    """
    if a <= 0.0:
        return 0.0
    ab = abs(b)
    mu = a / ab if ab > a / _MU_CAP else _MU_CAP
    u = invgauss_sample(mu, a * a / (2.0 * rem), rng)
    return rem * u / (1.0 + u)


@njit(cache=True, nogil=True)
def _bridge_point(t_a, x_a, t_end, x_end, s, rate, rng, bridge):
    # position at time s of a bridge with variance rate `rate` from (t_a, x_a) to (t_end, x_end)
    span = t_end - t_a
    if span <= 0.0 or s <= t_a:
        return x_a
    frac = (s - t_a) / span
    mean = x_a + (x_end - x_a) * frac
    if not bridge:
        return mean
    var = rate * (s - t_a) * (t_end - s) / span
    if var <= 0.0:
        return mean
    return mean + math.sqrt(var) * rng.standard_normal()


@njit(cache=True, nogil=True)
def _test_gap(a, b, rem, rng, bridge):
    """Return the hit time offset within ``rem`` or -1 when the gap survives."""
    if a <= 0.0:
        return 0.0
    if b <= 0.0:
        if bridge:
            return bridge_hit_time(a, b, rem, rng)
        return rem * a / (a - b)
    if not bridge:
        return -1.0
    expo = a * b / rem
    if expo > 40.0:
        return -1.0
    if rng.random() < math.exp(-expo):
        return bridge_hit_time(a, b, rem, rng)
    return -1.0


@njit(cache=True, nogil=True)
def advance(x, ids, lo, width, circumference, coalesce, n_steps, dt, bridge, t0, rng):
    """Advance a sorted configuration by ``n_steps`` steps of size ``dt``.

    Parameters
    ----------
    x : float64 array
        Sorted positions (in ``[0, L)`` on a torus).
    ids, lo, width : int64 arrays
        Particle labels and, for coalescing systems, the first initial index
        and the size of each particle's block.
    circumference : float
        ``0`` for the line, otherwise the torus circumference ``L``.
    coalesce : bool
        Merge colliding pairs (keeping the left path) instead of removing both.
    bridge : bool
        Use the bridge crossing test; otherwise a pair collides only when
        the end-of-step positions cross.
    t0 : float
        Time at the start of the first step (used for event stamps).

    Returns
    -------
    x, ids, lo, width : arrays
        The surviving particles, sorted.
    ev_t, ev_left, ev_right, ev_x : arrays
        One row per collision: step-midpoint time, left and right labels,
        and the collision position.
    """
    n = x.size
    L = circumference
    torus = L > 0.0
    cur = x.copy()
    cid = ids.copy()
    clo = lo.copy()
    cw = width.copy()
    m = n

    end = np.empty(n)
    anchor_t = np.empty(n)
    anchor_x = np.empty(n)
    nxt = np.empty(n, np.int64)
    prv = np.empty(n, np.int64)
    alive = np.empty(n, np.bool_)
    gen = np.zeros(n, np.int64)
    hit_at = np.empty(n)
    new_pos = np.empty(n)
    new_id = np.empty(n, np.int64)
    new_lo = np.empty(n, np.int64)
    new_w = np.empty(n, np.int64)

    ev_t = np.empty(n)
    ev_left = np.empty(n, np.int64)
    ev_right = np.empty(n, np.int64)
    ev_x = np.empty(n)
    n_ev = 0

    sd = math.sqrt(dt)
    for step in range(n_steps):
        if m == 0:
            break
        t_mid = t0 + (step + 0.5) * dt
        for i in range(m):
            end[i] = cur[i] + sd * rng.standard_normal()

        if torus:
            n_pairs = m if m >= 2 else 0
        else:
            n_pairs = m - 1
        n_hit = 0
        for i in range(n_pairs):
            j = i + 1
            shift = 0.0
            if j == m:
                j = 0
                shift = L
            a = cur[j] + shift - cur[i]
            b = end[j] + shift - end[i]
            h = _test_gap(a, b, dt, rng, bridge)
            hit_at[i] = h
            if h >= 0.0:
                n_hit += 1

        if n_hit > 0:
            for i in range(m):
                anchor_t[i] = 0.0
                anchor_x[i] = cur[i]
                alive[i] = True
                gen[i] = 0
                nxt[i] = i + 1
                prv[i] = i - 1
            if torus:
                nxt[m - 1] = 0
                prv[0] = m - 1
            else:
                nxt[m - 1] = -1
            stamp = 0
            heap = [(0.0, np.int64(0), np.int64(0), np.int64(0))]
            heap.pop()
            for i in range(n_pairs):
                if hit_at[i] >= 0.0:
                    heap.append((hit_at[i], np.int64(i), np.int64(nxt[i]), np.int64(0)))
            heapq.heapify(heap)
            while len(heap) > 0:
                tau, p, q, g = heapq.heappop(heap)
                if not (alive[p] and alive[q]) or nxt[p] != q or gen[p] != g:
                    continue
                shift = L if q <= p and torus else 0.0
                # bring both paths to a common anchor time, then sample the
                # pair midpoint (a rate-1/2 bridge independent of the gap) at tau
                t_a = max(anchor_t[p], anchor_t[q])
                if t_a > tau:
                    t_a = tau
                xp = _bridge_point(anchor_t[p], anchor_x[p], dt, end[p], t_a, 1.0, rng, bridge)
                xq = _bridge_point(anchor_t[q], anchor_x[q], dt, end[q], t_a, 1.0, rng, bridge) + shift
                z = _bridge_point(t_a, 0.5 * (xp + xq), dt, 0.5 * (end[p] + end[q] + shift), tau, 0.5, rng, bridge)
                zrec = z
                if torus:
                    zrec = z % L
                ev_t[n_ev] = t_mid
                ev_left[n_ev] = cid[p]
                ev_right[n_ev] = cid[q]
                ev_x[n_ev] = zrec
                n_ev += 1
                if coalesce:
                    alive[q] = False
                    cw[p] += cw[q]
                    anchor_t[p] = tau
                    anchor_x[p] = z
                    r = nxt[q]
                    if r == q:
                        r = p
                    nxt[p] = r
                    if r >= 0:
                        prv[r] = p
                    left = p
                    right = r
                else:
                    alive[p] = False
                    alive[q] = False
                    left = prv[p]
                    right = nxt[q]
                    if left >= 0 and (left == q or left == p):
                        left = -1
                    if right >= 0 and (right == p or right == q):
                        right = -1
                    if left >= 0:
                        nxt[left] = right
                    if right >= 0:
                        prv[right] = left
                if left < 0 or right < 0 or left == right:
                    continue
                # fresh test of the newly adjacent gap over [tau, dt]
                xl = _bridge_point(anchor_t[left], anchor_x[left], dt, end[left], tau, 1.0, rng, bridge)
                anchor_t[left] = tau
                anchor_x[left] = xl
                xr = _bridge_point(anchor_t[right], anchor_x[right], dt, end[right], tau, 1.0, rng, bridge)
                anchor_t[right] = tau
                anchor_x[right] = xr
                shift = L if right <= left and torus else 0.0
                rem = dt - tau
                stamp += 1
                gen[left] = stamp
                if rem <= 0.0:
                    a = xr + shift - xl
                    if a <= 0.0:
                        heapq.heappush(heap, (tau, np.int64(left), np.int64(right), np.int64(stamp)))
                    continue
                h = _test_gap(xr + shift - xl, end[right] + shift - end[left], rem, rng, bridge)
                if h >= 0.0:
                    heapq.heappush(heap, (tau + h, np.int64(left), np.int64(right), np.int64(stamp)))
            k = 0
            for i in range(m):
                if alive[i]:
                    new_pos[k] = end[i]
                    new_id[k] = cid[i]
                    new_lo[k] = clo[i]
                    new_w[k] = cw[i]
                    k += 1
            m = k
            for i in range(m):
                cur[i] = new_pos[i]
                cid[i] = new_id[i]
                clo[i] = new_lo[i]
                cw[i] = new_w[i]
        else:
            for i in range(m):
                cur[i] = end[i]

        if torus and m > 0:
            first = 0
            for i in range(m):
                cur[i] = cur[i] % L
                if cur[i] < cur[first]:
                    first = i
            if first != 0:
                for i in range(m):
                    j = (i + first) % m
                    new_pos[i] = cur[j]
                    new_id[i] = cid[j]
                    new_lo[i] = clo[j]
                    new_w[i] = cw[j]
                for i in range(m):
                    cur[i] = new_pos[i]
                    cid[i] = new_id[i]
                    clo[i] = new_lo[i]
                    cw[i] = new_w[i]

    return (cur[:m].copy(), cid[:m].copy(), clo[:m].copy(), cw[:m].copy(),
            ev_t[:n_ev].copy(), ev_left[:n_ev].copy(), ev_right[:n_ev].copy(), ev_x[:n_ev].copy())
