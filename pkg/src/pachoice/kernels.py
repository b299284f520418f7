"""Jitted hot loops.

Everything here is a bit-exact mirror of a pure-Python counterpart: the
RNG mirrors :class:`pachoice.rng.SplitMix64`, and the in-loop top-k
bookkeeping mirrors :class:`pachoice.stats.TopKTracker`.  The test suite
replays identical seeds through both sides and requires identical output,
so any edit here must be made in the Python twin as well.

All kernels are compiled with ``cache=True`` (one-time compile cost per
environment) and ``nogil=True`` (replica workers can share threads).
"""

from __future__ import annotations

import numpy as np
from numba import njit

U64 = np.uint64

_GAMMA = U64(0x9E3779B97F4A7C15)
_MULT1 = U64(0xBF58476D1CE4E5B9)
_MULT2 = U64(0x94D049BB133111EB)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)


@njit(cache=True, nogil=True, inline="always")
def _next_u64(state):
    state[0] += _GAMMA
    z = state[0]
    z = (z ^ (z >> _S30)) * _MULT1
    z = (z ^ (z >> _S27)) * _MULT2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True, inline="always")
def _bounded(state, n):
    # Unbiased [0, n): reject draws below 2**64 mod n, then reduce.
    threshold = (U64(0) - n) % n
    while True:
        x = _next_u64(state)
        if x >= threshold:
            return x % n


@njit(cache=True, nogil=True)
def rng_stream(seed, count):
    """Raw 64-bit outputs, for cross-checking against the Python RNG."""
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = _next_u64(state)
    return out


@njit(cache=True, nogil=True)
def rng_bounded_stream(seed, bound, count):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = _bounded(state, U64(bound))
    return out


# --------------------------------------------------------------------------
# top-k bookkeeping (mirror of stats.TopKTracker)
# --------------------------------------------------------------------------
# scal[0] = number of occupied ranks, scal[1] = untracked vertices whose
# degree equals the threshold.  Padded slots hold id -1 / value 1.


@njit(cache=True, nogil=True, inline="always")
def _record_changes(top_ids, top_vals, old_ids, old_vals, vertex, n_time, last_holder_change, k):
    for l in range(k):
        if top_ids[l] != old_ids[l]:
            exempt = (
                top_vals[l] == old_vals[l] and old_ids[l] != vertex and old_ids[l] != -1
            )
            if not exempt:
                last_holder_change[l] = n_time


@njit(cache=True, nogil=True, inline="always")
def _tracker_update(
    top_ids, top_vals, scal, vertex, new_deg, n_time, last_holder_change, old_ids, old_vals, k
):
    k_real = scal[0]
    full = k_real == k

    if new_deg == 1:  # arrival
        if full:
            if top_vals[k - 1] == 1:
                scal[1] += 1
            return
        for i in range(k):
            old_ids[i] = top_ids[i]
            old_vals[i] = top_vals[i]
        p = k_real
        while p > 0 and (
            top_vals[p - 1] < 1 or (top_vals[p - 1] == 1 and top_ids[p - 1] > vertex)
        ):
            top_ids[p] = top_ids[p - 1]
            top_vals[p] = top_vals[p - 1]
            p -= 1
        top_ids[p] = vertex
        top_vals[p] = 1
        scal[0] = k_real + 1
        _record_changes(top_ids, top_vals, old_ids, old_vals, vertex, n_time, last_holder_change, k)
        return

    t = top_vals[k - 1]
    if full:
        if new_deg < t:
            return
        if new_deg == t:
            scal[1] += 1
            return

    pos = -1
    for i in range(k_real):
        if top_ids[i] == vertex:
            pos = i
            break

    for i in range(k):
        old_ids[i] = top_ids[i]
        old_vals[i] = top_vals[i]

    if pos >= 0:
        top_vals[pos] = new_deg
        while pos > 0 and (
            top_vals[pos - 1] < new_deg
            or (top_vals[pos - 1] == new_deg and top_ids[pos - 1] > vertex)
        ):
            top_ids[pos] = top_ids[pos - 1]
            top_vals[pos] = top_vals[pos - 1]
            pos -= 1
            top_ids[pos] = vertex
            top_vals[pos] = new_deg
    else:
        # entering vertex came from the threshold; evicted holder returns
        # there, so scal[1] is unchanged
        p = k - 1
        while p > 0 and (
            top_vals[p - 1] < new_deg
            or (top_vals[p - 1] == new_deg and top_ids[p - 1] > vertex)
        ):
            top_ids[p] = top_ids[p - 1]
            top_vals[p] = top_vals[p - 1]
            p -= 1
        top_ids[p] = vertex
        top_vals[p] = new_deg

    if full and top_vals[k - 1] > t:
        scal[1] = 0
    _record_changes(top_ids, top_vals, old_ids, old_vals, vertex, n_time, last_holder_change, k)


@njit(cache=True, nogil=True, inline="always")
def _refresh_strict(top_vals, scal, strict, last_strict_toggle, n_time, k):
    k_real = scal[0]
    for l in range(k):
        if l < k - 1:
            s = 1 if top_vals[l] > top_vals[l + 1] else 0
        else:
            s = 1 if (k_real == k and scal[1] == 0) else 0
        if s != strict[l]:
            strict[l] = s
            last_strict_toggle[l] = n_time


@njit(cache=True, nogil=True)
def run_segment(
    entries,
    degrees,
    state,
    n_from,
    n_to,
    d,
    use_min,
    top_ids,
    top_vals,
    scal,
    last_holder_change,
    last_strict_toggle,
    strict,
    old_ids,
    old_vals,
    k,
):
    """Advance the tree from step n_from to n_to with full bookkeeping."""
    for n in range(n_from, n_to):
        total = U64(2 * n)
        best = entries[_bounded(state, total)]
        bd = degrees[best]
        tie = 1
        for _ in range(d - 1):
            v = entries[_bounded(state, total)]
            dv = degrees[v]
            if use_min:
                better = dv < bd
            else:
                better = dv > bd
            if better:
                best = v
                bd = dv
                tie = 1
            elif dv == bd:
                tie += 1
                if _bounded(state, U64(tie)) == U64(0):
                    best = v
        nv = n + 1
        entries[2 * n] = best
        entries[2 * n + 1] = nv
        gy = degrees[best] + 1
        degrees[best] = gy
        degrees[nv] = 1
        n_time = n + 1
        _tracker_update(
            top_ids, top_vals, scal, best, gy, n_time, last_holder_change, old_ids, old_vals, k
        )
        _tracker_update(
            top_ids, top_vals, scal, nv, 1, n_time, last_holder_change, old_ids, old_vals, k
        )
        _refresh_strict(top_vals, scal, strict, last_strict_toggle, n_time, k)


@njit(cache=True, nogil=True)
def batch_final_degrees(d, use_min, horizon, seeds, out):
    """Final degree vectors of many short replicas (oracle comparisons).

    out: int32 array of shape (replicas, horizon + 1), filled in place.
    """
    entries = np.zeros(2 * horizon, dtype=np.int32)
    state = np.empty(1, dtype=np.uint64)
    for r in range(len(seeds)):
        state[0] = seeds[r]
        degrees = out[r]
        degrees[:] = 0
        entries[0] = 0
        entries[1] = 1
        degrees[0] = 1
        degrees[1] = 1
        for n in range(1, horizon):
            total = U64(2 * n)
            best = entries[_bounded(state, total)]
            bd = degrees[best]
            tie = 1
            for _ in range(d - 1):
                v = entries[_bounded(state, total)]
                dv = degrees[v]
                if use_min:
                    better = dv < bd
                else:
                    better = dv > bd
                if better:
                    best = v
                    bd = dv
                    tie = 1
                elif dv == bd:
                    tie += 1
                    if _bounded(state, U64(tie)) == U64(0):
                        best = v
            entries[2 * n] = best
            entries[2 * n + 1] = n + 1
            degrees[best] += 1
            degrees[n + 1] = 1


@njit(cache=True, nogil=True)
def urn_walk(a, b, steps, state):
    """Reinforced two-color walk; returns the final count of the first color."""
    A = a
    B = b
    for _ in range(steps):
        if _bounded(state, U64(A + B)) < U64(A):
            A += 1
        else:
            B += 1
    return A


@njit(cache=True, nogil=True)
def urn_batch(a, b, steps, seeds):
    out = np.empty(len(seeds), dtype=np.float64)
    state = np.empty(1, dtype=np.uint64)
    for r in range(len(seeds)):
        state[0] = seeds[r]
        A = urn_walk(a, b, steps, state)
        out[r] = A / (a + b + steps)
    return out


@njit(cache=True, nogil=True)
def growth_recurrence_at(alpha, x, start_n, r_start, sample_ns):
    """Iterate r_{n+1} = r_n * (1 + alpha/(n+x)) and read off sample points.

    The update is computed as ``r += alpha * (r / (n + x))`` so that the
    alpha = 1, x = 0 case telescopes exactly in floating point.
    """
    out = np.empty(len(sample_ns), dtype=np.float64)
    r = r_start
    n = start_n
    j = 0
    while j < len(sample_ns):
        target = sample_ns[j]
        while n < target:
            r = r + alpha * (r / (n + x))
            n += 1
        out[j] = r
        j += 1
    return out


def warmup() -> None:
    """Force-compile every kernel on tiny inputs (cached afterwards)."""
    rng_stream(U64(1), 1)
    rng_bounded_stream(U64(1), 3, 1)
    k = 1
    entries = np.zeros(8, dtype=np.int32)
    degrees = np.zeros(6, dtype=np.int32)
    entries[0], entries[1] = 0, 1
    degrees[0], degrees[1] = 1, 1
    state = np.array([1], dtype=np.uint64)
    # tracker state for P_1 with k = 1: vertex 0 listed, vertex 1 untracked
    # at the threshold degree 1
    top_ids = np.zeros(k, dtype=np.int64)
    top_vals = np.ones(k, dtype=np.int64)
    scal = np.array([1, 1], dtype=np.int64)
    aux = np.zeros(k, dtype=np.int64)
    run_segment(
        entries, degrees, state, 1, 3, 2, False,
        top_ids, top_vals, scal, aux.copy(), aux.copy(), aux.copy(),
        aux.copy(), aux.copy(), k,
    )
    out = np.zeros((1, 3), dtype=np.int32)
    batch_final_degrees(2, False, 2, np.array([1], dtype=np.uint64), out)
    urn_batch(1, 1, 2, np.array([1], dtype=np.uint64))
    growth_recurrence_at(1.0, 0.0, 1, 1.0, np.array([2], dtype=np.int64))
