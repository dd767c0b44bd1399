"""Numba batch kernel for the Monte Carlo simulator.

One prange iteration per trial; trial t draws from the SplitMix64 stream
(seed, t) exactly as :class:`latticepark.simulator.SplitMix64` does, and each
trial writes its own output row, so results are independent of thread count
and scheduling. The interval bookkeeping mirrors ``LotState`` operation for
operation; the two paths must stay in lockstep (the tests compare them
draw for draw).
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange, set_num_threads

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True, inline="always")
def _stream_state(seed, trial):
    return _mix64(_U64(seed) ^ _mix64(_U64(trial) + _U64(1)))


@njit(cache=True, inline="always")
def _randbelow(state, bound):
    """(new_state, uniform integer in [0, bound)) by power-of-two masking."""
    mask = _U64(bound - 1)
    mask |= mask >> _U64(1)
    mask |= mask >> _U64(2)
    mask |= mask >> _U64(4)
    mask |= mask >> _U64(8)
    mask |= mask >> _U64(16)
    mask |= mask >> _U64(32)
    ubound = _U64(bound)
    while True:
        state = state + _GOLDEN
        v = _mix64(state) & mask
        if v < ubound:
            return state, int(v)


@njit(cache=True, parallel=True)
def _simulate_batch(n, k, trials, seed, out):
    max_cars = n // (k + 1) + 2
    for t in prange(trials):
        lo = np.empty(max_cars + 1, np.int64)
        hi = np.empty(max_cars + 1, np.int64)
        occ = np.empty(max_cars + 1, np.int64)
        n_iv = 0
        n_occ = 0
        total = 0
        if n >= k + 2:
            lo[0] = k + 1
            hi[0] = n - 1
            n_iv = 1
            total = n - 1 - k
        state = _stream_state(seed, t)
        while total > 0:
            state, j = _randbelow(state, total)
            idx = 0
            while j >= hi[idx] - lo[idx] + 1:
                j -= hi[idx] - lo[idx] + 1
                idx += 1
            c = lo[idx] + j
            # insertion keeping occ sorted (short arrays)
            pos = n_occ
            while pos > 0 and occ[pos - 1] > c:
                occ[pos] = occ[pos - 1]
                pos -= 1
            occ[pos] = c
            n_occ += 1
            # split interval idx, same scheme as LotState._split
            left_hi = c - k - 1
            right_lo = c + k + 1
            old_lo = lo[idx]
            old_hi = hi[idx]
            total -= old_hi - old_lo + 1
            if left_hi >= old_lo and right_lo <= old_hi:
                hi[idx] = left_hi
                lo[n_iv] = right_lo
                hi[n_iv] = old_hi
                n_iv += 1
                total += (left_hi - old_lo + 1) + (old_hi - right_lo + 1)
            elif left_hi >= old_lo:
                hi[idx] = left_hi
                total += left_hi - old_lo + 1
            elif right_lo <= old_hi:
                lo[idx] = right_lo
                total += old_hi - right_lo + 1
            else:
                lo[idx] = lo[n_iv - 1]
                hi[idx] = hi[n_iv - 1]
                n_iv -= 1
        # terminal gap histogram, boundary runs included
        prev = 0
        for i in range(n_occ):
            g = occ[i] - prev - 1
            if g > 0:
                out[t, g - k] += 1
            prev = occ[i]
        g = (n + k - 1) - prev
        if g > 0:
            out[t, g - k] += 1


def simulate_batch(
    n: int, k: int, trials: int, seed: int, threads: int | None = None
) -> np.ndarray:
    """Per-trial gap-count matrix of shape (trials, k+1), dtype int32."""
    if threads is not None:
        set_num_threads(max(1, int(threads)))
    out = np.zeros((trials, k + 1), np.int32)
    _simulate_batch(n, k, trials, seed, out)
    return out
