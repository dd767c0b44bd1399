"""Stochastic and exhaustive simulation of the lattice parking process.

This is the oracle side of the build: cars are placed one at a time,
uniformly over the currently admissible center positions, until none remain.
Nothing here touches the recursion machinery.

Boundary gaps count as gaps. The run of empty slots before the first car and
after the last car enters the histogram exactly like an interior gap (an
empty lot is a single gap of size n + k - 1). This convention is what the
expectation recursion's initial conditions encode, and silently dropping the
boundary runs is the easiest way to disagree with them.
"""

from __future__ import annotations

from bisect import insort
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ResourceLimitError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

#: Plain slot-array recursion visits the whole placement tree.
BRUTE_FORCE_PLAIN_LIMIT = 14
#: The run-multiset memo collapses the tree; still exponential in spirit.
BRUTE_FORCE_MEMO_LIMIT = 32


def _mix64(z: int) -> int:
    """SplitMix64 finalizer (a bijection on 64-bit words)."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Tiny splittable PRNG: 64-bit state, one add-and-mix per draw.

    The stream is a pure function of (seed, stream), so trial t of a run
    produces identical draws no matter how trials are scheduled across
    threads. Mirrored verbatim inside the batch kernel.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int, stream: int = 0):
        self.state = _mix64((seed & _MASK64) ^ _mix64((stream + 1) & _MASK64))

    def next64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def randbelow(self, bound: int) -> int:
        """Exact uniform integer in [0, bound) by power-of-two masking."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        mask = (1 << (bound - 1).bit_length()) - 1
        while True:
            v = self.next64() & mask
            if v < bound:
                return v


@dataclass
class LotState:
    """Mutable lot: n + k - 1 slots, centers at least k + 1 apart.

    ``intervals`` lists the maximal admissible center runs [lo, hi] in the
    order the sampler traverses them; the bookkeeping (split in place, append
    right half, swap-remove empties) is kept in lockstep with the batch
    kernel so both consume identical random draws.
    """

    n: int
    k: int
    occupied: list[int] = field(default_factory=list)
    intervals: list[list[int]] = field(default_factory=list)

    @classmethod
    def initial(cls, n: int, k: int) -> "LotState":
        if n < 1 or k < 1:
            raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
        intervals = [[k + 1, n - 1]] if n >= k + 2 else []
        return cls(n=n, k=k, intervals=intervals)

    @property
    def slots(self) -> int:
        return self.n + self.k - 1

    @property
    def valid(self) -> set[int]:
        """Currently admissible center positions, as a set."""
        out: set[int] = set()
        for lo, hi in self.intervals:
            out.update(range(lo, hi + 1))
        return out

    def total_valid(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    def place(self, c: int) -> None:
        """Occupy center c (must be admissible) and update the intervals."""
        for idx, (lo, hi) in enumerate(self.intervals):
            if lo <= c <= hi:
                self._split(idx, c)
                insort(self.occupied, c)
                return
        raise ValueError(f"position {c} is not currently admissible")

    def _split(self, idx: int, c: int) -> None:
        lo, hi = self.intervals[idx]
        left_hi = c - self.k - 1
        right_lo = c + self.k + 1
        if left_hi >= lo and right_lo <= hi:
            self.intervals[idx] = [lo, left_hi]
            self.intervals.append([right_lo, hi])
        elif left_hi >= lo:
            self.intervals[idx] = [lo, left_hi]
        elif right_lo <= hi:
            self.intervals[idx] = [right_lo, hi]
        else:
            self.intervals[idx] = self.intervals[-1]
            self.intervals.pop()

    def place_random(self, rng: SplitMix64) -> int:
        """Place one car uniformly over the admissible positions."""
        j = rng.randbelow(self.total_valid())
        for idx, (lo, hi) in enumerate(self.intervals):
            size = hi - lo + 1
            if j < size:
                c = lo + j
                self._split(idx, c)
                insort(self.occupied, c)
                return c
            j -= size
        raise AssertionError("unreachable: sampler index exceeded total")

    def gap_sizes(self) -> list[int]:
        """Sizes of all maximal empty runs, boundary runs included."""
        sizes = []
        prev = 0
        for c in self.occupied:
            if c - prev - 1 > 0:
                sizes.append(c - prev - 1)
            prev = c
        if self.slots - prev > 0:
            sizes.append(self.slots - prev)
        return sizes


@dataclass(frozen=True)
class GapCounts:
    """Per-r gap statistics, r = k..2k.

    ``counts`` holds integers for a single realization, exact rationals for
    the brute-force expectation, or sample means for Monte Carlo runs (then
    ``stderr`` and ``trials`` are set; stderr is None below 2 trials).
    """

    k: int
    counts: tuple
    stderr: tuple | None = None
    trials: int | None = None

    @property
    def r_values(self) -> range:
        return range(self.k, 2 * self.k + 1)

    def count(self, r: int) -> float:
        return self.counts[r - self.k]


def simulate_lot(n: int, k: int, rng_stream: SplitMix64) -> GapCounts:
    """One realization of the parking process; terminal gap histogram."""
    lot = LotState.initial(n, k)
    while lot.intervals:
        lot.place_random(rng_stream)
    counts = [0] * (k + 1)
    for g in lot.gap_sizes():
        counts[g - k] += 1
    return GapCounts(k=k, counts=tuple(counts))


def estimate_gap_expectation(
    n: int, k: int, trials: int, seed: int, *, threads: int | None = None
) -> GapCounts:
    """Monte Carlo estimate of the expected gap counts, with standard errors.

    Trial t draws from the SplitMix64 stream (seed, t), so results are
    reproducible for a fixed seed regardless of thread count or scheduling;
    a single trial reproduces ``simulate_lot(n, k, SplitMix64(seed, 0))``.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    per_trial = _run_batch(n, k, trials, seed, threads)
    sums = per_trial.sum(axis=0, dtype=np.int64)
    means = sums / trials
    if trials < 2:
        stderr = None
    else:
        sumsq = (per_trial.astype(np.int64) ** 2).sum(axis=0, dtype=np.int64)
        var = (sumsq - sums * means) / (trials - 1)
        stderr = tuple(float(x) for x in np.sqrt(np.maximum(var, 0.0) / trials))
    return GapCounts(
        k=k,
        counts=tuple(float(x) for x in means),
        stderr=stderr,
        trials=trials,
    )


def _run_batch(n: int, k: int, trials: int, seed: int, threads: int | None) -> np.ndarray:
    from . import _simkernel

    return _simkernel.simulate_batch(n, k, trials, seed, threads)


def brute_force_expectation(
    n: int, k: int, *, memoize: bool = True, max_n: int | None = None
) -> GapCounts:
    """Exact expected gap counts by recursing over the full placement tree.

    Plain mode (``memoize=False``) operates directly on the slot occupancy
    array with no structural shortcuts; it is the most paranoid oracle and is
    capped accordingly. Memoized mode keys states on the multiset of maximal
    empty-run lengths, which the test suite verifies against plain mode on
    small lots before it is trusted. Exact Fractions throughout. Boundary
    gaps count as gaps in both modes.
    """
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    cap = max_n if max_n is not None else (
        BRUTE_FORCE_MEMO_LIMIT if memoize else BRUTE_FORCE_PLAIN_LIMIT
    )
    if n > cap:
        raise ResourceLimitError(
            f"brute force at n={n} exceeds the limit {cap} "
            f"({'memoized' if memoize else 'plain'} mode)"
        )
    counts = _brute_memo(n, k) if memoize else _brute_plain(n, k)
    return GapCounts(k=k, counts=tuple(counts))


def _brute_plain(n: int, k: int) -> list[Fraction]:
    slots = n + k - 1

    def valid_positions(occ: tuple[bool, ...]) -> list[int]:
        out = []
        for c in range(k + 1, n):
            if not any(occ[j - 1] for j in range(max(1, c - k), min(slots, c + k) + 1)):
                out.append(c)
        return out

    def gap_histogram(occ: tuple[bool, ...]) -> list[Fraction]:
        counts = [Fraction(0)] * (k + 1)
        run = 0
        for filled in occ:
            if filled:
                if run:
                    counts[run - k] += 1
                run = 0
            else:
                run += 1
        if run:
            counts[run - k] += 1
        return counts

    def walk(occ: tuple[bool, ...]) -> list[Fraction]:
        vs = valid_positions(occ)
        if not vs:
            return gap_histogram(occ)
        w = Fraction(1, len(vs))
        total = [Fraction(0)] * (k + 1)
        for c in vs:
            child = list(occ)
            child[c - 1] = True
            sub = walk(tuple(child))
            for i in range(k + 1):
                total[i] += w * sub[i]
        return total

    return walk(tuple([False] * slots))


def _brute_memo(n: int, k: int) -> list[Fraction]:
    @lru_cache(maxsize=None)
    def walk(runs: tuple[int, ...]) -> tuple[Fraction, ...]:
        n_valid = [max(0, length - 2 * k) for length in runs]
        total_valid = sum(n_valid)
        if total_valid == 0:
            counts = [Fraction(0)] * (k + 1)
            for length in runs:
                counts[length - k] += 1
            return tuple(counts)
        w = Fraction(1, total_valid)
        total = [Fraction(0)] * (k + 1)
        for idx, length in enumerate(runs):
            rest = runs[:idx] + runs[idx + 1 :]
            for offset in range(n_valid[idx]):
                child = tuple(sorted(rest + (k + offset, length - k - 1 - offset)))
                sub = walk(child)
                for i in range(k + 1):
                    total[i] += w * sub[i]
        return tuple(total)

    result = walk((n + k - 1,))
    walk.cache_clear()
    return list(result)
