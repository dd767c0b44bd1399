"""Exact evaluation of the gap-count recursions of the lattice parking process.

A lot with parameter ``n`` has ``n + k - 1`` slots; cars (block centers) must
sit at least ``k + 1`` apart, so the terminal configuration consists of gaps
of sizes ``k..2k``. Writing ``a_n`` for the expected number of r-gaps, the
uniform choice of the first car gives the prefix recursion

    a_n = 2/(n-k-1) * sum_{i=1}^{n-k-1} a_i        (n >= k+2),

with ``a_n = 1`` exactly when ``n = r - k + 1`` for ``n <= k+1`` (a lot too
small to accept a car is a single gap). The substituted sequence

    t_n = (sum_{i<=n} a_i) / (n (n + 2k + 1))

has increments ``u_n = t_n - t_{n-1}`` obeying the k-step linear recursion

    u_n = -2 (n+k) / (n (n+2k+1)) * (u_{n-1} + ... + u_{n-k})   (n >= k+2).

Writing ``n = p*k + s`` with ``2 <= s <= k+1``, the terms satisfy
``|u_n| <= M 2^p / p!`` with ``M = max{|u_i| : 2 <= i <= 2k}``, so the series
``t_inf = s_1/(2k+2) + sum_{i>=2} u_i`` converges faster than any exponential
and the tail from index ``n`` onward is certified by

    |R_n| <= M * k * e^2 * 2^p / p!.

This module runs the recursion with compensated accumulation, stops on that
certificate, and reconstructs the finite sequences ``a_n``, ``s_n``, ``t_n``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, ResourceLimitError
from .summation import neumaier_add, neumaier_add_vec

_LN2 = math.log(2.0)

#: Tightest truncation tolerance the certificate may chase; below this the
#: accumulator round-off dominates whatever the tail bound promises.
EPS_FLOOR = 16.0 * sys.float_info.epsilon

#: Steps between exact re-derivations of the incremental window sum. The
#: incremental update leaves a persistent absolute drift at ulp scale of the
#: window sum's historical maximum, which would drown the superexponentially
#: decaying terms; flushing every k steps keeps the flush amortized O(1) per
#: step while the drift stays at the scale of the current terms.
RESUM_INTERVAL = 4096


def _resum_interval(k: int) -> int:
    return min(k, RESUM_INTERVAL)

#: Largest n accepted by finite_sequences unless the caller overrides it.
FINITE_SEQUENCE_LIMIT = 2**23


def default_step_budget(k: int) -> int:
    """Advance steps allowed before a truncation run reports failure."""
    return 128 * k + 4096


@dataclass(frozen=True)
class GapParams:
    """The pair (k, r): car half-exclusion ``k >= 1`` and gap size ``r``.

    Terminal gaps of the process always satisfy ``k <= r <= 2k``.
    """

    k: int
    r: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.k <= self.r <= 2 * self.k:
            raise ValueError(
                f"r must lie in [k, 2k] = [{self.k}, {2 * self.k}], got {self.r}"
            )


@dataclass(frozen=True)
class TruncationReport:
    """Certificate attached to a truncated series sum.

    ``n_stop`` is the last index actually summed. The first unsummed index
    ``n_stop + 1`` sits in block ``p`` of the decomposition ``n = p*k + s``
    (``2 <= s <= k+1``), and the discarded tail is certified to satisfy
    ``|R| <= bound = M * k * e^2 * 2^p / p!``.
    """

    n_stop: int
    bound: float
    p: int


@dataclass(frozen=True)
class RecursionWindow:
    """Sliding state of the u-recursion after summing through index ``n``.

    ``window`` holds the last ``min(k, n-1)`` values ``u_{n-k+1}..u_n``;
    ``window_sum`` tracks their sum incrementally (re-derived exactly every
    ``min(k, RESUM_INTERVAL)`` steps); ``t_partial`` plus the hidden carry
    equals the compensated partial sum ``s_1/(2k+2) + sum_{i=2}^{n} u_i``; and
    ``trunc_const`` is the running max of ``|u_i|`` over ``2 <= i <= min(n, 2k)``.
    """

    params: GapParams
    n: int
    window: tuple[float, ...]
    window_sum: float
    t_partial: float
    trunc_const: float
    t_carry: float = 0.0
    steps_since_resum: int = 0

    @property
    def t_value(self) -> float:
        """Compensated value of the partial sum t_n."""
        return self.t_partial + self.t_carry


def initial_a(n: int, k: int, r: int) -> float:
    """Expected r-gap count for lots too small to accept a car (n <= k+1).

    Such a lot is one gap of size ``n + k - 1``, so the count is 1 exactly
    when ``n = r - k + 1`` and 0 otherwise.
    """
    GapParams(k, r)
    if not 1 <= n <= k + 1:
        raise ValueError(f"initial_a needs 1 <= n <= k+1 = {k + 1}, got n={n}")
    return 1.0 if n == r - k + 1 else 0.0


def initial_u(n: int, k: int, r: int) -> float:
    """Warm-up value u_n for 2 <= n <= k+1 (before the k-step recursion)."""
    GapParams(k, r)
    if not 2 <= n <= k + 1:
        raise ValueError(f"initial_u needs 2 <= n <= k+1 = {k + 1}, got n={n}")
    if n <= r - k:
        return 0.0
    if n == r - k + 1 and r >= k + 1:
        return 1.0 / ((r - k + 1) * (r + k + 2))
    return 1.0 / (n * (n + 2 * k + 1)) - 1.0 / ((n - 1) * (n + 2 * k))


def _coeff(m: int, k: int) -> float:
    """Window-sum multiplier of the k-step recursion at index m >= k+2."""
    return -2.0 * (m + k) / (m * (m + 2 * k + 1))


def block_index(n: int, k: int) -> int:
    """p in the unique decomposition n = p*k + s with 2 <= s <= k+1."""
    if n < 2:
        raise ValueError(f"block decomposition needs n >= 2, got {n}")
    return (n - 2) // k


def tail_bound(trunc_const: float, k: int, p: int) -> float:
    """Certified tail bound M * k * e^2 * 2^p / p!, evaluated in log space.

    ``p!`` overflows float64 beyond p = 170, so the 2^p/p! factor is formed
    as exp(p ln 2 - lgamma(p+1)).
    """
    return trunc_const * k * math.exp(2.0 + p * _LN2 - math.lgamma(p + 1))


def initial_window(params: GapParams) -> RecursionWindow:
    """Fully warmed-up state at n = k+1, loaded from the initial u-values."""
    k, r = params.k, params.r
    us = [initial_u(i, k, r) for i in range(2, k + 2)]
    t, carry = (1.0 if r == k else 0.0) / (2 * k + 2), 0.0
    for u in us:
        t, carry = neumaier_add(t, carry, u)
    return RecursionWindow(
        params=params,
        n=k + 1,
        window=tuple(us),
        window_sum=math.fsum(us),
        t_partial=t,
        t_carry=carry,
        trunc_const=max(abs(u) for u in us),
    )


def advance(w: RecursionWindow) -> tuple[RecursionWindow, float]:
    """One recursion step: the state at index n+1 together with u_{n+1}."""
    k = w.params.k
    if w.n < k + 1:
        raise ValueError("advance requires a fully warmed-up window (n >= k+1)")
    m = w.n + 1
    u_next = _coeff(m, k) * w.window_sum
    window = w.window[1:] + (u_next,)
    steps = w.steps_since_resum + 1
    if k == 1:
        wsum, steps = u_next, 0  # size-1 window: replacement is exact
    elif steps >= _resum_interval(k):
        wsum, steps = math.fsum(window), 0
    else:
        wsum = w.window_sum + (u_next - w.window[0])
    t, carry = neumaier_add(w.t_partial, w.t_carry, u_next)
    trunc = max(w.trunc_const, abs(u_next)) if m <= 2 * k else w.trunc_const
    new = replace(
        w,
        n=m,
        window=window,
        window_sum=wsum,
        t_partial=t,
        t_carry=carry,
        trunc_const=trunc,
        steps_since_resum=steps,
    )
    return new, u_next


def _validate_eps(eps: float) -> None:
    if not eps >= EPS_FLOOR:  # also rejects NaN
        raise ValueError(
            f"eps must be >= {EPS_FLOOR:.3e} (16 * machine epsilon), got {eps!r}"
        )


def _sum_t_series(
    k: int,
    init_us: list[float],
    t0: float,
    eps: float,
    step_budget: int,
    const_scale: float = 1.0,
    what: str = "",
) -> tuple[float, TruncationReport]:
    """Scalar engine: run the k-step recursion from its warm-up values and sum
    until the block certificate clears ``eps``.

    ``init_us`` are the values at indices 2..k+1 and ``t0`` the n=1 seed of
    the partial sum. ``const_scale`` inflates the measured max |u| when the
    certificate must cover a superposition of trajectories.
    """
    ring = list(init_us)  # position of index n is (n - 2) % k
    wsum = math.fsum(ring)
    t, carry = t0, 0.0
    for u in ring:
        t, carry = neumaier_add(t, carry, u)
    mmax = max(abs(u) for u in ring)
    n = k + 1
    n_max = n + step_budget
    steps_since_resum = 0
    resum_every = _resum_interval(k)
    two_k = 2 * k
    while True:
        # The bound for the tail starting at n+1 changes only when its block
        # index does, i.e. when (n-1) % k == 0; M is complete once n >= 2k.
        if n >= two_k and (n - 1) % k == 0:
            p = (n - 1) // k
            bound = const_scale * tail_bound(mmax, k, p)
            if bound <= eps:
                return t + carry, TruncationReport(n_stop=n, bound=bound, p=p)
        if n >= n_max:
            raise ConvergenceError(
                f"step budget {step_budget} exhausted before the tail bound "
                f"cleared eps={eps:.3e}{what}"
            )
        n += 1
        pos = (n - 2) % k
        u_new = _coeff(n, k) * wsum
        old = ring[pos]
        ring[pos] = u_new
        steps_since_resum += 1
        if k == 1:
            wsum = u_new  # size-1 window: replacement is exact
        elif steps_since_resum >= resum_every:
            wsum, steps_since_resum = math.fsum(ring), 0
        else:
            wsum += u_new - old
        t, carry = neumaier_add(t, carry, u_new)
        if n <= two_k:
            mmax = max(mmax, abs(u_new))


def t_limit(
    params: GapParams, eps: float, *, step_budget: int | None = None
) -> tuple[float, TruncationReport]:
    """Series limit t_inf of one (k, r) trajectory, certified to ``eps``.

    Runs the recursion from its warm-up until the superexponential tail bound
    falls below ``eps``; the returned value differs from the true limit by at
    most ``eps`` plus summation round-off.
    """
    _validate_eps(eps)
    k, r = params.k, params.r
    init = [initial_u(i, k, r) for i in range(2, k + 2)]
    t0 = (1.0 if r == k else 0.0) / (2 * k + 2)
    budget = default_step_budget(k) if step_budget is None else step_budget
    return _sum_t_series(k, init, t0, eps, budget, what=f" (k={k}, r={r})")


def _sum_t_series_batch(
    k: int,
    init_matrix: np.ndarray,
    t0: np.ndarray,
    eps: np.ndarray,
    step_budget: int,
    rs: np.ndarray,
) -> tuple[np.ndarray, TruncationReport]:
    """Vectorized engine over trajectories sharing k (one column per r).

    All columns run to the same stopping index: the certificate must clear
    the per-column eps for every column. Identical math to the scalar engine.
    """
    ring = np.array(init_matrix, dtype=float)  # shape (k, m), row (n-2) % k
    wsum = ring.sum(axis=0)
    t = np.array(t0, dtype=float)
    carry = np.zeros_like(t)
    for row in ring:
        neumaier_add_vec(t, carry, row)
    mmax = np.abs(ring).max(axis=0)
    n = k + 1
    n_max = n + step_budget
    steps_since_resum = 0
    resum_every = _resum_interval(k)
    two_k = 2 * k
    while True:
        if n >= two_k and (n - 1) % k == 0:
            p = (n - 1) // k
            factor = k * math.exp(2.0 + p * _LN2 - math.lgamma(p + 1))
            bounds = mmax * factor
            if np.all(bounds <= eps):
                return t + carry, TruncationReport(
                    n_stop=n, bound=float(bounds.max()), p=p
                )
        if n >= n_max:
            p = (n - 1) // k
            factor = k * math.exp(2.0 + p * _LN2 - math.lgamma(p + 1))
            bad = rs[mmax * factor > eps]
            raise ConvergenceError(
                f"step budget {step_budget} exhausted (k={k}); "
                f"unconverged r values: {bad.tolist()[:8]}"
            )
        n += 1
        pos = (n - 2) % k
        u_new = _coeff(n, k) * wsum
        old = ring[pos].copy()
        ring[pos] = u_new
        steps_since_resum += 1
        if k == 1:
            wsum = u_new.copy()  # size-1 window: replacement is exact
        elif steps_since_resum >= resum_every:
            wsum, steps_since_resum = ring.sum(axis=0), 0
        else:
            wsum += u_new - old
        neumaier_add_vec(t, carry, u_new)
        if n <= two_k:
            np.maximum(mmax, np.abs(u_new), out=mmax)


def _initial_u_block(k: int, r_lo: int, r_hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Warm-up matrix u_n (rows n=2..k+1) for the column range r_lo..r_hi,
    plus the t0 row. Float-identical to the scalar initial_u."""
    m = r_hi - r_lo + 1
    init = np.zeros((k, m))
    cols = np.arange(r_lo, r_hi + 1) - k  # j = r - k in [0, k]
    for n in range(2, k + 2):
        first = 1.0 / (n * (n + 2 * k + 1))
        row = np.full(m, first - 1.0 / ((n - 1) * (n + 2 * k)))
        row[cols >= n] = 0.0  # r >= n + k: still inside the single-gap regime
        row[cols == n - 1] = first  # r = n + k - 1: the lot just became a gap
        init[n - 2] = row
    t0 = np.where(cols == 0, 1.0 / (2 * k + 2), 0.0)
    return init, t0


def t_limits_batch(
    k: int,
    eps_per_r: np.ndarray,
    *,
    step_budget: int | None = None,
    mem_budget_bytes: int = 2**28,
) -> tuple[np.ndarray, TruncationReport]:
    """t_inf for every r = k..2k at once, chunked to bound ring-buffer memory.

    Returns the (k+1,) array of limits and the certificate of the last chunk
    (chunks share n_stop only approximately; the reported bound is the max
    across chunks).
    """
    if step_budget is None:
        step_budget = default_step_budget(k)
    eps_per_r = np.asarray(eps_per_r, dtype=float)
    if eps_per_r.shape != (k + 1,):
        raise ValueError("eps_per_r must have one entry per r in k..2k")
    if not np.all(eps_per_r >= EPS_FLOOR):
        raise ValueError(
            f"per-r eps must be >= {EPS_FLOOR:.3e}; tighten the table eps split"
        )
    chunk = max(1, int(mem_budget_bytes // (8 * max(k, 1))))
    out = np.empty(k + 1)
    n_stop, p, bound = 0, 0, 0.0
    for lo in range(0, k + 1, chunk):
        hi = min(k + 1, lo + chunk) - 1
        init, t0 = _initial_u_block(k, k + lo, k + hi)
        t, rep = _sum_t_series_batch(
            k, init, t0, eps_per_r[lo : hi + 1], step_budget,
            rs=np.arange(k + lo, k + hi + 1),
        )
        out[lo : hi + 1] = t
        n_stop, p, bound = max(n_stop, rep.n_stop), max(p, rep.p), max(bound, rep.bound)
    return out, TruncationReport(n_stop=n_stop, bound=bound, p=p)


def finite_sequences(
    params: GapParams, n_max: int, *, limit: int = FINITE_SEQUENCE_LIMIT
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrays a_1..a_{n_max}, s_1..s_{n_max}, t_1..t_{n_max} (index 0 is n=1).

    t follows the partial-sum formula, s = n (n+2k+1) t, and a is the first
    difference of s with s_0 = 0; consistent with the direct prefix recursion
    to round-off.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    if n_max > limit:
        raise ResourceLimitError(
            f"n_max={n_max} exceeds the configured limit {limit}"
        )
    k, r = params.k, params.r
    t = np.empty(n_max)
    ring = [0.0] * k
    acc, carry = (1.0 if r == k else 0.0) / (2 * k + 2), 0.0
    t[0] = acc
    wsum = 0.0
    steps_since_resum = 0
    resum_every = _resum_interval(k)
    for n in range(2, n_max + 1):
        if n <= k + 1:
            u = initial_u(n, k, r)
        else:
            u = _coeff(n, k) * wsum
        pos = (n - 2) % k
        old = ring[pos]
        ring[pos] = u
        steps_since_resum += 1
        if k == 1:
            wsum = u  # size-1 window: replacement is exact
        elif steps_since_resum >= resum_every:
            wsum, steps_since_resum = math.fsum(ring), 0
        else:
            wsum += u - old
        acc, carry = neumaier_add(acc, carry, u)
        t[n - 1] = acc + carry
    ns = np.arange(1, n_max + 1, dtype=float)
    s = ns * (ns + 2 * k + 1) * t
    a = np.diff(s, prepend=0.0)
    return a, s, t


def exact_gap_expectation(n: int, k: int, r: int) -> float:
    """a_n by the direct prefix recursion: O(n) time, O(k) rolling state.

    A ring of the last k+1 values bridges the k+1-step lag between the
    current index and the prefix sum the recursion divides out.
    """
    GapParams(k, r)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    from collections import deque

    ring: deque[float] = deque()
    prefix, carry = 0.0, 0.0
    a_j = 0.0
    for j in range(1, n + 1):
        if len(ring) > k:  # a_{j-k-1} leaves the bridge, enters the prefix
            prefix, carry = neumaier_add(prefix, carry, ring.popleft())
        if j <= k + 1:
            a_j = 1.0 if j == r - k + 1 else 0.0
        else:
            a_j = 2.0 * (prefix + carry) / (j - k - 1)
        ring.append(a_j)
    return a_j


def closed_form_u_k1(n: int) -> float:
    """Closed form of u_n for k = 1: 3 (n+1) (-2)^(n-1) / (n+3)!.

    Used only as a test oracle for the recursion path. Small n is evaluated
    through exact integer arithmetic (one correctly-rounded division); very
    large n falls back to log-space magnitude with an explicit sign, since
    (n+3)! overflows float64 beyond n = 167.
    """
    if n < 2:
        raise ValueError(f"closed_form_u_k1 needs n >= 2, got {n}")
    sign = 1.0 if (n - 1) % 2 == 0 else -1.0
    if n <= 300:
        from fractions import Fraction

        return sign * float(
            Fraction(3 * (n + 1) * 2 ** (n - 1), math.factorial(n + 3))
        )
    log_mag = math.log(3.0) + math.log(n + 1.0) + (n - 1) * _LN2 - math.lgamma(n + 4)
    return sign * math.exp(log_mag)
