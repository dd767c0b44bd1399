"""Arbitrary-precision rational evaluation of the gap recursions.

Everything here mirrors :mod:`latticepark.recursion` over ``fractions.Fraction``
instead of floats. It exists to pin golden values and to validate the
floating-point path independently of any rounding choices; it is deliberately
slow and capped at small n.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import ResourceLimitError
from .recursion import GapParams

#: Rational runs are a validation tool, not a production path.
RATIONAL_N_LIMIT = 2000


def _check_n(n: int, limit: int) -> None:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if n > limit:
        raise ResourceLimitError(f"rational mode is capped at n <= {limit}")


def initial_u_exact(n: int, k: int, r: int) -> Fraction:
    """Exact warm-up value u_n for 2 <= n <= k+1."""
    GapParams(k, r)
    if not 2 <= n <= k + 1:
        raise ValueError(f"initial_u_exact needs 2 <= n <= k+1, got n={n}")
    if n <= r - k:
        return Fraction(0)
    if n == r - k + 1 and r >= k + 1:
        return Fraction(1, (r - k + 1) * (r + k + 2))
    return Fraction(1, n * (n + 2 * k + 1)) - Fraction(1, (n - 1) * (n + 2 * k))


def u_sequence_exact(k: int, r: int, n_max: int, *, limit: int = RATIONAL_N_LIMIT) -> dict[int, Fraction]:
    """u_2..u_{n_max} as an index-keyed dict of exact rationals."""
    GapParams(k, r)
    _check_n(n_max, limit)
    u: dict[int, Fraction] = {}
    for n in range(2, min(k + 1, n_max) + 1):
        u[n] = initial_u_exact(n, k, r)
    for n in range(k + 2, n_max + 1):
        wsum = sum(u[n - i] for i in range(1, k + 1))
        u[n] = Fraction(-2 * (n + k), n * (n + 2 * k + 1)) * wsum
    return u


def t_value_exact(k: int, r: int, n: int, *, limit: int = RATIONAL_N_LIMIT) -> Fraction:
    """Exact partial sum t_n = s_1/(2k+2) + sum_{i=2}^{n} u_i."""
    GapParams(k, r)
    _check_n(n, limit)
    t = Fraction(1 if r == k else 0, 2 * k + 2)
    u = u_sequence_exact(k, r, n, limit=limit)
    return t + sum(u.values(), Fraction(0))


def gap_expectation_sequence_exact(
    k: int, r: int, n_max: int, *, limit: int = RATIONAL_N_LIMIT
) -> list[Fraction]:
    """a_1..a_{n_max} by the direct prefix recursion, exact.

    Returned list is 0-indexed: entry i is a_{i+1}.
    """
    GapParams(k, r)
    _check_n(n_max, limit)
    a: list[Fraction] = []
    prefix = Fraction(0)
    for n in range(1, n_max + 1):
        if n <= k + 1:
            a_n = Fraction(1 if n == r - k + 1 else 0)
        else:
            a_n = Fraction(2, n - k - 1) * prefix
        a.append(a_n)
        # the prefix used at step n+j covers indices <= n+j-k-1
        if n - k >= 1:
            prefix += a[n - k - 1]
    return a


def finite_sequences_exact(
    k: int, r: int, n_max: int, *, limit: int = RATIONAL_N_LIMIT
) -> tuple[list[Fraction], list[Fraction], list[Fraction]]:
    """Exact (a, s, t) triples by the substitution route, 0-indexed at n=1."""
    GapParams(k, r)
    _check_n(n_max, limit)
    u = u_sequence_exact(k, r, n_max, limit=limit)
    t = [Fraction(1 if r == k else 0, 2 * k + 2)]
    for n in range(2, n_max + 1):
        t.append(t[-1] + u[n])
    s = [n * (n + 2 * k + 1) * t[n - 1] for n in range(1, n_max + 1)]
    a = [s[0]] + [s[i] - s[i - 1] for i in range(1, n_max)]
    return a, s, t
