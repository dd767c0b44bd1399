"""Compensated floating-point accumulation.

The gap-series increments alternate in sign and span dozens of orders of
magnitude, so every long running sum in this package (series partial sums,
sliding-window sums, prefix sums) goes through Neumaier's variant of Kahan
summation instead of a bare ``+=``.
"""

from __future__ import annotations

import numpy as np


def neumaier_add(s: float, c: float, x: float) -> tuple[float, float]:
    """One compensated-summation step; returns the new (sum, carry) pair.

    The represented value is always ``s + c``.
    """
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


def neumaier_add_vec(s: np.ndarray, c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Vectorized :func:`neumaier_add`; mutates and returns ``s`` with ``c``.

    ``s`` and ``c`` are updated in place (column-wise independent sums).
    """
    t = s + x
    big = np.abs(s) >= np.abs(x)
    c += np.where(big, (s - t) + x, (x - t) + s)
    s[:] = t
    return s


class NeumaierSum:
    """Running compensated sum; ``total()`` returns sum plus carry."""

    __slots__ = ("s", "c")

    def __init__(self, value: float = 0.0):
        self.s = float(value)
        self.c = 0.0

    def add(self, x: float) -> None:
        self.s, self.c = neumaier_add(self.s, self.c, x)

    def total(self) -> float:
        return self.s + self.c
