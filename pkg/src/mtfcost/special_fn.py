"""Small special-function kit: Stirling numbers, rising factorials, and the
integer-order upper incomplete gamma function."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_MAX_ORDER = 20


@dataclass(frozen=True)
class StirlingTable:
    """Stirling numbers of the second kind, ``entries[k][l]`` for 1 <= l <= k.

    Built once with exact integer arithmetic; row/column 0 are padding.
    """

    max_order: int = DEFAULT_MAX_ORDER
    entries: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.max_order < 1:
            raise ValueError(f"max_order must be positive, got {self.max_order}")
        rows = [[1]]  # S(0, 0) = 1
        for k in range(1, self.max_order + 1):
            prev = rows[-1]
            row = [0] * (k + 1)
            for l in range(1, k + 1):
                left = prev[l - 1] if l - 1 < len(prev) else 0
                same = prev[l] if l < len(prev) else 0
                row[l] = l * same + left
            rows.append(row)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in rows))

    def __call__(self, k: int, l: int) -> int:
        if not (1 <= l <= k <= self.max_order):
            raise ValueError(
                f"Stirling order out of range: need 1 <= l <= k <= {self.max_order}, got k={k}, l={l}"
            )
        return self.entries[k][l]

    def row(self, k: int) -> list[int]:
        """``[a_1^(k), ..., a_k^(k)]``."""
        return [self(k, l) for l in range(1, k + 1)]


_TABLE = StirlingTable()


def stirling2(k: int, l: int) -> int:
    """Number of partitions of a k-set into l non-empty blocks."""
    return _TABLE(k, l)


def pochhammer(a: float, l: int) -> float:
    """Rising factorial (a)_l = a (a+1) ... (a+l-1); (a)_0 = 1."""
    if l < 0:
        raise ValueError(f"pochhammer order must be non-negative, got {l}")
    out = 1.0
    for i in range(l):
        out *= a + i
    return out


def log_pochhammer(a: float, l: int) -> float:
    """log (a)_l for a > 0, via log-gamma differences."""
    if a <= 0:
        raise ValueError("log_pochhammer needs a > 0")
    return math.lgamma(a + l) - math.lgamma(a)


def upper_incomplete_gamma_int(l_plus_1: int, x: float) -> float:
    """Gamma(l+1, x) = e^{-x} sum_{m=0}^{l} l!/m! x^m for integer order."""
    if int(l_plus_1) != l_plus_1 or l_plus_1 < 1:
        raise ValueError(f"order must be an integer >= 1, got {l_plus_1}")
    if x < 0:
        raise ValueError(f"x must be non-negative, got {x}")
    l = int(l_plus_1) - 1
    # Horner, highest power first; coefficient of x^m is l!/m!
    total = 0.0
    coef = 1.0
    for m in range(l, -1, -1):
        total = total * x + coef
        coef *= m
    return math.exp(-x) * total
