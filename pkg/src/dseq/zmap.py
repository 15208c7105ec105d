"""Square-shell enumeration of N x N and the flattening of a double sequence.

Coordinates are 1-based here: shell s holds the pairs with max(m, n) = s,
visited as (1, s), (2, s), ..., (s, s), (s, s-1), ..., (s, 1), so the shell
fills the integers (s-1)^2 + 1 .. s^2.
"""
from __future__ import annotations

import math

from .errors import IndexOutOfDomain
from .seqcore import DoubleSequence


def _positive(*vals: int) -> None:
    for v in vals:
        if isinstance(v, bool) or int(v) != v or v < 1:
            raise IndexOutOfDomain(f"expected a positive integer, got {v!r}")


def phi(m: int, n: int) -> int:
    _positive(m, n)
    m, n = int(m), int(n)
    if n >= m:
        return (n - 1) ** 2 + m
    return m * m - n + 1


def phi_inv(i: int) -> tuple[int, int]:
    _positive(i)
    i = int(i)
    s = math.isqrt(i - 1) + 1  # ceil(sqrt(i))
    r = i - (s - 1) ** 2
    if r <= s:
        return (r, s)
    return (s, s * s - i + 1)


def flatten(x: DoubleSequence, count: int) -> list:
    """z_i = x at phi_inv(i), shifted to 0-based indices, for i = 1..count."""
    _positive(count)
    out = []
    for i in range(1, int(count) + 1):
        m, n = phi_inv(i)
        out.append(x.at(m - 1, n - 1))
    return out
