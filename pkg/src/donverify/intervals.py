"""Interval lookup for region boundaries ``[b0, b1), [b1, b2), ..., [b_{m-1}, b_m]``."""
from __future__ import annotations

from bisect import bisect_right
from typing import Sequence


def check_boundaries(boundaries: Sequence[int]) -> None:
    if len(boundaries) < 2:
        raise ValueError("need at least two boundaries")
    if len(boundaries) == 2 and boundaries[0] == boundaries[1]:
        return  # degenerate point range [a0, a0]
    for lo, hi in zip(boundaries, boundaries[1:]):
        if not lo < hi:
            raise ValueError(f"boundaries must be strictly ascending, got {lo} then {hi}")


def region_index(boundaries: Sequence[int], amount: int) -> int:
    """Index of the interval containing ``amount``; the last interval is closed."""
    lo, hi = boundaries[0], boundaries[-1]
    if amount < lo or amount > hi:
        raise ValueError(f"amount {amount} outside [{lo}, {hi}]")
    last = len(boundaries) - 2
    if amount == hi:
        return last
    return min(bisect_right(boundaries, amount) - 1, last)
