"""Exact minor-unit money helpers.

Amounts are plain Python ``int`` values counted in minor currency units
(cents when ``decimals=2``).  Python integers never overflow, which covers
the 64-bit requirement for sums of up to 10**9 leaves of 10**9 units.
"""
from __future__ import annotations

from decimal import Decimal, InvalidOperation

Money = int


def parse_amount(text: str, decimals: int = 2) -> Money:
    """Convert a decimal currency string to integer minor units.

    >>> parse_amount("12.34")
    1234
    >>> parse_amount("84", decimals=0)
    84

    Raises ``ValueError`` when the value carries precision below one minor
    unit (``"0.005"`` with two decimals) or is not a number at all.
    """
    if decimals < 0:
        raise ValueError("decimals must be nonnegative")
    try:
        value = Decimal(str(text).strip())
    except InvalidOperation:
        raise ValueError(f"not a decimal amount: {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"not a finite amount: {text!r}")
    scaled = value.scaleb(decimals)
    if scaled != scaled.to_integral_value():
        raise ValueError(
            f"amount {text!r} has precision below one minor unit "
            f"({decimals} decimal places)"
        )
    return int(scaled)


def format_amount(value: Money, decimals: int = 2) -> str:
    if decimals == 0:
        return str(value)
    return str(Decimal(value).scaleb(-decimals).quantize(Decimal(1).scaleb(-decimals)))


def is_money(value: object) -> bool:
    # bool is an int subclass but never a valid amount
    return isinstance(value, int) and not isinstance(value, bool)
