"""Exact rational arithmetic backing.

Every value flowing through the exact layers is a `Rational`: an
arbitrary-precision fraction kept in canonical form (positive
denominator, numerator and denominator coprime). The backing type is
gmpy2's ``mpq`` when available, otherwise the stdlib ``Fraction``; both
canonicalize on every operation, which is exactly the invariant the
exact layers rely on.
"""

from __future__ import annotations

from typing import Union

try:
    from gmpy2 import mpq as _mpq

    Rational = _mpq
    HAVE_GMPY2 = True
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as Rational

    HAVE_GMPY2 = False

RationalLike = Union[int, str, "Rational"]

ZERO = Rational(0)


def rational(numerator: RationalLike, denominator: int = 1) -> Rational:
    """Build a canonical Rational from an int, a "p/q" string, or a Rational."""
    return Rational(numerator) / denominator if denominator != 1 else Rational(numerator)


def parse_rational(text: str) -> Rational:
    """Parse "3", "-3/4", or a decimal like "0.25" into an exact Rational."""
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Rational(int(num)) / Rational(int(den))
        if "." in text or "e" in text.lower():
            from fractions import Fraction

            return Rational(Fraction(text))
        return Rational(int(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc


def tree_sum(terms: list) -> Rational:
    """Sum a list of Rationals by pairwise halving.

    Equivalent to sequential addition but far cheaper on long runs of
    small-denominator terms: denominators combine bottom-up instead of
    being dragged through every step. Consumes the input list.
    """
    n = len(terms)
    if n == 0:
        return ZERO
    while n > 1:
        half = n // 2
        for i in range(half):
            terms[i] = terms[2 * i] + terms[2 * i + 1]
        if n % 2:
            terms[half] = terms[n - 1]
            n = half + 1
        else:
            n = half
    return terms[0]


def rational_str(q) -> str:
    """Canonical "p/q" (or "p" for integers) string form."""
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def isqrt_exact(q):
    """Exact square root of a Rational if it is a perfect square, else None."""
    num, den = q.numerator, q.denominator
    if num < 0:
        return None
    from math import isqrt

    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Rational(rn) / rd
    return None
