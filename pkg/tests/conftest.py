"""Shared oracles for the test suite.

The oracles here are deliberately independent of the code paths they
check: plain sequential accumulation, brute-force set comparisons, and
the alternating-series bracket.
"""

from __future__ import annotations

import pytest

from rlab.rationals import Rational, ZERO


def naive_partial_sum(series, perm, count: int) -> Rational:
    """Sequential exact sum of the first ``count`` permuted terms."""
    acc = ZERO
    for n in range(count):
        acc = acc + series.term_at(perm.value(n))
    return acc


def naive_sum(terms) -> Rational:
    acc = ZERO
    for t in terms:
        acc = acc + t
    return acc


@pytest.fixture(scope="session")
def ln2_bracket():
    """Exact rationals (lo, hi) with lo < ln 2 < hi, width < 5.1e-5.

    Consecutive partial sums of the alternating harmonic series bracket
    its limit: even-count sums lie below, odd-count sums above.
    """
    acc = ZERO
    n = 20000
    for m in range(n):
        acc = acc + Rational(1 if m % 2 == 0 else -1, m + 1)
    lo = acc
    hi = acc + Rational(1, n + 1)
    return lo, hi


def within_of_ln2(value, radius, ln2_bracket) -> bool:
    """Certified |value - ln 2| < radius using the exact bracket."""
    lo, hi = ln2_bracket
    return (lo - value < radius) and (value - hi < radius)
