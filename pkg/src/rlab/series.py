"""Series constructors: built-in conditionally convergent series, padding
by a growth function, random-sign series, and greedy rearrangement
targeting.

Every term is an exact Rational. Conditional convergence is a declared
property, never detected; constructors validate only violations they can
observe.
"""

from __future__ import annotations

import bisect
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

from .errors import (
    ExhaustedSign,
    NoOracle,
    NotIncreasing,
    ParseError,
    PreconditionError,
    RlabError,
    TermUndefined,
    step_budget,
)
from .rationals import HAVE_GMPY2, Rational, ZERO, parse_rational, tree_sum
from .permutations import PermutationProg

try:
    import gmpy2
except ImportError:  # pragma: no cover
    gmpy2 = None


@dataclass
class SeriesSpec:
    """A rule producing the exact rational term at each index.

    ``tail_square_sum``, when present, maps an index i to an upper bound
    on the sum of squared terms from i on; it must be nonnegative and
    nonincreasing in i.
    """

    name: str
    term: Callable[[int], Rational]
    tail_square_sum: Optional[Callable[[int], Rational]] = None
    conditionally_convergent: bool = False

    def term_at(self, n: int) -> Rational:
        if n < 0:
            raise TermUndefined(f"{self.name}: negative index {n}")
        try:
            return self.term(n)
        except RlabError:
            raise
        except Exception as exc:
            raise TermUndefined(f"{self.name}: no term at {n}: {exc}") from exc

    def tail_bound_at(self, i: int) -> Rational:
        if self.tail_square_sum is None:
            raise NoOracle(f"{self.name}: no tail-square-sum oracle")
        bound = self.tail_square_sum(i)
        if bound < 0:
            raise PreconditionError(f"{self.name}: tail bound at {i} is negative")
        return bound


STRICTLY_INCREASING = "strictly-increasing"
UNRESTRICTED = "unrestricted"


@dataclass
class GrowthFunction:
    """An index-to-index rule with a declared monotonicity property."""

    rule: Callable[[int], int]
    declared: str = UNRESTRICTED
    name: str = "growth"

    def __call__(self, n: int) -> int:
        return self.rule(n)


def linear_growth(a: int, b: int) -> GrowthFunction:
    """f(n) = a*n + b."""
    declared = STRICTLY_INCREASING if a >= 1 else UNRESTRICTED
    return GrowthFunction(lambda n: a * n + b, declared, f"linear:{a},{b}")


# -- built-in series ------------------------------------------------------


def alt_harmonic() -> SeriesSpec:
    """1 - 1/2 + 1/3 - ...: the standard conditionally convergent series.

    Tail oracle: the squared tail from index i is below 1/i for i >= 1.
    """

    def term(n: int) -> Rational:
        return Rational(1, n + 1) if n % 2 == 0 else Rational(-1, n + 1)

    def tail(i: int) -> Rational:
        return Rational(2) if i == 0 else Rational(1, i)

    return SeriesSpec("alt-harmonic", term, tail, conditionally_convergent=True)


def harmonic_magnitudes() -> SeriesSpec:
    """All-positive magnitudes 1/(n+1), same squared-tail oracle."""

    def tail(i: int) -> Rational:
        return Rational(2) if i == 0 else Rational(1, i)

    return SeriesSpec("harmonic-mags", lambda n: Rational(1, n + 1), tail)


def geometric_series() -> SeriesSpec:
    """2^-n with the exact closed-form squared-tail (4/3) * 4^-i."""

    def tail(i: int) -> Rational:
        return Rational(4, 3) / (4 ** i)

    return SeriesSpec("geometric", lambda n: Rational(1, 2 ** n), tail)


def zero_series() -> SeriesSpec:
    return SeriesSpec("zero", lambda n: ZERO, lambda i: ZERO)


# -- padding --------------------------------------------------------------


def pad_series(a: SeriesSpec, f: GrowthFunction) -> SeriesSpec:
    """Spread the terms of ``a`` along the orbit of ``f`` from 0.

    The padded series carries a's n-th term at index f^n(0) and zero
    everywhere else. The orbit is memoized and extended on demand; a
    strict-increase violation observed during evaluation raises.
    """
    if f.declared != STRICTLY_INCREASING:
        raise PreconditionError(f"{f.name}: padding needs a strictly increasing rule")
    first = f.rule(0)
    if first <= 0:
        raise NotIncreasing(f"{f.name}: f(0) = {first} must be > 0")

    orbit = [0]
    lock = threading.Lock()

    def extend_past(k: int) -> None:
        with lock:
            while orbit[-1] < k:
                nxt = f.rule(orbit[-1])
                if nxt <= orbit[-1]:
                    raise NotIncreasing(
                        f"{f.name}: f({orbit[-1]}) = {nxt} is not an increase"
                    )
                orbit.append(nxt)

    def find(k: int) -> int | None:
        """Orbit position of k, or None if k is off the orbit."""
        extend_past(k)
        pos = bisect.bisect_left(orbit, k)
        return pos if pos < len(orbit) and orbit[pos] == k else None

    def term(k: int) -> Rational:
        n = find(k)
        return a.term_at(n) if n is not None else ZERO

    tail = None
    if a.tail_square_sum is not None:

        def tail(i: int) -> Rational:
            extend_past(i)
            return a.tail_bound_at(bisect.bisect_left(orbit, i))

    return SeriesSpec(f"padded:{a.name}:{f.name}", term, tail,
                      conditionally_convergent=a.conditionally_convergent)


def orbit_points(f: GrowthFunction, count: int) -> list[int]:
    """The first ``count`` orbit values f^0(0)=0, f^1(0), ..."""
    pts = [0]
    while len(pts) < count:
        nxt = f.rule(pts[-1])
        if nxt <= pts[-1]:
            raise NotIncreasing(f"{f.name}: f({pts[-1]}) = {nxt} is not an increase")
        pts.append(nxt)
    return pts


# -- random signs ----------------------------------------------------------


def random_sign_series(magnitudes: SeriesSpec, signs: Callable[[int], int],
                       name: str | None = None) -> SeriesSpec:
    """Attach a sign bit per index: term n = (-1)^signs(n) * magnitude n.

    The squared-tail oracle carries over unchanged.
    """

    def term(n: int) -> Rational:
        m = magnitudes.term_at(n)
        if m < 0:
            raise PreconditionError(
                f"{magnitudes.name}: magnitude at {n} is negative"
            )
        return -m if signs(n) & 1 else m

    return SeriesSpec(
        name or f"rand-sign:{magnitudes.name}",
        term,
        magnitudes.tail_square_sum,
        conditionally_convergent=magnitudes.conditionally_convergent,
    )


# -- greedy rearrangement ---------------------------------------------------


@dataclass(frozen=True)
class Finite:
    value: Rational


PLUS_INFINITY = "plus-inf"
MINUS_INFINITY = "minus-inf"

Target = Union[Finite, str]


def parse_target(text: str) -> Target:
    text = text.strip()
    if text == PLUS_INFINITY:
        return PLUS_INFINITY
    if text == MINUS_INFINITY:
        return MINUS_INFINITY
    try:
        return Finite(parse_rational(text))
    except ValueError as exc:
        raise ParseError(f"bad rearrangement target {text!r}") from exc


class _ExactShadow:
    """Running sum with certified comparisons.

    Keeps directed-rounding float bounds on the exact sum; comparisons
    against a rational threshold are answered from the bounds and fall
    back to an exact recomputation of the whole chosen prefix only when
    the bounds straddle the threshold (essentially never at 96 bits).
    Without gmpy2 the sum is simply kept exact.
    """

    def __init__(self, series: SeriesSpec):
        self._series = series
        self._chosen: list[int] = []
        if HAVE_GMPY2:
            self._down = gmpy2.context(precision=96, round=gmpy2.RoundDown)
            self._up = gmpy2.context(precision=96, round=gmpy2.RoundUp)
            self._lo = gmpy2.mpfr(0)
            self._hi = gmpy2.mpfr(0)
        else:
            self._sum = ZERO

    def add(self, index: int, term: Rational) -> None:
        self._chosen.append(index)
        if HAVE_GMPY2:
            self._lo = self._down.add(self._lo, term)
            self._hi = self._up.add(self._hi, term)
        else:
            self._sum = self._sum + term

    def exact(self) -> Rational:
        s = tree_sum([self._series.term_at(i) for i in self._chosen])
        if HAVE_GMPY2:
            zero = gmpy2.mpfr(0)
            self._lo = self._down.add(zero, s)
            self._hi = self._up.add(zero, s)
        return s

    def at_most(self, threshold: Rational) -> bool:
        """Certified ``sum <= threshold``."""
        if not HAVE_GMPY2:
            return self._sum <= threshold
        if self._hi <= threshold:
            return True
        if self._lo > threshold:
            return False
        return self.exact() <= threshold

    def at_least(self, threshold: Rational) -> bool:
        """Certified ``sum >= threshold``."""
        if not HAVE_GMPY2:
            return self._sum >= threshold
        if self._lo >= threshold:
            return True
        if self._hi < threshold:
            return False
        return self.exact() >= threshold


def _sign_scanner(series: SeriesSpec, positive: bool, budget: int) -> Iterator[int]:
    """Enumerate indices of one sign class (zero terms count as positive)."""
    n = 0
    idle = 0
    while True:
        t = series.term_at(n)
        hit = (t >= 0) if positive else (t < 0)
        if hit:
            idle = 0
            yield n
        else:
            idle += 1
            if idle >= budget:
                raise ExhaustedSign(
                    f"{series.name}: no further "
                    f"{'positive' if positive else 'negative'} terms within "
                    f"budget; series is not conditionally convergent as declared"
                )
        n += 1


def riemann_rearrange(
    a: SeriesSpec,
    target: Target,
    horizon: int = 1,
    budget: int | None = None,
) -> PermutationProg:
    """Greedy rearrangement steering partial sums toward the target.

    While at or below the target the next unused positive-term index is
    taken, while above it the next unused negative-term index (ties take
    a positive term). For the infinite targets the threshold moves by one
    after each corrective step, so the sums chase 1, 2, 3, ... (or their
    negatives). Returns a permutation prefix of length >= horizon that
    stays extendable on demand.
    """
    if not a.conditionally_convergent:
        raise PreconditionError(
            f"{a.name}: rearrangement needs a series declared conditionally convergent"
        )
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    cap = step_budget(budget)

    def gen() -> Iterator[int]:
        shadow = _ExactShadow(a)
        positives = _sign_scanner(a, True, cap)
        negatives = _sign_scanner(a, False, cap)
        if isinstance(target, Finite):
            goal = target.value
            while True:
                if shadow.at_most(goal):
                    idx = next(positives)
                else:
                    idx = next(negatives)
                shadow.add(idx, a.term_at(idx))
                yield idx
        elif target == PLUS_INFINITY:
            goal = 1
            while True:
                if shadow.at_most(Rational(goal)):
                    idx = next(positives)
                else:
                    idx = next(negatives)
                    goal += 1
                shadow.add(idx, a.term_at(idx))
                yield idx
        else:
            goal = -1
            while True:
                if shadow.at_least(Rational(goal)):
                    idx = next(negatives)
                else:
                    idx = next(positives)
                    goal -= 1
                shadow.add(idx, a.term_at(idx))
                yield idx

    if isinstance(target, Finite):
        label = f"riemann:{target.value}"
    else:
        label = f"riemann:{target}"
    perm = PermutationProg.from_generator(gen(), label)
    perm.ensure(horizon, budget)
    return perm


# -- CLI grammar -------------------------------------------------------------


def parse_series(spec: str) -> SeriesSpec:
    """Parse the series grammar: alt-harmonic | zero | geometric |
    harmonic-mags | padded:<f-spec> | rand-sign:<seed>."""
    spec = spec.strip()
    if spec == "alt-harmonic":
        return alt_harmonic()
    if spec == "zero":
        return zero_series()
    if spec == "geometric":
        return geometric_series()
    if spec == "harmonic-mags":
        return harmonic_magnitudes()
    if spec.startswith("padded:"):
        return pad_series(alt_harmonic(), parse_growth(spec.split(":", 1)[1]))
    if spec.startswith("rand-sign:"):
        from .stochastic import SignSequence

        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ParseError(f"bad seed in {spec!r}") from exc
        seq = SignSequence(seed)
        return random_sign_series(harmonic_magnitudes(), seq.bit,
                                  name=f"rand-sign:{seed}")
    raise ParseError(f"unknown series spec {spec!r}")


def parse_growth(spec: str) -> GrowthFunction:
    """Parse the growth grammar: linear:<a>,<b> meaning f(n) = a*n + b."""
    spec = spec.strip()
    if spec.startswith("linear:"):
        body = spec.split(":", 1)[1]
        try:
            a, b = (int(x) for x in body.split(","))
        except ValueError as exc:
            raise ParseError(f"bad linear growth spec {spec!r}") from exc
        return linear_growth(a, b)
    raise ParseError(f"unknown growth spec {spec!r}")
