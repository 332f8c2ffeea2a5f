"""Stage-wise permutation programs and permutation constructions.

A :class:`PermutationProg` is a bijection on an initial segment of the
naturals, grown on demand from a value source. All constructions here
(the mixer, bound functions, dominating growth functions, escape-layer
verdicts) operate on such programs and never on raw index maps, so every
prefix they touch is a checked bijection.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .errors import (
    PermUndefined,
    PreconditionError,
    SearchBudgetExceeded,
    step_budget,
)
from .rationals import Rational, ZERO


@dataclass(frozen=True)
class StageRecord:
    """One completed construction stage: which kind of agreement it
    realized and at which index."""

    stage: int
    kind: str
    index: int


class PermutationProg:
    """A bijection on [0, L) built in stages and extendable on demand.

    The domain is always an initial segment; values are checked for
    injectivity as they arrive. The inverse map is maintained jointly.
    Completed prefixes never change, so snapshots are safe to share.
    """

    def __init__(self, source: Iterator[int], name: str = "perm"):
        self.name = name
        self._source = source
        self._values: list[int] = []
        self._running_max: list[int] = []
        self._inverse: dict[int, int] = {}
        self.stage_log: list[StageRecord] = []

    # -- construction -------------------------------------------------

    @classmethod
    def from_function(cls, fn: Callable[[int], int], name: str = "perm") -> "PermutationProg":
        """Wrap a total bijection given as a plain function."""
        return cls((fn(n) for n in itertools.count()), name)

    @classmethod
    def from_generator(cls, gen: Iterator[int], name: str = "perm") -> "PermutationProg":
        return cls(gen, name)

    def _append(self, value: int) -> None:
        if value < 0:
            raise PermUndefined(f"{self.name}: negative value {value}")
        if value in self._inverse:
            raise PermUndefined(
                f"{self.name}: value {value} repeated at positions "
                f"{self._inverse[value]} and {len(self._values)}; not injective"
            )
        self._inverse[value] = len(self._values)
        self._running_max.append(
            value if not self._values else max(value, self._running_max[-1])
        )
        self._values.append(value)

    # -- evaluation ---------------------------------------------------

    def __len__(self) -> int:
        """Current domain length L (domain is [0, L))."""
        return len(self._values)

    def ensure(self, length: int, budget: int | None = None) -> None:
        """Extend the domain to cover [0, length)."""
        if length > step_budget(budget):
            raise SearchBudgetExceeded(
                f"{self.name}: extension to {length} exceeds budget"
            )
        while len(self._values) < length:
            try:
                self._append(next(self._source))
            except StopIteration as exc:
                raise PermUndefined(
                    f"{self.name}: cannot be extended past {len(self._values)}"
                ) from exc

    def value(self, n: int, budget: int | None = None) -> int:
        if n < 0:
            raise PermUndefined(f"{self.name}: negative position {n}")
        self.ensure(n + 1, budget)
        return self._values[n]

    __call__ = value

    def prefix(self, length: int, budget: int | None = None) -> list[int]:
        self.ensure(length, budget)
        return self._values[:length]

    def inverse_of(self, value: int, budget: int | None = None) -> int:
        """Position n with p(n) == value, extending the prefix as needed."""
        cap = step_budget(budget)
        while value not in self._inverse:
            if len(self._values) >= cap:
                raise SearchBudgetExceeded(
                    f"{self.name}: inverse search for {value} exceeded "
                    f"budget {cap}"
                )
            try:
                self._append(next(self._source))
            except StopIteration as exc:
                raise PermUndefined(
                    f"{self.name}: value {value} never enumerated"
                ) from exc
        return self._inverse[value]

    def inverse_cover(self, values: Iterable[int], budget: int | None = None) -> int:
        """max over the given values of their positions, extending on demand."""
        missing = set(values) - self._inverse.keys()
        cap = step_budget(budget)
        while missing:
            if len(self._values) >= cap:
                raise SearchBudgetExceeded(
                    f"{self.name}: inverse cover exceeded budget {cap}"
                )
            try:
                v = next(self._source)
            except StopIteration as exc:
                raise PermUndefined(f"{self.name}: source exhausted") from exc
            self._append(v)
            missing.discard(v)
        return max(self._inverse[v] for v in set(values))

    def prefix_max(self, length: int, budget: int | None = None) -> int:
        """max of the first ``length`` values."""
        if length < 1:
            raise PreconditionError("prefix_max needs length >= 1")
        self.ensure(length, budget)
        return self._running_max[length - 1]

    def range_set(self, length: int) -> set[int]:
        return set(self.prefix(length))


# -- built-in permutations ---------------------------------------------


def identity_perm() -> PermutationProg:
    return PermutationProg.from_function(lambda n: n, "identity")


def swap_pairs_perm() -> PermutationProg:
    """0<->1, 2<->3, ..."""
    return PermutationProg.from_function(
        lambda n: n + 1 if n % 2 == 0 else n - 1, "swap-pairs"
    )


def block_reverse_perm(width: int) -> PermutationProg:
    """Reverse each consecutive block of the given width."""
    if width < 1:
        raise PreconditionError("block width must be >= 1")
    return PermutationProg.from_function(
        lambda n: (n // width) * width + (width - 1 - n % width),
        f"block-reverse:{width}",
    )


def prefix_shuffle_perm(prefix: Sequence[int], name: str = "shuffle") -> PermutationProg:
    """A finite shuffle of [0, len(prefix)) followed by the identity."""
    if sorted(prefix) != list(range(len(prefix))):
        raise PreconditionError("prefix must be a permutation of an initial segment")

    def gen() -> Iterator[int]:
        yield from prefix
        yield from itertools.count(len(prefix))

    return PermutationProg.from_generator(gen(), name)


# -- the mixer ----------------------------------------------------------


def set_prefix_agrees(q: PermutationProg, p: PermutationProg, i: int) -> bool:
    """Exact test of {q(n): n <= i} == {p(n): n <= i}."""
    return q.range_set(i + 1) == p.range_set(i + 1)


def _agreement_stage(
    q_values: list[int],
    q_inverse: dict[int, int],
    target: PermutationProg,
    last_logged: int,
    budget: int | None,
) -> int:
    """Run one agreement stage against the target permutation.

    Extends the prefix (values/inverse, domain stays an initial segment)
    until some index i > last_logged satisfies the exact set-prefix
    agreement {q(n): n <= i} == {target(n): n <= i}, and returns i.
    """
    def append(v: int) -> None:
        if v in q_inverse:
            raise PermUndefined(f"mixer: value {v} already placed")
        q_inverse[v] = len(q_values)
        q_values.append(v)

    while True:
        i = target.inverse_cover(q_values, budget)
        if i >= len(q_values):
            # Extend bijectively up to i: unused target values in
            # increasing order to increasing positions.
            fill = sorted(set(target.prefix(i + 1)) - q_inverse.keys())
            for v in fill:
                append(v)
            if len(q_values) != i + 1:
                raise PermUndefined("mixer: fill did not close the prefix")
            return i
        # The current prefix already agrees at its last index.
        i = len(q_values) - 1
        if i > last_logged:
            return i
        # Force progress by following the target one step; the next value
        # is guaranteed fresh because the prefix sets currently coincide.
        append(target.value(len(q_values), budget))


def _mix(
    pa: PermutationProg,
    pb: PermutationProg,
    rounds: int,
    kinds: tuple[str, str],
    name: str,
    budget: int | None,
) -> PermutationProg:
    """Grouped two-phase mixer construction.

    Phase one realizes ``rounds`` exact set-prefix agreements with the
    first target, phase two ``rounds`` agreements with the second. The
    phases are grouped rather than interleaved: interleaving forces each
    new agreement index past the target's preimages of everything the
    other phase brought into range, which grows as an iterated
    exponential for rearrangements that starve one sign class. Grouping
    realizes the same two agreement families at reachable indices.

    Beyond the logged stages the program closes its range into an
    initial segment (one ascending fill) and continues as the identity.
    """
    if rounds < 1:
        raise PreconditionError("rounds must be >= 1")
    values = [0]
    inverse = {0: 0}
    log: list[StageRecord] = []
    stage_no = 0
    for kind, target in ((kinds[0], pa), (kinds[1], pb)):
        last = -1
        for _ in range(rounds):
            stage_no += 1
            last = _agreement_stage(values, inverse, target, last, budget)
            log.append(StageRecord(stage_no, kind, last))

    def extension() -> Iterator[int]:
        top = max(values)
        yield from sorted(set(range(top + 1)) - set(values))
        yield from itertools.count(top + 1)

    q = PermutationProg.from_generator(extension(), name)
    q._values = values
    q._inverse = inverse
    running = []
    top = -1
    for v in values:
        top = v if v > top else top
        running.append(top)
    q._running_max = running
    q.stage_log = log
    return q


def mixer(p: PermutationProg, rounds: int, budget: int | None = None) -> PermutationProg:
    """Build q with ``rounds`` exact set-prefix agreements with the
    identity and ``rounds`` with p, each recorded in the stage log."""
    return _mix(
        identity_perm(), p, rounds, ("identity", "p"), f"mix:{p.name}", budget
    )


def mixer2(
    p1: PermutationProg,
    p2: PermutationProg,
    rounds: int,
    budget: int | None = None,
) -> PermutationProg:
    """Two-target mixer: agreements with p1, then with p2."""
    return _mix(p1, p2, rounds, ("p1", "p2"), f"mix2:{p1.name};{p2.name}", budget)


# -- bound function and dominating growth -------------------------------


def bound_function_g(p: PermutationProg, n: int, budget: int | None = None) -> int:
    """The two-step max bound for a permutation.

    Returns g(n) = 1 + max{p(m): m <= a} with a = max{p^{-1}(k): k <= n},
    the least value guaranteeing the separation property: p(i) <= n and
    p(j) >= g(n) imply i <= j. (Values >= g lie strictly above every
    value on [0, a], so their positions lie strictly beyond a, while
    positions of values <= n lie within [0, a]. At the bare two-step max
    itself the implication can fail: the max may be attained before a.)
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    a = p.inverse_cover(range(n + 1), budget)
    return 1 + p.prefix_max(a + 1)


EVERYWHERE = "everywhere"
INFINITELY_OFTEN = "infinitely-often"


def dominating_f_for(
    perms: Sequence[PermutationProg],
    mode: str = EVERYWHERE,
    stride: int = 4,
    budget: int | None = None,
):
    """A strictly increasing growth function beating every bound function
    of the given permutations.

    Everywhere mode: f(n) = 1 + max(n+1, max_e g_e(n), f(n-1)+1).

    Infinitely-often mode: f follows the minimal strictly increasing
    baseline except at indices divisible by ``stride``, where it jumps
    above every g_e; jump values are rounded up to the next multiple of
    stride so the iterated orbit from 0 keeps landing on jump indices.
    """
    from .series import GrowthFunction, STRICTLY_INCREASING

    if mode not in (EVERYWHERE, INFINITELY_OFTEN):
        raise PreconditionError(f"unknown mode {mode!r}")
    if mode == INFINITELY_OFTEN and stride < 1:
        raise PreconditionError("stride must be >= 1")
    perms = list(perms)
    cache: list[int] = []
    # incremental preimage maxima: a_e(n) = max(a_e(n-1), p_e^{-1}(n)),
    # consulted for every n in order, so each bound value costs O(1)
    # beyond the underlying prefix extension
    a_trackers = [[-1] for _ in perms]

    def g_single(p: PermutationProg, tracker: list[int], n: int) -> int:
        while len(tracker) <= n + 1:
            k = len(tracker) - 1
            tracker.append(max(tracker[-1], p.inverse_of(k, budget)))
        a = tracker[n + 1]
        return 1 + p.prefix_max(a + 1, budget)

    def g_max(n: int) -> int:
        return max(
            (g_single(p, t, n) for p, t in zip(perms, a_trackers)), default=0
        )

    def rule(n: int) -> int:
        if n < 0:
            raise PreconditionError("growth functions are defined on naturals")
        while len(cache) <= n:
            m = len(cache)
            prev = cache[m - 1] if m else 0
            if mode == EVERYWHERE:
                v = 1 + max(m + 1, g_max(m), (prev + 1) if m else 0)
            else:
                base = max(prev + 1, m + 1)
                if m % stride == 0:
                    v = 1 + max(base, g_max(m))
                    v = ((v + stride - 1) // stride) * stride
                else:
                    v = base
            cache.append(v)
        return cache[n]

    name = mode if mode == EVERYWHERE else f"{mode}:{stride}"
    return GrowthFunction(rule, STRICTLY_INCREASING, name=f"dominating-{name}")


# -- escape layers -------------------------------------------------------


@dataclass(frozen=True)
class EscapeLayerReport:
    """Finite-stage band-membership verdict plus an escape witness.

    ``member`` holds when every inspected partial sum stays <= the bound.
    ``escape_block`` is a same-sign block of unused indices whose terms,
    appended to the prefix, push some partial sum past the bound; None
    when no such block was found within budget (the series has no
    positive mass left to find).
    """

    bound: Rational
    horizon: int
    member: bool
    first_violation: tuple[int, Rational] | None
    final_sum: Rational
    escape_block: tuple[int, ...] | None
    escape_sum: Rational | None


def escape_layer_Ek(
    series,
    k: Rational,
    p: PermutationProg,
    horizon: int,
    budget: int | None = None,
) -> EscapeLayerReport:
    """Check all partial sums of the permuted series against the bound k
    for indices ceil(k) <= m <= horizon, and produce an escape block."""
    if horizon < 0:
        raise PreconditionError("horizon must be >= 0")
    k = Rational(k)
    p.ensure(horizon + 1, budget)
    start = max(0, -(-k.numerator // k.denominator))  # ceil(k)
    acc = ZERO
    member = True
    violation: tuple[int, Rational] | None = None
    for m in range(horizon + 1):
        acc = acc + series.term_at(p.value(m))
        if m >= start and acc > k and member:
            member = False
            violation = (m, acc)
    used = p.range_set(horizon + 1)
    block: list[int] = []
    gain = ZERO
    escape_sum = None
    if member:
        cap = step_budget(budget)
        n = 0
        steps = 0
        while acc + gain <= k:
            if steps >= cap:
                block = []
                break
            if n not in used:
                t = series.term_at(n)
                if t > 0:
                    block.append(n)
                    gain = gain + t
            n += 1
            steps += 1
        else:
            escape_sum = acc + gain
    return EscapeLayerReport(
        bound=k,
        horizon=horizon,
        member=member,
        first_violation=violation,
        final_sum=acc,
        escape_block=tuple(block) if block else None,
        escape_sum=escape_sum,
    )


# -- CLI grammar ---------------------------------------------------------


def parse_permutation(spec: str, series=None, rounds: int = 5, budget: int | None = None) -> PermutationProg:
    """Parse the permutation grammar: identity | swap-pairs |
    block-reverse:<w> | riemann:<target> | mix:<inner> | mix2:<a>;<b>."""
    from .errors import ParseError

    spec = spec.strip()
    if spec == "identity":
        return identity_perm()
    if spec == "swap-pairs":
        return swap_pairs_perm()
    if spec.startswith("block-reverse:"):
        try:
            width = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ParseError(f"bad block width in {spec!r}") from exc
        return block_reverse_perm(width)
    if spec.startswith("riemann:"):
        from .series import parse_target, riemann_rearrange

        if series is None:
            raise PreconditionError("riemann permutations need a --series")
        target = parse_target(spec.split(":", 1)[1])
        return riemann_rearrange(series, target, horizon=1, budget=budget)
    if spec.startswith("mix:"):
        inner = parse_permutation(spec.split(":", 1)[1], series, rounds, budget)
        return mixer(inner, rounds, budget)
    if spec.startswith("mix2:"):
        body = spec.split(":", 1)[1]
        if ";" not in body:
            raise ParseError("mix2 needs two inner permutations separated by ';'")
        left, right = body.split(";", 1)
        return mixer2(
            parse_permutation(left, series, rounds, budget),
            parse_permutation(right, series, rounds, budget),
            rounds,
            budget,
        )
    raise ParseError(f"unknown permutation spec {spec!r}")
