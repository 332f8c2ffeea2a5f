"""Probabilistic verification layer.

Floating point is permitted here (compensated summation only); exact
arithmetic is reserved for the analytic bounds being checked. Every
report is a pure function of its inputs and seed: sign bits come from a
counter-based generator with random access, so trials replay exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.random import Generator, Philox

from .errors import LevelMissing, NoOracle, PreconditionError
from .rationals import Rational, ZERO, isqrt_exact, rational_str
from .series import SeriesSpec

_BLOCK = 1024
_GENERATOR_ID = f"philox4x64:block{_BLOCK}"


class SignSequence:
    """Replayable bit sequence with random access.

    Bit n depends only on (seed, generator id, n): bits are produced in
    fixed-size blocks from a counter-based generator keyed by the seed,
    with the block number as the counter.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator_id = _GENERATOR_ID
        self._blocks: dict[int, np.ndarray] = {}

    def _block(self, b: int) -> np.ndarray:
        cached = self._blocks.get(b)
        if cached is None:
            gen = Generator(Philox(key=self.seed, counter=[0, 0, 0, b]))
            cached = gen.integers(0, 2, size=_BLOCK, dtype=np.uint8)
            self._blocks[b] = cached
        return cached

    def bit(self, n: int) -> int:
        if n < 0:
            raise PreconditionError("bit index must be >= 0")
        return int(self._block(n // _BLOCK)[n % _BLOCK])

    def bits_array(self, count: int) -> np.ndarray:
        """Bits 0..count-1 as a uint8 array."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint8)
        nblocks = (count + _BLOCK - 1) // _BLOCK
        return np.concatenate([self._block(b) for b in range(nblocks)])[:count]


@dataclass(frozen=True)
class CauchyName:
    """Approximation thresholds for a square-summable magnitude series.

    Level m cuts the series at ``thresholds[m]``, the least index whose
    oracle squared-tail bound is at most 1/8^(m+1); the recorded bound
    certifies the level.
    """

    magnitudes: SeriesSpec
    thresholds: tuple[int, ...]
    tail_bounds: tuple[Rational, ...]

    def __post_init__(self):
        for m, (i, bound) in enumerate(zip(self.thresholds, self.tail_bounds)):
            if bound > Rational(1, 8 ** (m + 1)):
                raise PreconditionError(
                    f"level {m}: tail bound {bound} exceeds 1/8^{m + 1}"
                )
            if m and i < self.thresholds[m - 1]:
                raise PreconditionError("thresholds must be nondecreasing")

    @property
    def levels(self) -> int:
        return len(self.thresholds)


def compute_thresholds(a: SeriesSpec, levels: int, search_cap: int = 2 ** 62) -> CauchyName:
    """Least cut indices certified by the series' squared-tail oracle.

    Level m wants the least i whose oracle bound is at most 1/8^(m+1);
    leastness is relative to the oracle, found by doubling then binary
    search (the oracle is declared nonincreasing, and the endpoints of
    the answer are verified).
    """
    if a.tail_square_sum is None:
        raise NoOracle(f"{a.name}: thresholds need a tail-square-sum oracle")
    if levels < 1:
        raise PreconditionError("levels must be >= 1")
    thresholds: list[int] = []
    bounds: list[Rational] = []
    lo_start = 0
    for m in range(levels):
        want = Rational(1, 8 ** (m + 1))
        if a.tail_bound_at(lo_start) <= want:
            i = lo_start
        else:
            lo, hi = lo_start, max(lo_start * 2, 1)
            while a.tail_bound_at(hi) > want:
                lo = hi
                hi *= 2
                if hi > search_cap:
                    raise PreconditionError(
                        f"{a.name}: no index with tail bound <= {want} below {search_cap}"
                    )
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if a.tail_bound_at(mid) <= want:
                    hi = mid
                else:
                    lo = mid
            i = hi
        if i > 0 and a.tail_bound_at(i - 1) <= want:
            raise PreconditionError(f"{a.name}: tail oracle is not nonincreasing")
        thresholds.append(i)
        bounds.append(a.tail_bound_at(i))
        lo_start = i
    return CauchyName(a, tuple(thresholds), tuple(bounds))


@dataclass(frozen=True)
class StochasticReport:
    """Common shape for Monte Carlo / exact verification results."""

    operation: str
    inputs: dict
    seed: Optional[int]
    trials: Optional[int]
    estimate: float
    bound: float
    slack: float
    passed: bool
    degenerate: bool = False
    exact_probability: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "operation": self.operation,
            "inputs": self.inputs,
            "seed": self.seed,
            "trials": self.trials,
            "estimate": self.estimate,
            "bound": self.bound,
            "slack": self.slack,
            "pass": self.passed,
        }
        if self.degenerate:
            out["degenerate"] = True
        if self.exact_probability is not None:
            out["exact_probability"] = self.exact_probability
        return out


MONTE_CARLO = "monte-carlo"
EXACT = "exact"


def kolmogorov_check(
    variances: Sequence[Rational],
    epsilon: Rational,
    trials: int = 0,
    seed: int = 0,
    mode: str = MONTE_CARLO,
) -> StochasticReport:
    """Check the maximal-inequality bound for independent signs.

    Each variable is an independent sign times sqrt(variance); the bound
    on P[max prefix sum >= epsilon] is (sum of variances) / epsilon^2. A
    bound >= 1 is vacuous: reported as degenerate, never failed. Exact
    mode enumerates every sign pattern (variances must be perfect
    squares of rationals) and compares exactly; Monte Carlo mode passes
    within three-sigma slack of the bound.
    """
    variances = [Rational(v) for v in variances]
    if not variances:
        raise PreconditionError("need at least one variance")
    if any(v < 0 for v in variances):
        raise PreconditionError("variances must be >= 0")
    epsilon = Rational(epsilon)
    if epsilon <= 0:
        raise PreconditionError("epsilon must be > 0")
    bound = sum(variances, ZERO) / (epsilon * epsilon)
    degenerate = bound >= 1
    inputs = {
        "variances": [rational_str(v) for v in variances],
        "epsilon": rational_str(epsilon),
        "mode": mode,
    }

    if mode == EXACT:
        sigmas = [isqrt_exact(v) for v in variances]
        if any(s is None for s in sigmas):
            raise PreconditionError(
                "exact mode needs variances with rational square roots"
            )
        n = len(sigmas)
        hits = 0
        for pattern in itertools.product((1, -1), repeat=n):
            acc = ZERO
            for sgn, s in zip(pattern, sigmas):
                acc = acc + (s if sgn > 0 else -s)
                if acc >= epsilon:
                    hits += 1
                    break
        prob = Rational(hits) / (2 ** n)
        passed = bool(degenerate or prob <= bound)
        return StochasticReport(
            "kolmogorov", inputs, None, None,
            estimate=float(prob), bound=float(bound), slack=0.0,
            passed=passed, degenerate=bool(degenerate),
            exact_probability=rational_str(prob),
        )

    if mode != MONTE_CARLO:
        raise PreconditionError(f"unknown mode {mode!r}")
    if trials < 1:
        raise PreconditionError("Monte Carlo mode needs trials >= 1")
    sigmas_f = np.array([math.sqrt(float(v)) for v in variances])
    rng = Generator(Philox(key=seed))
    eps_f = float(epsilon)
    hits = 0
    chunk = max(1, min(trials, 1 << 16))
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        signs = 1.0 - 2.0 * rng.integers(0, 2, size=(take, len(sigmas_f)))
        prefix = np.cumsum(signs * sigmas_f, axis=1)
        hits += int(np.count_nonzero(prefix.max(axis=1) >= eps_f))
        done += take
    estimate = hits / trials
    bf = float(bound)
    if degenerate:
        slack = 0.0
        passed = True
    else:
        slack = 3.0 * math.sqrt(bf * (1.0 - bf) / trials)
        passed = estimate <= bf + slack
    return StochasticReport(
        "kolmogorov", inputs, seed, trials,
        estimate=estimate, bound=bf, slack=slack,
        passed=bool(passed), degenerate=bool(degenerate),
    )


def dmeas_pair_check(
    name: CauchyName,
    signs: SignSequence,
    j: int,
    m: int,
    trials: int,
) -> StochasticReport:
    """Monte Carlo bound on the mean truncated distance between two
    approximation levels.

    Levels j > m cut the series at thresholds i_j > i_m; the distance of
    one draw is min(|sum of randomly signed terms over [i_m, i_j)|, 1)
    and its mean must stay within 1/2^m plus three-sigma slack.
    """
    if j <= m:
        raise PreconditionError("need j > m")
    if j >= name.levels or m >= name.levels:
        raise LevelMissing(f"levels ({j}, {m}) not stored (have {name.levels})")
    if trials < 1:
        raise PreconditionError("need trials >= 1")
    i_m, i_j = name.thresholds[m], name.thresholds[j]
    terms = np.array([float(name.magnitudes.term_at(n)) for n in range(i_m, i_j)])
    rng = Generator(Philox(key=signs.seed, counter=[0, trials, j, m]))
    width = len(terms)
    total = 0.0
    total_sq = 0.0
    chunk = max(1, min(trials, max(1, (1 << 22) // max(width, 1))))
    done = 0
    while done < trials:
        take = min(chunk, trials - done)
        if width:
            draw = 1.0 - 2.0 * rng.integers(0, 2, size=(take, width))
            dist = np.minimum(np.abs((draw * terms).sum(axis=1)), 1.0)
        else:
            dist = np.zeros(take)
        total += float(dist.sum())
        total_sq += float((dist * dist).sum())
        done += take
    estimate = total / trials
    var = max(total_sq / trials - estimate * estimate, 0.0)
    slack = 3.0 * math.sqrt(var / trials)
    bound = 1.0 / (2 ** m)
    return StochasticReport(
        "dmeas-pair",
        {"j": j, "m": m, "i_j": i_j, "i_m": i_m,
         "series": name.magnitudes.name, "generator": signs.generator_id},
        signs.seed, trials,
        estimate=estimate, bound=bound, slack=slack,
        passed=bool(estimate <= bound + slack),
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Pass fraction of the two-horizon stability experiment."""

    operation: str
    inputs: dict
    seeds: int
    pass_count: int
    deltas: tuple[float, ...] = field(repr=False)

    @property
    def pass_fraction(self) -> float:
        return self.pass_count / self.seeds

    def to_dict(self) -> dict:
        return {
            "operation": self.operation,
            "inputs": self.inputs,
            "seeds": self.seeds,
            "pass_count": self.pass_count,
            "pass_fraction": self.pass_fraction,
            "max_delta": max(self.deltas) if self.deltas else 0.0,
        }


def _compensated_sum(values: np.ndarray) -> float:
    """Block-pairwise summation finished by exactly rounded fsum."""
    if values.size == 0:
        return 0.0
    blocks = values[: (values.size // 256) * 256].reshape(-1, 256).sum(axis=1)
    rest = values[(values.size // 256) * 256:]
    return math.fsum(itertools.chain(blocks.tolist(), rest.tolist()))


def rademacher_convergence_experiment(
    magnitudes: SeriesSpec,
    seeds: int,
    horizons: tuple[int, int],
    tolerance: Rational,
    permutation=None,
) -> ConvergenceReport:
    """Random-sign stability between two horizons, seed by seed.

    For each seed the randomly signed series (optionally composed with a
    permutation program) is summed to both horizons on the compensated
    float path; a seed passes when the two sums differ by at most the
    tolerance. The squared-tail oracle is required: it is what justifies
    interpreting the tolerance as a tail bound.
    """
    h1, h2 = horizons
    if not (1 <= h1 < h2):
        raise PreconditionError("need 1 <= h1 < h2")
    if seeds < 1:
        raise PreconditionError("need seeds >= 1")
    if magnitudes.tail_square_sum is None:
        raise NoOracle(f"{magnitudes.name}: experiment needs a tail oracle")
    tol = float(Rational(tolerance))

    if permutation is not None:
        order = np.array(permutation.prefix(h2), dtype=np.int64)
    else:
        order = np.arange(h2, dtype=np.int64)
    mags = np.array([float(magnitudes.term_at(int(v))) for v in order])
    bit_count = int(order.max()) + 1

    deltas: list[float] = []
    passes = 0
    for seed in range(seeds):
        seq = SignSequence(seed)
        bits = seq.bits_array(bit_count)[order]
        signed = mags * (1.0 - 2.0 * bits)
        s1 = _compensated_sum(signed[:h1])
        s2 = s1 + _compensated_sum(signed[h1:h2])
        delta = abs(s2 - s1)
        deltas.append(delta)
        if delta <= tol:
            passes += 1
    return ConvergenceReport(
        "rademacher-convergence",
        {
            "series": magnitudes.name,
            "h1": h1,
            "h2": h2,
            "tolerance": rational_str(Rational(tolerance)),
            "permutation": permutation.name if permutation is not None else "identity",
            "generator": _GENERATOR_ID,
        },
        seeds,
        passes,
        tuple(deltas),
    )
