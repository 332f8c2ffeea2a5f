"""Exact partial-sum evaluation and finite-horizon behavior classification.

Everything here is exact: partial sums are Rationals computed by
block-tree addition, and the classification compares them with exact
arithmetic. The classification is an honest finite-horizon heuristic; it
has an Undetermined outcome and callers choose the window and gap
parameters that an independent oracle justifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

from .errors import InsufficientData, PreconditionError
from .permutations import PermutationProg
from .rationals import Rational, ZERO, rational_str, tree_sum
from .series import SeriesSpec

DEFAULT_OSC_GAP = Rational(1, 2)


@dataclass(frozen=True)
class ConvergedNear:
    """All window sums stayed within ``radius`` of the final sum."""

    value: Rational
    radius: Rational

    kind = "converged-near"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": rational_str(self.value),
                "radius": rational_str(self.radius),
                "value_float": float(self.value)}


@dataclass(frozen=True)
class DivergesPlus:
    kind = "diverges-plus"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class DivergesMinus:
    kind = "diverges-minus"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Oscillating:
    """Two checkpoint indices whose sums differ by more than the gap."""

    low_index: int
    high_index: int
    low_sum: Rational
    high_sum: Rational

    kind = "oscillating"

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "low_index": self.low_index, "high_index": self.high_index,
                "low_sum": rational_str(self.low_sum),
                "high_sum": rational_str(self.high_sum),
                "low_float": float(self.low_sum),
                "high_float": float(self.high_sum)}


@dataclass(frozen=True)
class Undetermined:
    kind = "undetermined"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


Classification = Union[ConvergedNear, DivergesPlus, DivergesMinus,
                       Oscillating, Undetermined]


@dataclass(frozen=True)
class PartialSumTrace:
    """Exact partial sums at checkpoints plus a behavior verdict.

    A checkpoint (m, s) records the exact sum s of the first m terms.
    Checkpoint indices are strictly increasing and never exceed the
    horizon (the total number of terms evaluated).
    """

    horizon: int
    checkpoints: tuple[tuple[int, Rational], ...]
    classification: Classification

    def __post_init__(self):
        prev = 0
        for m, _ in self.checkpoints:
            if m <= prev:
                raise PreconditionError("checkpoint indices must strictly increase")
            if m > self.horizon:
                raise PreconditionError("checkpoint index beyond horizon")
            prev = m
        if isinstance(self.classification, Oscillating):
            c = self.classification
            if abs(c.high_sum - c.low_sum) <= 0:
                raise PreconditionError("oscillation witnesses must differ")

    @property
    def final_sum(self) -> Rational:
        return self.checkpoints[-1][1]

    def sums_float(self) -> list[tuple[int, float]]:
        return [(m, float(s)) for m, s in self.checkpoints]


def default_window(count: int) -> int:
    """Last tenth of the checkpoints, at least 2."""
    return max(2, count // 10)


def _nondecreasing(xs: Sequence[Rational]) -> bool:
    return all(xs[i] <= xs[i + 1] for i in range(len(xs) - 1))


def _nonincreasing(xs: Sequence[Rational]) -> bool:
    return all(xs[i] >= xs[i + 1] for i in range(len(xs) - 1))


def classify_behavior(
    checkpoints: Sequence[tuple[int, Rational]],
    window: int | None = None,
    osc_gap: Rational = DEFAULT_OSC_GAP,
    conv_radius: Rational = ZERO,
) -> Classification:
    """Classify a checkpoint trace from its trailing window.

    In order: ConvergedNear when every window sum lies within
    ``conv_radius`` of the final sum; DivergesPlus/Minus when the window
    is monotone and clears the earlier extreme by ``osc_gap``;
    Oscillating when the window holds two sums more than ``osc_gap``
    apart (the witnesses prefer a drop that follows the peak); otherwise
    Undetermined. Pure: same inputs, same verdict.
    """
    if len(checkpoints) < 3:
        raise InsufficientData("need at least 3 checkpoints")
    if window is None:
        window = default_window(len(checkpoints))
    window = max(1, min(window, len(checkpoints)))
    win = list(checkpoints[-window:])
    earlier = list(checkpoints[:-window])
    win_sums = [s for _, s in win]
    final = win_sums[-1]

    deviation = max(abs(s - final) for s in win_sums)
    if deviation <= conv_radius:
        return ConvergedNear(final, deviation)

    if earlier:
        emax = max(s for _, s in earlier)
        emin = min(s for _, s in earlier)
        if (_nondecreasing(win_sums) and min(win_sums) > emax
                and win_sums[-1] >= emax + osc_gap):
            return DivergesPlus()
        if (_nonincreasing(win_sums) and max(win_sums) < emin
                and win_sums[-1] <= emin - osc_gap):
            return DivergesMinus()
    else:
        if _nondecreasing(win_sums) and win_sums[-1] >= win_sums[0] + osc_gap:
            return DivergesPlus()
        if _nonincreasing(win_sums) and win_sums[-1] <= win_sums[0] - osc_gap:
            return DivergesMinus()

    if max(win_sums) - min(win_sums) > osc_gap:
        hi_pos = max(range(len(win)), key=lambda t: win_sums[t])
        lo_pos = min(range(len(win)), key=lambda t: win_sums[t])
        # Prefer a low witness after the peak when it still clears the gap.
        tail = [t for t in range(hi_pos + 1, len(win))
                if win_sums[hi_pos] - win_sums[t] > osc_gap]
        if tail:
            lo_pos = min(tail, key=lambda t: win_sums[t])
        return Oscillating(
            low_index=win[lo_pos][0], high_index=win[hi_pos][0],
            low_sum=win_sums[lo_pos], high_sum=win_sums[hi_pos],
        )
    return Undetermined()


def partial_sums(
    series: SeriesSpec,
    perm: PermutationProg,
    horizon: int,
    checkpoint_stride: int,
    extra_checkpoints: Iterable[int] = (),
    window: int | None = None,
    osc_gap: Rational = DEFAULT_OSC_GAP,
    conv_radius: Rational | None = None,
    budget: int | None = None,
) -> PartialSumTrace:
    """Exact partial sums of the permuted series at stride checkpoints.

    The checkpoint set is every multiple of the stride up to the horizon,
    the horizon itself, and any ``extra_checkpoints`` (clamped to
    [1, horizon]); a checkpoint m carries the exact sum of the first m
    terms. ``conv_radius`` defaults to 10 * |term at the horizon index|,
    scaling the convergence test with the series tail.
    """
    if horizon < 1:
        raise PreconditionError("horizon must be >= 1")
    if checkpoint_stride < 1:
        raise PreconditionError("checkpoint stride must be >= 1")
    prefix = perm.prefix(horizon, budget)

    marks = set(range(checkpoint_stride, horizon + 1, checkpoint_stride))
    marks.add(horizon)
    marks.update(m for m in extra_checkpoints if 1 <= m <= horizon)
    order = sorted(marks)

    checkpoints: list[tuple[int, Rational]] = []
    acc = ZERO
    prev = 0
    for m in order:
        block = [series.term_at(v) for v in prefix[prev:m]]
        acc = acc + tree_sum(block)
        checkpoints.append((m, acc))
        prev = m

    if conv_radius is None:
        conv_radius = 10 * abs(series.term_at(horizon))
    classification = classify_behavior(checkpoints, window, osc_gap, conv_radius)
    return PartialSumTrace(horizon, tuple(checkpoints), classification)
