import pytest
from hypothesis import given, settings, strategies as st

from rlab.core import (
    ConvergedNear,
    DivergesMinus,
    DivergesPlus,
    Oscillating,
    PartialSumTrace,
    Undetermined,
    classify_behavior,
    partial_sums,
)
from rlab.errors import InsufficientData, PermUndefined, PreconditionError
from rlab.permutations import (
    PermutationProg,
    block_reverse_perm,
    identity_perm,
    prefix_shuffle_perm,
    swap_pairs_perm,
)
from rlab.rationals import Rational, ZERO
from rlab.series import (
    Finite,
    PLUS_INFINITY,
    SeriesSpec,
    alt_harmonic,
    riemann_rearrange,
    zero_series,
)
from tests.conftest import naive_partial_sum, within_of_ln2


def _cp(values):
    return [(m + 1, Rational(v) if not hasattr(v, "denominator") else v)
            for m, v in enumerate(values)]


# -- classify_behavior ---------------------------------------------------------


def test_classify_constant_converged():
    c = classify_behavior(_cp([5] * 12), conv_radius=ZERO)
    assert c == ConvergedNear(Rational(5), ZERO)


def test_classify_strictly_increasing_diverges_plus():
    c = classify_behavior(_cp(list(range(1, 31))))
    assert isinstance(c, DivergesPlus)


def test_classify_strictly_decreasing_diverges_minus():
    c = classify_behavior(_cp([-v for v in range(1, 31)]))
    assert isinstance(c, DivergesMinus)


def test_classify_alternating_oscillates():
    vals = []
    for i in range(20):
        vals.append(Rational(69, 100) if i % 2 == 0 else Rational(2))
    c = classify_behavior(_cp(vals), window=20, osc_gap=Rational(1))
    assert isinstance(c, Oscillating)
    assert abs(c.high_sum - c.low_sum) > 1


def test_classify_oscillation_witnesses_prefer_drop_after_peak():
    vals = [Rational(1), Rational(2), Rational(4), Rational(1, 2), Rational(3, 5)]
    c = classify_behavior(_cp(vals), window=5, osc_gap=Rational(1, 2))
    assert isinstance(c, Oscillating)
    assert c.high_index == 3  # the peak (third checkpoint, index 3)
    assert c.low_index == 4   # the dip after it
    assert c.high_sum == 4 and c.low_sum == Rational(1, 2)


def test_classify_undetermined():
    vals = [Rational(0), Rational(1, 3), Rational(1, 9), Rational(2, 9),
            Rational(1, 5), Rational(1, 4)]
    c = classify_behavior(_cp(vals), window=3, osc_gap=Rational(2),
                          conv_radius=ZERO)
    assert isinstance(c, Undetermined)


def test_classify_needs_three_checkpoints():
    with pytest.raises(InsufficientData):
        classify_behavior(_cp([1, 2]))


def test_classify_is_pure():
    vals = _cp(list(range(1, 31)))
    a = classify_behavior(vals, window=4, osc_gap=Rational(1, 2), conv_radius=ZERO)
    b = classify_behavior(vals, window=4, osc_gap=Rational(1, 2), conv_radius=ZERO)
    assert a == b


# -- PartialSumTrace invariants ---------------------------------------------------


def test_trace_checkpoint_validation():
    with pytest.raises(PreconditionError):
        PartialSumTrace(10, ((5, ZERO), (5, ZERO)), Undetermined())
    with pytest.raises(PreconditionError):
        PartialSumTrace(10, ((5, ZERO), (11, ZERO)), Undetermined())


# -- partial_sums ------------------------------------------------------------------


def test_zero_series_all_checkpoints_zero():
    trace = partial_sums(zero_series(), identity_perm(), 100, 10)
    assert all(s == 0 for _, s in trace.checkpoints)
    assert trace.classification == ConvergedNear(ZERO, ZERO)


def test_alt_harmonic_identity_converges_near_ln2(ln2_bracket):
    trace = partial_sums(alt_harmonic(), identity_perm(), 100000, 1000)
    c = trace.classification
    assert isinstance(c, ConvergedNear)
    # independent oracle: alternating-series bracket pins ln 2; the
    # classification value must be within 1e-4 and the radius below 1e-4
    assert within_of_ln2(c.value, Rational(1, 10000), ln2_bracket)
    assert c.radius < Rational(1, 10000)


def test_alt_harmonic_sums_match_naive_oracle():
    trace = partial_sums(alt_harmonic(), swap_pairs_perm(), 500, 125)
    for m, s in trace.checkpoints:
        assert s == naive_partial_sum(alt_harmonic(), swap_pairs_perm(), m)


def test_mixer_of_target_two_oscillates_between_limits(ln2_bracket):
    # the mixer applied to a rearrangement targeting 2 produces a trace
    # swinging between the original sum (~0.69) and the new target (~2)
    from rlab.permutations import mixer
    from tests.conftest import within_of_ln2

    a = alt_harmonic()
    p = riemann_rearrange(a, Finite(Rational(2)), horizon=1)
    q = mixer(p, 6)
    trace = partial_sums(
        a, q, 50000, 1000,
        extra_checkpoints=[r.index + 1 for r in q.stage_log],
        window=10 ** 12, osc_gap=Rational(1),
    )
    c = trace.classification
    assert isinstance(c, Oscillating)
    assert c.high_sum > Rational(17, 10)
    assert within_of_ln2(c.low_sum, Rational(5, 100), ln2_bracket)


def test_riemann_plus_inf_classified_diverging():
    a = alt_harmonic()
    perm = riemann_rearrange(a, PLUS_INFINITY, horizon=100000)
    # the sums climb logarithmically: a half-length window with a small
    # gap exposes the monotone escape past every earlier checkpoint
    trace = partial_sums(a, perm, 100000, 2000, window=25,
                         osc_gap=Rational(1, 4))
    assert isinstance(trace.classification, DivergesPlus)


def test_extra_checkpoints_merged():
    trace = partial_sums(alt_harmonic(), identity_perm(), 1000, 100,
                         extra_checkpoints=[7, 350, 2000])
    indices = [m for m, _ in trace.checkpoints]
    assert 7 in indices and 350 in indices
    assert 2000 not in indices  # beyond horizon: clamped away
    assert indices == sorted(indices)


def test_partial_sums_preconditions():
    with pytest.raises(PreconditionError):
        partial_sums(zero_series(), identity_perm(), 0, 1)
    with pytest.raises(PreconditionError):
        partial_sums(zero_series(), identity_perm(), 10, 0)
    finite = PermutationProg.from_generator(iter([0, 1]), "finite")
    with pytest.raises(PermUndefined):
        partial_sums(zero_series(), finite, 10, 2)


def test_exactness_bit_identical():
    t1 = partial_sums(alt_harmonic(), block_reverse_perm(3), 2000, 200)
    t2 = partial_sums(alt_harmonic(), block_reverse_perm(3), 2000, 200)
    assert t1.checkpoints == t2.checkpoints
    assert t1.classification == t2.classification


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(16))), st.integers(16, 60))
def test_finite_support_permutation_invariance(prefix, horizon):
    # finitely many nonzero terms, all below 16: any permutation whose
    # prefix covers them leaves the final sum unchanged
    support = {2: Rational(3, 7), 5: Rational(-1, 3), 15: Rational(9)}
    series = SeriesSpec("finite", lambda n: support.get(n, ZERO))
    p = prefix_shuffle_perm(list(prefix))
    stride = max(1, horizon // 4)
    permuted = partial_sums(series, p, horizon, stride)
    plain = partial_sums(series, identity_perm(), horizon, stride)
    assert permuted.final_sum == plain.final_sum


def test_conv_radius_scales_with_tail():
    # default radius 10 * |term at horizon| classifies the tail honestly
    trace = partial_sums(alt_harmonic(), identity_perm(), 10000, 500)
    c = trace.classification
    assert isinstance(c, ConvergedNear)
    assert c.radius <= 10 * abs(alt_harmonic().term_at(10000))
