import itertools
import random

import pytest

from rlab.errors import (
    BudgetExceeded,
    MalformedTrace,
    ParseError,
    PreconditionError,
)
from rlab.prediction import (
    EVADED,
    PREDICTED,
    Predictor,
    Trace,
    block_interval,
    constant_predictor,
    evader_against_family,
    evader_from_dominator,
    first_difference_positions,
    meager_layer_Ci,
    parse_function,
    parse_predictor,
    parse_trace_file,
    play_game,
    predictor_from_library,
    trace_predictor,
    zero_predictor,
)


# -- play_game -------------------------------------------------------------------


def test_zero_predictor_on_zero_function():
    report = play_game(zero_predictor(), lambda n: 0, 50)
    assert report.mismatches == ()
    assert report.undefined_hits == ()
    assert report.verdict.kind == PREDICTED
    assert report.verdict.count == 0


def test_zero_predictor_on_ones():
    report = play_game(zero_predictor(), lambda n: 1, 50)
    assert report.mismatches == tuple(range(50))
    assert report.verdict.kind == EVADED


def test_mismatches_confined_to_domain():
    evens = Predictor("evens", lambda k: 2 * k, lambda n, s: 0)
    report = play_game(evens, lambda n: 1, 20)
    assert report.mismatches == tuple(range(0, 20, 2))


def test_undefined_counts_as_mismatch():
    never = Predictor("undef", lambda k: k, lambda n, s: None)
    report = play_game(never, lambda n: 3, 10)
    assert report.undefined_hits == tuple(range(10))
    assert report.mismatch_count == 10


def test_domain_must_increase():
    bad = Predictor("bad", lambda k: 0, lambda n, s: 0)
    with pytest.raises(PreconditionError):
        play_game(bad, lambda n: 0, 5)


def test_game_accepts_sequences():
    report = play_game(zero_predictor(), [0, 0, 1, 0], 4)
    assert report.mismatches == (2,)


# -- library predictors --------------------------------------------------------------


def test_library_constant_seven():
    P = predictor_from_library([lambda n: 7])
    assert P.predict(3, (7, 7, 7)) == 7
    assert P.predict(2, (7, 8)) is None


def test_library_tie_break_least_index():
    # {n, 2n} on prefix (0): both match, least index wins, predicting n -> 1
    P = predictor_from_library([lambda n: n, lambda n: 2 * n])
    assert P.predict(1, (0,)) == 1


def test_library_members_eventually_predicted():
    funcs = [lambda n: n, lambda n: n * n, lambda n: 2 ** n]
    P = predictor_from_library(funcs)
    for fn in funcs:
        report = play_game(P, fn, 40)
        # after the prefixes diverge the first match is the function itself
        assert report.mismatch_count <= 2


def test_library_prediction_example_n_squared():
    P = predictor_from_library([lambda n: n, lambda n: n * n, lambda n: 2 ** n])
    report = play_game(P, lambda n: n * n, 60)
    assert report.mismatch_count <= 2
    assert all(n <= 2 for n in report.effective_mismatches)


# -- evader_from_dominator --------------------------------------------------------------


def test_evader_zero_predictor_on_evens():
    evens = Predictor("evens-zero", lambda k: 2 * k, lambda n, s: 0)
    x = evader_from_dominator(evens, 14)
    for n in range(0, 14, 2):
        assert x[n] >= 1
    report = play_game(evens, x, 14)
    assert report.mismatches == tuple(range(0, 14, 2))


def test_evader_library_full_mismatch():
    P = predictor_from_library([lambda n: n])
    x = evader_from_dominator(P, 200)
    report = play_game(P, x, 200)
    assert report.effective_mismatches == tuple(range(200))


def test_evader_exact_soundness_invariant():
    P = predictor_from_library([lambda n: 2 * n + 1, lambda n: 5])
    horizon = 100
    x = evader_from_dominator(P, horizon)
    for n in range(horizon):
        guess = P.predict(n, tuple(x[:n]))
        if guess is not None:
            assert x[n] > guess


def test_evader_enumeration_budget():
    # a black-box predictor (no bound hook) forces prefix enumeration,
    # which blows past any budget once k^n grows
    blind = Predictor("blind", lambda k: k, lambda n, s: 0)
    with pytest.raises(BudgetExceeded):
        evader_from_dominator(blind, 60, budget=10000)


def test_evader_enumeration_small_horizon_works():
    blind = Predictor("blind", lambda k: k, lambda n, s: sum(s) % 3)
    x = evader_from_dominator(blind, 9, budget=10 ** 6)
    report = play_game(blind, x, 9)
    assert report.mismatch_count == 9


def test_evader_monotone_with_monotone_g():
    P = zero_predictor()
    x = evader_from_dominator(P, 50, g=lambda n, k: n + k)
    assert all(x[i] <= x[i + 1] for i in range(len(x) - 1))


# -- evader_against_family ------------------------------------------------------------


def test_family_single_zero_predictor():
    x = evader_against_family([zero_predictor()], 20)
    assert x == [1] * 20


def test_family_zero_on_evens_only():
    evens = Predictor("evens-zero", lambda k: 2 * k, lambda n, s: 0)
    x = evader_against_family([evens], 20)
    for n in range(20):
        assert x[n] == (1 if n % 2 == 0 else 0)


def test_family_two_constants():
    x = evader_against_family([constant_predictor(0), constant_predictor(1)], 20)
    assert x[0] == 1  # only the first is active at 0
    assert all(v == 2 for v in x[1:])


def test_family_of_five_libraries():
    libs = [
        predictor_from_library([lambda n: n], "l0"),
        predictor_from_library([lambda n: n * n], "l1"),
        predictor_from_library([lambda n: 2 * n + 1], "l2"),
        predictor_from_library([lambda n: 7], "l3"),
        predictor_from_library([lambda n: 0, lambda n: 3], "l4"),
    ]
    horizon = 1000
    x = evader_against_family(libs, horizon)
    for e, P in enumerate(libs):
        report = play_game(P, x, horizon)
        for n in report.inspected:
            if n >= e:  # predictor active from index e on
                guess = P.predict(n, tuple(x[:n]))
                assert guess is None or guess != x[n]


# -- traces ---------------------------------------------------------------------------


def test_block_interval():
    assert block_interval(1) == (0, 1)
    assert block_interval(2) == (1, 3)
    assert block_interval(3) == (3, 6)
    assert block_interval(4) == (6, 10)


def test_trace_validation():
    with pytest.raises(MalformedTrace):
        Trace(2, {1: frozenset({(0,), (1,)})})  # block 1 wants one member
    with pytest.raises(MalformedTrace):
        Trace(2, {2: frozenset({(0,), (1, 1)})})  # wrong member length
    with pytest.raises(MalformedTrace):
        Trace(2, {1: frozenset({(5,)})})  # out of alphabet


def test_first_difference_hand_example():
    members = [(0, 0, 0), (0, 1, 0), (1, 1, 1)]
    assert first_difference_positions(members) == {0, 1}


def test_trace_predictor_singleton_block():
    T = Trace(2, {1: frozenset({(1,)})})
    P = trace_predictor(T)
    assert P.domain(0) == 0
    assert P.domain(1) is None
    assert P.predict(0, ()) == 1


def test_trace_predictor_hand_example():
    # block 3 over [3, 6): first differences at local 0, 1 -> j local 2,
    # global 5; the third coordinate is determined by the first two
    T = Trace(
        2,
        {
            1: frozenset({(0,)}),
            2: frozenset({(0, 0), (1, 0)}),
            3: frozenset({(0, 0, 0), (0, 1, 0), (1, 1, 1)}),
        },
    )
    P = trace_predictor(T)
    ds = [P.domain(k) for k in range(3)]
    assert ds[2] == 5
    assert P.predict(5, (0, 0, 0, 0, 1)) == 0   # block part (0, 1) -> member (0,1,0)
    assert P.predict(5, (0, 0, 0, 1, 1)) == 1   # block part (1, 1) -> member (1,1,1)
    assert P.predict(5, (0, 0, 0, 1, 0)) is None  # block part (1, 0): no member


def test_trace_predictor_predicts_threaded_functions():
    rng = random.Random(11)
    for _ in range(40):
        blocks = {}
        for n in range(1, 5):
            pool = list(itertools.product(range(3), repeat=n))
            blocks[n] = frozenset(rng.sample(pool, n))
        T = Trace(3, blocks)
        P = trace_predictor(T)
        # thread a function through one member of every block
        chosen = {n: rng.choice(sorted(blocks[n])) for n in blocks}
        values = []
        for n in range(1, 5):
            values.extend(chosen[n])
        horizon = len(values)
        report = play_game(P, values, horizon)
        assert report.mismatch_count == 0


def test_trace_predictor_pigeonhole_exhaustive_small():
    # all traces with blocks 1..2 over alphabet 2, plus sampled block 3
    pool1 = [frozenset({m}) for m in itertools.product(range(2), repeat=1)]
    pool2 = [
        frozenset(c)
        for c in itertools.combinations(itertools.product(range(2), repeat=2), 2)
    ]
    for b1 in pool1:
        for b2 in pool2:
            T = Trace(2, {1: b1, 2: b2})
            P = trace_predictor(T)
            assert P.domain(0) == 0
            assert 1 <= P.domain(1) < 3


def test_trace_file_roundtrip(tmp_path):
    path = tmp_path / "trace.txt"
    path.write_text("1: 0\n2: 0,0 1,0\n3: 0,0,0 0,1,0 1,1,1\n")
    T = parse_trace_file(str(path))
    assert T.blocks[3] == frozenset({(0, 0, 0), (0, 1, 0), (1, 1, 1)})
    P = trace_predictor(T)
    assert P.domain(2) == 5


def test_trace_file_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2: 0,0\n")
    with pytest.raises(MalformedTrace):
        parse_trace_file(str(path))


# -- meager layers ------------------------------------------------------------------------


def test_meager_perfectly_predicted():
    rep = meager_layer_Ci(zero_predictor(), 1, [0] * 30, 30)
    assert rep.member and rep.mismatch_count == 0


def test_meager_evader_leaves_layer():
    P = zero_predictor()
    x = evader_from_dominator(P, 30)
    rep = meager_layer_Ci(P, 3, x, 30)
    assert not rep.member
    assert rep.mismatch_count >= 3


def test_meager_union_property():
    P = predictor_from_library([lambda n: n, lambda n: 0])
    x = [0, 5, 2, 3, 4, 5, 6, 7, 8, 9]
    c = play_game(P, x, 10).mismatch_count
    assert meager_layer_Ci(P, c + 1, x, 10).member
    assert not meager_layer_Ci(P, c, x, 10).member


# -- grammar ---------------------------------------------------------------------------------


def test_parse_function_grammar():
    assert parse_function("n")(4) == 4
    assert parse_function("n2")(5) == 25
    assert parse_function("pow2")(6) == 64
    assert parse_function("zero")(9) == 0
    assert parse_function("const:7")(1) == 7
    assert parse_function("lin:2,1")(3) == 7
    with pytest.raises(ParseError):
        parse_function("frob")


def test_parse_predictor_grammar(tmp_path):
    assert parse_predictor("zero").predict(2, (9, 9)) == 0
    P = parse_predictor("lib:n,n2")
    assert P.predict(1, (0,)) == 1
    P2 = parse_predictor("lib:lin:2,1,const:5")
    assert P2.predict(0, ()) == 1  # lin:2,1 at 0
    path = tmp_path / "t.txt"
    path.write_text("1: 3\n")
    assert parse_predictor(f"trace:{path}").predict(0, ()) == 3
    with pytest.raises(ParseError):
        parse_predictor("psychic")
