"""rlab: a deterministic, exact-arithmetic laboratory for series
rearrangement and prediction games at finite horizons.

The package pairs each construction with the machinery needed to verify
it: exact rational partial sums with behavior classification, stage-wise
permutation programs (mixers, bound functions, dominating growth,
escape layers), predictor/evader games, and a seeded stochastic layer
for the maximal-inequality and random-sign experiments.
"""

from .errors import (
    BUDGET_ENV_VAR,
    BudgetError,
    BudgetExceeded,
    ExhaustedSign,
    InsufficientData,
    LevelMissing,
    MalformedTrace,
    NoOracle,
    NotIncreasing,
    ParseError,
    PermUndefined,
    PreconditionError,
    RlabError,
    SearchBudgetExceeded,
    TermUndefined,
    step_budget,
)
from .rationals import Rational, parse_rational, rational, rational_str, tree_sum
from .core import (
    Classification,
    ConvergedNear,
    DivergesMinus,
    DivergesPlus,
    Oscillating,
    PartialSumTrace,
    Undetermined,
    classify_behavior,
    partial_sums,
)
from .series import (
    Finite,
    GrowthFunction,
    MINUS_INFINITY,
    PLUS_INFINITY,
    SeriesSpec,
    alt_harmonic,
    geometric_series,
    harmonic_magnitudes,
    linear_growth,
    orbit_points,
    pad_series,
    parse_growth,
    parse_series,
    parse_target,
    random_sign_series,
    riemann_rearrange,
    zero_series,
)
from .permutations import (
    EVERYWHERE,
    EscapeLayerReport,
    INFINITELY_OFTEN,
    PermutationProg,
    StageRecord,
    block_reverse_perm,
    bound_function_g,
    dominating_f_for,
    escape_layer_Ek,
    identity_perm,
    mixer,
    mixer2,
    parse_permutation,
    prefix_shuffle_perm,
    set_prefix_agrees,
    swap_pairs_perm,
)
from .prediction import (
    GameReport,
    GameVerdict,
    MeagerLayerReport,
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
from .stochastic import (
    CauchyName,
    ConvergenceReport,
    EXACT,
    MONTE_CARLO,
    SignSequence,
    StochasticReport,
    compute_thresholds,
    dmeas_pair_check,
    kolmogorov_check,
    rademacher_convergence_experiment,
)

__version__ = "0.1.0"
