"""Exact simulation of the betting game on open sets and its Modulo Chooser."""

from .core import (
    EMPTY_RESTRICTION,
    InvariantViolation,
    ModuloSet,
    PreconditionError,
    Restriction,
    RestrictionMultiSet,
    Shape,
    classify,
    interval,
    join,
    ns_unrestricted,
)
from .measure import (
    EMPTY,
    FULL,
    MeasureEngine,
    PositionUniverse,
    check_modulo_independence,
    conditional,
    cyl,
    measure,
    measure_expr,
    measure_modulo,
    measure_modulo_given_restriction,
    measure_restriction,
    xi_approx,
)
from .strategy import (
    BettingStrategy,
    capital,
    capital_report,
    check_conservative,
    check_savings_lowerbound,
    define_bet,
    maximal_achieved_capital,
    with_savings,
)
from .earning import (
    StrategyFamily,
    expected_earning,
    low_capital_subset,
    min_earning_part,
    verify_kl_eta,
)
from .chooser import (
    ChooserParams,
    ModuloChooser,
    chooser_turn,
    find_good_remainder,
    grow_restricted,
    params_from_k,
    slim_to_restricted,
)
from .game import (
    GameTranscript,
    goal_achieved,
    make_gambler,
    replay,
    run_game,
    surviving_subset,
)

__version__ = "0.1.0"
