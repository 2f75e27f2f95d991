import json
import random
from fractions import Fraction

import pytest

from klbet.core import Restriction
from klbet.oracles import assignments, max_capital_along
from klbet.strategy import (
    BettingStrategy,
    MassMismatch,
    NotALeaf,
    PositionAlreadyRestricted,
    UnknownNode,
    capital_report,
    check_conservative,
    check_savings_lowerbound,
    maximal_achieved_capital,
    path_of,
    savings_split,
    savings_step,
    with_savings,
)
from klbet.verify import random_strategy


def doubling(depth: int) -> BettingStrategy:
    """All-in on zeros at positions 1..depth."""
    B = BettingStrategy.initial()
    for d in range(depth):
        s = "0" * d
        B = B.define_bet(s, d + 1, B.node(s).mass, 0)
    return B


class TestBets:
    def test_initial(self):
        B = BettingStrategy.initial()
        assert B.capital("") == 1 and B.is_leaf("")
        assert B.leaf_restrictions() == [Restriction()]

    def test_even_split_keeps_capital(self):
        B = BettingStrategy.initial().define_bet("", 3, Fraction(1, 2), Fraction(1, 2))
        assert B.capital("0") == 1 and B.capital("1") == 1
        assert B.node("1").restriction == Restriction({3: 1})

    def test_all_in_doubles(self):
        B = doubling(5)
        assert B.capital("00000") == 32
        assert B.capital("001") == 0

    def test_errors(self):
        B = BettingStrategy.initial().define_bet("", 1, Fraction(1, 2), Fraction(1, 2))
        with pytest.raises(NotALeaf):
            B.define_bet("", 2, Fraction(1, 2), Fraction(1, 2))
        with pytest.raises(NotALeaf):
            B.define_bet("01", 2, 0, 0)
        with pytest.raises(PositionAlreadyRestricted):
            B.define_bet("0", 1, Fraction(1, 4), Fraction(1, 4))
        with pytest.raises(MassMismatch):
            B.define_bet("0", 2, Fraction(1, 4), Fraction(1, 8))
        with pytest.raises(MassMismatch):
            B.define_bet("0", 2, Fraction(3, 4), Fraction(-1, 4))
        with pytest.raises(UnknownNode):
            B.node("00")
        with pytest.raises(ValueError):
            B.node("2")

    def test_persistence_and_history(self):
        A = BettingStrategy.initial()
        B = A.define_bet("", 4, Fraction(1, 2), Fraction(1, 2))
        C = B.define_bet("1", 2, Fraction(1, 2), 0)
        assert A.is_leaf("") and B.is_leaf("1")
        assert C.bets_since(0) == [("", 4), ("1", 2)]
        assert C.bets_since(1) == [("1", 2)]
        # untouched subtrees are shared
        assert C.node("0") is B.node("0")

    def test_validate_and_json_round_trip(self):
        B = random_strategy(random.Random(3), max_bets=25)
        B.validate()
        rows = json.loads(json.dumps(B.to_json()))
        C = BettingStrategy.from_json(rows)
        assert C.to_json() == B.to_json()
        assert C.n_bets == B.n_bets

    def test_bet_positions(self):
        assert doubling(3).bet_positions() == {1, 2, 3}


class TestCapital:
    def test_report(self):
        rep = capital_report(doubling(2))
        assert rep["00"] == (4, 4)
        assert rep["01"] == (0, 2)
        assert rep["1"] == (0, 1)

    def test_path_of(self):
        B = doubling(3)
        assert [s for s, _ in path_of(B, {1: 0, 2: 1, 3: 0})] == ["", "0", "01"]

    def test_max_capital_matches_oracle(self):
        rng = random.Random(11)
        for _ in range(40):
            B = random_strategy(rng, positions=range(1, 9), max_bets=15, max_depth=6)
            for w in assignments(range(1, 9)):
                assert maximal_achieved_capital(B, w) == max_capital_along(B, w)


class TestConservative:
    def test_losing_after_one_double_is_conservative(self):
        assert check_conservative(doubling(1))

    def test_losing_after_two_doubles_is_not(self):
        # capital 4 on the way, then 0 on the losing child
        assert not check_conservative(doubling(3))


class TestSavings:
    def test_step_even_split_is_unchanged(self):
        assert savings_step(Fraction(1), Fraction(1), Fraction(1), Fraction(1), Fraction(0)) == (
            (1, 0), (1, 0))

    def test_step_banks_half_above_two(self):
        win, lose = savings_step(Fraction(1), Fraction(2), Fraction(0), Fraction(3, 2), Fraction(0))
        # playing capital 3/2 doubles to 3 >= 2, so half of it is banked
        assert win == (Fraction(3, 2), Fraction(3, 2))
        assert lose == (0, 0)

    def test_doubling_becomes_conservative(self):
        B = doubling(8)
        assert not check_conservative(B)
        S = with_savings(B)
        S.validate()
        assert check_conservative(S)
        assert check_savings_lowerbound(B)

    def test_doubling_savings_values(self):
        split = savings_split(doubling(4))
        # every win doubles play to 2, and half of it goes to the bank
        assert split["0000"] == (Fraction(1), Fraction(4))
        assert split["0001"] == (Fraction(0), Fraction(3))

    def test_same_restrictions(self):
        B = random_strategy(random.Random(5), max_bets=30)
        S = with_savings(B)
        assert sorted(map(repr, B.leaf_restrictions())) == sorted(map(repr, S.leaf_restrictions()))
        assert S.bet_positions() == B.bet_positions()

    def test_random_strategies(self):
        rng = random.Random(2)
        for _ in range(100):
            B = random_strategy(rng, max_bets=30, max_depth=12)
            S = with_savings(B)
            S.validate()
            assert check_conservative(S)
            assert check_savings_lowerbound(B)
