import random
from fractions import Fraction

import pytest

from klbet.core import ModuloSet, PreconditionError, interval
from klbet.earning import (
    StrategyFamily,
    capital_integral,
    check_extends,
    exact_sqrt_ratio,
    expected_earning,
    family_slimmed_down,
    low_capital_subset,
    min_earning_part,
    slimmed_down_leaves,
    verify_kl_eta,
)
from klbet.measure import EMPTY, FULL, MeasureEngine, complement, cyl, intersect, measure
from klbet.strategy import BettingStrategy
from klbet.verify import brute_earning, random_expr, random_family


def all_in_on_zero() -> StrategyFamily:
    B = BettingStrategy.initial().define_bet("", 1, 1, 0)
    return StrategyFamily([B])


class TestFamily:
    def test_one_based(self):
        F = StrategyFamily.initial(3)
        assert [i for i, _ in F] == [1, 2, 3]
        with pytest.raises(IndexError):
            F[0]
        with pytest.raises(IndexError):
            F[4]

    def test_define_bet_replaces_one_member(self):
        F = StrategyFamily.initial(2)
        G = F.define_bet(2, "", 5, Fraction(1, 2), Fraction(1, 2))
        assert G[1] is F[1] and G[2].n_bets == 1
        assert G.leaf_multiset().sum_size() == 2

    def test_empty_family_rejected(self):
        with pytest.raises(ValueError):
            StrategyFamily([])


class TestExpectedEarning:
    @pytest.mark.parametrize("n", [1, 2, 5])
    def test_whole_space(self, n):
        rng = random.Random(n)
        F = random_family(rng, n, range(1, 9), 20, 8)
        assert expected_earning(F, FULL) == 1 - Fraction(1, 1 << n)

    def test_all_in_example(self):
        F = all_in_on_zero()
        assert expected_earning(F, FULL) == Fraction(1, 2)
        assert expected_earning(F, cyl({1: 0})) == 1
        assert expected_earning(F, cyl({1: 1})) == 0

    def test_null_set_rejected(self):
        with pytest.raises(PreconditionError):
            expected_earning(all_in_on_zero(), EMPTY)

    def test_matches_enumeration(self):
        rng = random.Random(4)
        eng = MeasureEngine()
        done = 0
        while done < 60:
            X = random_expr(rng, 8, depth=2)
            if eng.measure(X) == 0:
                continue
            F = random_family(rng, rng.randint(1, 3), range(1, 9), 12, 8)
            assert expected_earning(F, X, eng) == brute_earning(F, X, 8)
            done += 1

    def test_subset_bound(self):
        # on Y inside X the earning is at most lambda(X)/lambda(Y) times the earning on X
        rng = random.Random(9)
        eng = MeasureEngine()
        for _ in range(60):
            F = random_family(rng, 2, range(1, 9), 12, 8)
            X = random_expr(rng, 8, depth=2)
            Y = intersect(X, random_expr(rng, 8, depth=2))
            mx, my = eng.measure(X), eng.measure(Y)
            if my == 0:
                continue
            assert expected_earning(F, Y, eng) <= mx / my * expected_earning(F, X, eng)

    def test_capital_integral_over_full_is_one(self):
        F = random_family(random.Random(0), 1, range(1, 9), 20, 8)
        assert capital_integral(F[1], FULL, MeasureEngine()) == 1


class TestMinEarningPart:
    def test_halves(self):
        assert min_earning_part(all_in_on_zero(), [cyl({1: 0}), cyl({1: 1})]) == 1

    def test_ties_pick_smallest_index(self):
        F = StrategyFamily.initial(2)
        assert min_earning_part(F, [cyl({2: 0}), cyl({2: 1})]) == 0

    def test_rejects_overlap_and_gaps(self):
        F = all_in_on_zero()
        with pytest.raises(PreconditionError):
            min_earning_part(F, [cyl({1: 0}), cyl({2: 0})], X=FULL)
        with pytest.raises(PreconditionError):
            min_earning_part(F, [cyl({1: 0}), cyl({1: 0, 2: 0})])
        with pytest.raises(PreconditionError):
            min_earning_part(F, [cyl({1: 0}), EMPTY])

    def test_contract_on_random_partitions(self):
        rng = random.Random(12)
        eng = MeasureEngine()
        for _ in range(40):
            F = random_family(rng, 2, range(1, 9), 12, 8)
            A = random_expr(rng, 8, depth=2)
            ma = eng.measure(A)
            if ma in (0, 1):
                continue
            parts = [A, complement(A)]
            k = min_earning_part(F, parts, FULL, eng)
            assert expected_earning(F, parts[k], eng) <= expected_earning(F, FULL, eng)


class TestLowCapitalSubset:
    def test_example(self):
        res = low_capital_subset(all_in_on_zero(), FULL, Fraction(1, 4))
        assert res.bounds == {1: Fraction(4, 3)}
        assert res.measure_Y == Fraction(1, 2)
        assert res.measure_Z == Fraction(1, 2)
        assert res.strict
        assert measure(intersect(res.Y, cyl({1: 0}))) == 0

    def test_uneven_split_example(self):
        # leaves of capital 3/2 and 1/2: only the first exceeds the bound
        B = BettingStrategy.initial().define_bet("", 1, Fraction(3, 4), Fraction(1, 4))
        res = low_capital_subset(StrategyFamily([B]), FULL, Fraction(1, 4))
        assert res.bounds == {1: Fraction(4, 3)}
        assert measure(intersect(res.Z, cyl({1: 0}))) == Fraction(1, 2)
        assert res.measure_Y == Fraction(1, 2)

    def test_initial_family_keeps_everything(self):
        X = cyl({2: 1, 3: 0})
        res = low_capital_subset(StrategyFamily.initial(3), X, Fraction(1, 8))
        assert res.measure_Z == 0 and res.measure_Y == Fraction(1, 4)

    def test_d_range(self):
        F = all_in_on_zero()
        for d in (0, 1, Fraction(3, 2)):
            with pytest.raises(PreconditionError):
                low_capital_subset(F, FULL, d)

    def test_guarantees_on_random_instances(self):
        rng = random.Random(21)
        eng = MeasureEngine()
        for _ in range(60):
            F = random_family(rng, rng.randint(1, 3), range(1, 9), 12, 8)
            X = random_expr(rng, 8, depth=2)
            mx = eng.measure(X)
            if mx == 0:
                continue
            d = mx * Fraction(rng.randint(1, 7), 8)
            res = low_capital_subset(F, X, d, eng)
            assert res.measure_Y >= d
            assert res.measure_Z <= mx - d
            assert res.measure_Y + res.measure_Z == mx


class TestSlimming:
    def test_slimmed_down_leaves(self):
        before = BettingStrategy.initial()
        after = before
        for d, p in enumerate((1, 2, 3)):
            s = "0" * d
            h = after.node(s).mass / 2
            after = after.define_bet(s, p, h, h)
        got = sorted(s for s, _ in slimmed_down_leaves(before, after, interval(1, 4), 2))
        assert got == ["000", "001"]

    def test_no_new_bets_means_nothing_slimmed(self):
        F = random_family(random.Random(1), 3, range(1, 9), 10, 6)
        assert len(family_slimmed_down(F, F, interval(1, 8), 3)) == 0

    def test_check_extends(self):
        A = BettingStrategy.initial().define_bet("", 1, Fraction(1, 2), Fraction(1, 2))
        B = BettingStrategy.initial().define_bet("", 2, Fraction(1, 2), Fraction(1, 2))
        check_extends(A, A.define_bet("0", 3, Fraction(1, 4), Fraction(1, 4)))
        with pytest.raises(PreconditionError):
            check_extends(A, B)
        with pytest.raises(PreconditionError):
            check_extends(A, BettingStrategy.initial())


def test_exact_sqrt_ratio():
    assert exact_sqrt_ratio(4, 256) == Fraction(1, 4)
    with pytest.raises(PreconditionError):
        exact_sqrt_ratio(2, 20)


class TestKLEta:
    def test_no_new_bets(self):
        F = StrategyFamily.initial(2)
        M = ModuloSet(interval(1, 70), 2, 0)
        rep = verify_kl_eta(F, F, M, 64)
        assert rep.xi == Fraction(1, 4)
        assert rep.delta_sum_size == 0 and rep.theta_given_M == 0
        assert rep.lhs == Fraction(3, 4)
        assert rep.rhs == Fraction(3, 2)
        assert rep.holds and rep.ok and not rep.vacuous
        assert rep.to_json()["slack"] == "3/4"

    def test_with_slimming_bets(self):
        # push one strategy's leaf down to one free position of I
        I = interval(1, 70)
        M = ModuloSet(I, 2, 1)
        F0 = StrategyFamily.initial(2)
        B = F0[2]
        for d in range(69):
            s = "0" * d
            h = B.node(s).mass / 2
            B = B.define_bet(s, d + 1, h, h)
        F1 = F0.replace(2, B)
        rep = verify_kl_eta(F0, F1, M, 64)
        assert rep.delta_sum_size > 0
        assert rep.ok

    def test_phi_must_exceed_m_squared(self):
        F = StrategyFamily.initial(1)
        with pytest.raises(PreconditionError):
            verify_kl_eta(F, F, ModuloSet(interval(1, 10), 4, 0), 16)

    def test_family_sizes_must_match(self):
        with pytest.raises(PreconditionError):
            verify_kl_eta(StrategyFamily.initial(1), StrategyFamily.initial(2), ModuloSet([1], 2, 0), 64)
