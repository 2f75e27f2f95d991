import math
import random
from fractions import Fraction

import pytest

from klbet.core import ModuloSet, PreconditionError, Restriction, interval
from klbet.measure import (
    EMPTY,
    FULL,
    MeasureEngine,
    PositionUniverse,
    UniverseError,
    alternating_sum_bound,
    central_binomial_bound,
    check_modulo_independence,
    complement,
    conditional,
    cyl,
    difference,
    intersect,
    measure,
    measure_modulo,
    measure_modulo_given_restriction,
    mod_atom,
    modset,
    residue_counts,
    union,
    union_of_restrictions,
    xi_approx,
)
from klbet.oracles import binomial_class_sum, brute_force_measure, brute_modulo_given_restriction
from klbet.verify import random_expr, random_restriction


@pytest.mark.parametrize("u", [0, 1, 2, 7, 20])
@pytest.mark.parametrize("m", [2, 3, 5])
def test_residue_counts_match_binomial_sums(u, m):
    assert list(residue_counts(u, m)) == [binomial_class_sum(u, m, t) for t in range(m)]


def test_measure_basics():
    assert measure(FULL) == 1 and measure(EMPTY) == 0
    assert measure(Restriction({1: 0, 2: 1})) == Fraction(1, 4)
    assert measure(ModuloSet(interval(1, 4), 2, 0)) == Fraction(1, 2)


def test_modulo_measure_small_cases():
    # three positions mod 3: residues 0,1,2 have 1+1, 3, 3 members out of 8
    assert [measure_modulo(ModuloSet(interval(1, 3), 3, o)) for o in range(3)] == [
        Fraction(2, 8), Fraction(3, 8), Fraction(3, 8)]


def test_conditional_modulo_given_restriction_examples():
    I = interval(1, 4)
    r = Restriction({1: 1, 2: 1})
    M = ModuloSet(I, 3, 2)
    # two ones already set, remainder 2 needs zero more ones among 2 free positions
    assert measure_modulo_given_restriction(M, r) == Fraction(1, 4)
    assert measure_modulo_given_restriction(M, r) == brute_modulo_given_restriction(I, 3, 2, r)


def test_conditional_modulo_against_oracle_fuzz():
    rng = random.Random(1)
    for _ in range(200):
        n = rng.randint(1, 10)
        I = sorted(rng.sample(range(1, 16), n))
        m = rng.randint(2, 5)
        o = rng.randrange(m)
        r = random_restriction(rng, range(1, 16), rng.randint(0, 8))
        assert measure_modulo_given_restriction(ModuloSet(I, m, o), r) == brute_modulo_given_restriction(I, m, o, r)


def test_engine_matches_brute_force_on_random_expressions():
    rng = random.Random(7)
    eng = MeasureEngine()
    for _ in range(150):
        e = random_expr(rng, 10, depth=3)
        assert eng.measure(e) == brute_force_measure(e, 10)


def test_overlapping_modulo_sets_against_brute_force():
    a = mod_atom([1, 2, 3, 4, 5], 2, 1)
    b = mod_atom([3, 4, 5, 6, 7], 3, 0)
    c = cyl({4: 1})
    for e in (intersect(a, b), union(a, b), difference(a, b), intersect(a, b, c), union(a, complement(b), c)):
        assert measure(e) == brute_force_measure(e, 7)


def test_simplification():
    a = cyl({1: 0})
    assert union(a, FULL) is FULL
    assert intersect(a, EMPTY) is EMPTY
    assert complement(complement(a)) == a
    assert union() is EMPTY and intersect() is FULL


def test_restrict_substitutes_bit():
    e = intersect(cyl({1: 0, 2: 1}), mod_atom([2, 3], 2, 0))
    assert e.restrict(1, 1) is EMPTY
    assert measure(e.restrict(1, 0)) == Fraction(1, 4)
    assert e.positions == frozenset({1, 2, 3})


def test_union_of_restrictions():
    rs = [Restriction({1: 0}), Restriction({1: 1, 2: 0}), Restriction({1: 0, 3: 1})]
    assert measure(union_of_restrictions(rs)) == Fraction(3, 4)


def test_conditional():
    a, b = cyl({1: 0, 2: 0}), cyl({1: 0})
    assert conditional(a, b) == Fraction(1, 2)
    with pytest.raises(PreconditionError):
        conditional(a, EMPTY)


def test_universe_guard():
    u = PositionUniverse(5)
    assert measure(cyl({5: 1}), universe=u) == Fraction(1, 2)
    with pytest.raises(UniverseError):
        measure(cyl({6: 1}), universe=u)


def test_memo_shared_across_calls():
    eng = MeasureEngine()
    e = union(cyl({1: 0, 2: 0}), modset(ModuloSet([2, 3, 4], 2, 1)))
    first = eng.measure(e)
    assert e in eng.cache
    assert eng.measure(e) == first


class TestXiApprox:
    def test_definition(self):
        y = Fraction(1, 2)
        assert xi_approx(Fraction(3, 8), y, Fraction(1, 4))
        assert not xi_approx(Fraction(3, 8) - Fraction(1, 1000), y, Fraction(1, 4))
        assert xi_approx(Fraction(2, 3), y, Fraction(1, 4))
        assert not xi_approx(Fraction(2, 3) + Fraction(1, 1000), y, Fraction(1, 4))

    def test_xi_one_is_vacuous_upper(self):
        assert xi_approx(Fraction(100), Fraction(1, 2), 1)

    def test_range(self):
        with pytest.raises(ValueError):
            xi_approx(1, 1, Fraction(3, 2))


class TestModuloIndependence:
    def test_holds_at_threshold(self):
        m, u = 3, 36
        I = interval(1, u)
        xi = Fraction(m, 6)  # m / sqrt(u)
        for _ in range(3):
            assert check_modulo_independence(I, m, xi, Restriction())

    def test_rejects_too_few_positions(self):
        with pytest.raises(PreconditionError):
            check_modulo_independence(interval(1, 8), 4, Fraction(1, 2), Restriction())

    def test_restriction_outside_I_is_irrelevant(self):
        I = interval(1, 20)
        r = Restriction({p: 1 for p in range(21, 30)})
        assert check_modulo_independence(I, 2, Fraction(1, 2), r)


def test_central_binomial_bound_against_comb():
    for u in range(1, 300):
        c = math.comb(u, u // 2)
        assert central_binomial_bound(u) == (c * c * u < 4 ** u)
        assert central_binomial_bound(u)


def test_alternating_sum_bound():
    assert alternating_sum_bound([1, 3, 5, 3, 1])
    assert alternating_sum_bound([math.comb(10, i) for i in range(11)])
    assert alternating_sum_bound([])
