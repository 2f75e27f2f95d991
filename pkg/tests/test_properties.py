"""Property-based checks against brute-force oracles."""

import math
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from klbet.core import ModuloSet, Restriction, Shape, classify, ns_unrestricted, pow2_exceeds
from klbet.earning import StrategyFamily, expected_earning
from klbet.measure import (
    MeasureEngine,
    complement,
    cyl,
    intersect,
    measure_modulo_given_restriction,
    mod_atom,
    residue_counts,
    union,
)
from klbet.oracles import brute_force_measure, brute_modulo_given_restriction
from klbet.strategy import BettingStrategy, check_conservative, check_savings_lowerbound, with_savings

L = 7

restrictions = st.dictionaries(st.integers(1, L), st.integers(0, 1), max_size=L).map(Restriction)


@st.composite
def mod_atoms(draw):
    I = draw(st.sets(st.integers(1, L), min_size=1, max_size=L))
    m = draw(st.integers(2, 4))
    return mod_atom(I, m, draw(st.integers(0, m - 1)))


atoms = st.one_of(restrictions.map(cyl), mod_atoms())
exprs = st.recursive(
    atoms,
    lambda kids: st.one_of(
        st.lists(kids, min_size=1, max_size=3).map(lambda xs: union(*xs)),
        st.lists(kids, min_size=1, max_size=3).map(lambda xs: intersect(*xs)),
        kids.map(complement),
    ),
    max_leaves=6,
)


@st.composite
def strategies_(draw, max_bets=10):
    B = BettingStrategy.initial()
    for _ in range(draw(st.integers(0, max_bets))):
        leaves = [(s, n) for s, n in B.leaves() if len(n.restriction) < L]
        s, node = draw(st.sampled_from(leaves))
        p = draw(st.sampled_from([q for q in range(1, L + 1) if q not in node.restriction]))
        a = draw(st.integers(0, 4))
        B = B.define_bet(s, p, node.mass * a / 4, node.mass * (4 - a) / 4)
    return B


@settings(max_examples=150, deadline=None)
@given(exprs)
def test_measure_matches_enumeration(e):
    assert MeasureEngine().measure(e) == brute_force_measure(e, L)


@settings(max_examples=100, deadline=None)
@given(exprs, exprs)
def test_inclusion_exclusion(a, b):
    eng = MeasureEngine()
    assert eng.measure(union(a, b)) + eng.measure(intersect(a, b)) == eng.measure(a) + eng.measure(b)
    assert eng.measure(complement(a)) == 1 - eng.measure(a)


@settings(max_examples=150, deadline=None)
@given(st.sets(st.integers(1, L), min_size=1), st.integers(2, 5), restrictions, st.data())
def test_modulo_given_restriction(I, m, r, data):
    o = data.draw(st.integers(0, m - 1))
    assert measure_modulo_given_restriction(ModuloSet(I, m, o), r) == brute_modulo_given_restriction(sorted(I), m, o, r)


@given(st.integers(0, 60), st.integers(2, 7))
def test_residue_counts_sum_to_power(u, m):
    c = residue_counts(u, m)
    assert sum(c) == 1 << u
    assert c[0] == sum(math.comb(u, i) for i in range(0, u + 1, m))


@given(restrictions, st.sets(st.integers(1, L)), st.integers(1, L + 1))
def test_classify_is_a_partition(r, I, phi):
    u = ns_unrestricted(r, I)
    shape = classify(r, I, phi)
    assert (shape is Shape.CHUBBY) == (u >= phi)
    assert (shape is Shape.RESTRICTS_ENTIRE) == (u == 0 and phi > 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(strategies_(), min_size=1, max_size=3), exprs)
def test_earning_bounded_by_measure_ratio(Bs, X):
    F = StrategyFamily(Bs)
    eng = MeasureEngine()
    mx = eng.measure(X)
    if mx == 0:
        return
    whole = expected_earning(F, cyl(Restriction()), eng)
    assert whole == 1 - Fraction(1, 1 << len(Bs))
    assert expected_earning(F, X, eng) <= whole / mx


@settings(max_examples=100, deadline=None)
@given(strategies_(max_bets=14))
def test_savings_conservative(B):
    S = with_savings(B)
    S.validate()
    assert check_conservative(S)
    assert check_savings_lowerbound(B)


@given(st.fractions(min_value=-8, max_value=8, max_denominator=40), st.fractions(min_value=0, max_value=300, max_denominator=50))
def test_pow2_exceeds_agrees_with_exact_powers(t, x):
    # 2^t > x  iff  2^p > x^q  with t = p/q and x >= 0
    p, q = t.numerator, t.denominator
    lhs = Fraction(2) ** p
    want = lhs > x ** q if x > 0 else True
    assert pow2_exceeds(t, x) == want
