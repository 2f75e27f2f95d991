"""Slow, obviously-correct reference computations.

Nothing here shares code with the fast paths it is used to check: measures
are found by enumerating every assignment, binomial sums with ``math.comb``,
subset guarantees by trying every subset.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def assignments(positions):
    """All 0/1 assignments to ``positions`` as dicts."""
    ps = sorted(positions)
    for bits in itertools.product((0, 1), repeat=len(ps)):
        yield dict(zip(ps, bits))


def brute_force_measure(expr, bound: int) -> Fraction:
    """Measure of ``expr`` by enumerating all ``2**bound`` assignments on ``[1, bound]``."""
    hits = sum(1 for w in assignments(range(1, bound + 1)) if expr.contains(w))
    return Fraction(hits, 1 << bound)


def binomial_class_sum(u: int, m: int, t: int) -> int:
    return sum(math.comb(u, i) for i in range(t % m, u + 1, m))


def brute_modulo_given_restriction(I, m: int, o: int, r) -> Fraction:
    """``lambda(Mod(I, m, o) | r)`` by enumerating the free positions of ``I``."""
    free = [p for p in I if p not in r]
    ones = sum(1 for p in I if r.get(p) == 1)
    hits = 0
    for bits in itertools.product((0, 1), repeat=len(free)):
        if (ones + sum(bits)) % m == o:
            hits += 1
    return Fraction(hits, 1 << len(free))


def best_restricted_subset(multiset, I, size: int) -> Fraction:
    """Largest sum-size of members restricting all of some ``size``-subset of ``I``."""
    best = Fraction(0)
    for sub in itertools.combinations(sorted(I), size):
        s = sum(
            (k * r.measure() for r, k in multiset if all(p in r for p in sub)),
            Fraction(0),
        )
        best = max(best, s)
    return best


def max_capital_along(strategy, w) -> Fraction:
    """Follow ``strategy`` on the assignment ``w`` node by node, tracking the running max."""
    node = strategy.root
    depth = 0
    best = node.mass
    while node.children is not None:
        node = node.children[w[node.bet_position]]
        depth += 1
        best = max(best, node.mass * (1 << depth))
    return best
