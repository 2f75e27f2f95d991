"""Expected earning of a weighted strategy family and the inequalities built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .core import (
    InvariantViolation,
    ModuloSet,
    PreconditionError,
    Restriction,
    RestrictionMultiSet,
    Shape,
    classify,
    frac_str,
)
from .measure import (
    EMPTY,
    FULL,
    ClopenExpr,
    MeasureEngine,
    as_expr,
    cyl,
    difference,
    intersect,
    union,
    union_of_restrictions,
)
from .strategy import BettingStrategy, Node


class StrategyFamily:
    """Strategies ``B_1 .. B_n``; strategy ``i`` (1-based) has weight ``2**-i``."""

    __slots__ = ("strategies",)

    def __init__(self, strategies: Sequence[BettingStrategy]):
        if not strategies:
            raise ValueError("a strategy family needs at least one strategy")
        self.strategies = tuple(strategies)

    @classmethod
    def initial(cls, n: int) -> StrategyFamily:
        return cls([BettingStrategy.initial() for _ in range(n)])

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, i: int) -> BettingStrategy:
        """1-based access."""
        if not 1 <= i <= len(self.strategies):
            raise IndexError(f"strategy index {i} outside [1, {len(self.strategies)}]")
        return self.strategies[i - 1]

    def __iter__(self) -> Iterator[tuple[int, BettingStrategy]]:
        return iter(enumerate(self.strategies, start=1))

    def __repr__(self) -> str:
        return f"StrategyFamily({[B.n_bets for B in self.strategies]} bets)"

    def first(self, n: int) -> StrategyFamily:
        return StrategyFamily(self.strategies[:n])

    def replace(self, i: int, B: BettingStrategy) -> StrategyFamily:
        s = list(self.strategies)
        s[i - 1] = B
        return StrategyFamily(s)

    def define_bet(self, i: int, leaf: str, p: int, mass0, mass1) -> StrategyFamily:
        return self.replace(i, self[i].define_bet(leaf, p, mass0, mass1))

    def leaf_multiset(self) -> RestrictionMultiSet:
        return RestrictionMultiSet(r for _, B in self for r in B.leaf_restrictions())


def weight(i: int) -> Fraction:
    return Fraction(1, 1 << i)


def capital_integral(B: BettingStrategy, X: ClopenExpr, engine: MeasureEngine) -> Fraction:
    """``sum over leaves s of c(s) * lambda(rho(s) & X)``."""
    total = Fraction(0)
    stack: list[tuple[Node, ClopenExpr]] = [(B.root, X)]
    while stack:
        node, rest = stack.pop()
        if rest == EMPTY or node.mass == 0:
            continue
        if rest == FULL:
            # leaf masses below a node add up to the node's mass
            total += node.mass
            continue
        if node.children is None:
            total += node.mass * engine.measure(rest)
            continue
        p = node.bet_position
        if p in rest.positions:
            stack.append((node.children[0], rest.restrict(p, 0)))
            stack.append((node.children[1], rest.restrict(p, 1)))
        else:
            stack.append((node.children[0], rest))
            stack.append((node.children[1], rest))
    return total


def expected_earning(F: StrategyFamily, X, engine: MeasureEngine | None = None) -> Fraction:
    engine = engine or MeasureEngine()
    X = as_expr(X)
    mx = engine.measure(X)
    if mx == 0:
        raise PreconditionError("expected earning is undefined on a null set")
    total = sum(
        (weight(i) * capital_integral(B, X, engine) for i, B in F), Fraction(0)
    )
    return total / mx


def check_partition(parts: Sequence[ClopenExpr], X: ClopenExpr, engine: MeasureEngine) -> None:
    measures = [engine.measure(p) for p in parts]
    if any(m == 0 for m in measures):
        raise PreconditionError("partition has a part of measure zero")
    joined = union(*parts)
    mj = engine.measure(joined)
    mx = engine.measure(X)
    # clopen sets of measure zero are empty, so these equalities are set equalities
    if sum(measures) != mj:
        raise PreconditionError("parts overlap")
    if mj != mx or engine.measure(intersect(joined, X)) != mx:
        raise PreconditionError("parts do not cover exactly X")


def min_earning_part(F: StrategyFamily, parts, X=None, engine: MeasureEngine | None = None) -> int:
    """Index of a part whose earning is no larger than the earning on the whole."""
    engine = engine or MeasureEngine()
    parts = [as_expr(p) for p in parts]
    X = union(*parts) if X is None else as_expr(X)
    check_partition(parts, X, engine)
    earns = [expected_earning(F, p, engine) for p in parts]
    best = min(range(len(parts)), key=lambda k: (earns[k], k))
    if earns[best] > expected_earning(F, X, engine):
        raise InvariantViolation("no part earns at most the earning on X")
    return best


@dataclass
class LowCapitalSubset:
    Y: ClopenExpr
    Z: ClopenExpr
    bounds: dict[int, Fraction]
    measure_X: Fraction
    measure_Y: Fraction
    measure_Z: Fraction
    d: Fraction

    @property
    def strict(self) -> bool:
        return self.measure_Y > self.d


def low_capital_subset(F: StrategyFamily, X, d, engine: MeasureEngine | None = None) -> LowCapitalSubset:
    """Remove from ``X`` every leaf whose capital exceeds ``2**i * q * earn``.

    ``q = lambda(X) / (lambda(X) - d)``.  What is left has measure at least ``d``.
    """
    engine = engine or MeasureEngine()
    X = as_expr(X)
    d = Fraction(d)
    mx = engine.measure(X)
    if not 0 < d < mx:
        raise PreconditionError(f"need 0 < d < lambda(X) = {mx}, got d = {d}")
    q = mx / (mx - d)
    earn = expected_earning(F, X, engine)
    bounds = {i: (1 << i) * q * earn for i, _ in F}
    high = [
        n.restriction
        for i, B in F
        for s, n in B.leaves()
        if n.mass * (1 << len(s)) > bounds[i]
    ]
    Z = intersect(union_of_restrictions(high), X)
    Y = difference(X, Z)
    mz = engine.measure(Z)
    my = engine.measure(Y)
    if mz > mx - d:
        raise InvariantViolation(f"high-capital part has measure {mz} > {mx - d}")
    if my < d:
        raise InvariantViolation(f"remaining part has measure {my} < {d}")
    return LowCapitalSubset(Y, Z, bounds, mx, my, mz, d)


# ---------------------------------------------------------------------------
# slimming


def check_extends(before: BettingStrategy, after: BettingStrategy) -> None:
    """Raise unless ``after`` is obtained from ``before`` by defining bets."""
    for s, node in before.nodes():
        try:
            other = after.node(s)
        except KeyError:
            raise PreconditionError(f"node {s!r} missing from the later strategy") from None
        if other.restriction != node.restriction or other.mass != node.mass:
            raise PreconditionError(f"node {s!r} changed between the two strategies")
        if node.children is not None and other.bet_position != node.bet_position:
            raise PreconditionError(f"bet at {s!r} changed between the two strategies")


def slimmed_down_leaves(before: BettingStrategy, after: BettingStrategy, I, phi: int) -> list[tuple[str, Restriction]]:
    """Leaves of ``after`` that are slim while their leaf ancestor in ``before`` was chubby."""
    I = frozenset(I)
    out = []
    for s, node in before.leaves():
        if classify(node.restriction, I, phi) is not Shape.CHUBBY:
            continue
        sub = BettingStrategy(after.node(s))
        for t, leaf in sub.leaves():
            if classify(leaf.restriction, I, phi).slim:
                out.append((s + t, leaf.restriction))
    return out


def leaves_of_shape(F: StrategyFamily, I, phi: int, shape: Shape) -> RestrictionMultiSet:
    I = frozenset(I)
    return RestrictionMultiSet(
        n.restriction
        for _, B in F
        for _, n in B.leaves()
        if classify(n.restriction, I, phi) is shape
    )


def family_slimmed_down(before: StrategyFamily, after: StrategyFamily, I, phi: int) -> RestrictionMultiSet:
    return RestrictionMultiSet(
        r
        for (_, B), (_, B2) in zip(before, after)
        for _, r in slimmed_down_leaves(B, B2, I, phi)
    )


def exact_sqrt_ratio(m: int, phi: int) -> Fraction:
    """``m / sqrt(phi)`` for a perfect-square ``phi``."""
    root = math.isqrt(phi)
    if root * root != phi:
        raise PreconditionError(f"phi = {phi} is not a perfect square")
    return Fraction(m, root)


@dataclass
class KLEtaReport:
    xi: Fraction
    measure_M: Fraction
    measure_M_prime: Fraction
    theta_given_M: Fraction
    delta_sum_size: Fraction
    delta_given_M: Fraction
    earn_before: Fraction
    lhs: Fraction | None = None
    rhs: Fraction | None = None
    holds: bool | None = None
    sub_checks: dict[str, bool] = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.measure_M_prime == 0

    @property
    def slack(self) -> Fraction | None:
        if self.lhs is None or self.rhs is None:
            return None
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.holds is not False and all(self.sub_checks.values())

    def to_json(self) -> dict:
        def f(x):
            return None if x is None else frac_str(x)

        return {
            "lhs": f(self.lhs),
            "rhs": f(self.rhs),
            "slack": f(self.slack),
            "holds": self.holds,
            "vacuous": self.vacuous,
            "sub_checks": dict(self.sub_checks),
            "witnesses": {
                "xi": f(self.xi),
                "measure_M": f(self.measure_M),
                "measure_M_prime": f(self.measure_M_prime),
                "theta_given_M": f(self.theta_given_M),
                "delta_sum_size": f(self.delta_sum_size),
                "delta_given_M": f(self.delta_given_M),
                "earn_before": f(self.earn_before),
                **self.witnesses,
            },
        }


def verify_kl_eta(F_before: StrategyFamily, F_after: StrategyFamily, M: ModuloSet, phi: int, engine: MeasureEngine | None = None) -> KLEtaReport:
    """Evaluate both sides of the earning bound after new bets, exactly.

    ``Theta`` holds the lean leaves of ``F_before`` and ``Delta`` the leaves of
    ``F_after`` slimmed down by the new bets, both relative to ``(M.positions, phi)``.
    The bound is only asserted where its denominators are positive.
    """
    engine = engine or MeasureEngine()
    if len(F_before) != len(F_after):
        raise PreconditionError("families differ in size")
    for (_, B), (_, B2) in zip(F_before, F_after):
        check_extends(B, B2)
    m, I = M.modulus, M.positions
    if phi <= m * m:
        raise PreconditionError(f"need phi > m^2, got phi = {phi}, m = {m}")
    xi = exact_sqrt_ratio(m, phi)

    theta = leaves_of_shape(F_before, I, phi, Shape.LEAN)
    delta = family_slimmed_down(F_before, F_after, I, phi)
    Mx = as_expr(M)
    theta_set = union_of_restrictions(theta.restrictions())
    delta_set = union_of_restrictions(delta.restrictions())
    M_prime = difference(Mx, union(theta_set, delta_set))

    mM = engine.measure(Mx)
    mMp = engine.measure(M_prime)
    theta_M = engine.measure(intersect(theta_set, Mx)) / mM
    delta_M = engine.measure(intersect(delta_set, Mx)) / mM
    delta_plus = delta.sum_size()
    earn_before = expected_earning(F_before, Mx, engine)

    rep = KLEtaReport(
        xi=xi,
        measure_M=mM,
        measure_M_prime=mMp,
        theta_given_M=theta_M,
        delta_sum_size=delta_plus,
        delta_given_M=delta_M,
        earn_before=earn_before,
        witnesses={"theta_count": len(theta), "delta_count": len(delta)},
    )
    rep.sub_checks["delta_given_M"] = delta_M <= delta_plus / (1 - xi)
    if mMp == 0:
        return rep
    den2 = 1 - theta_M - delta_M
    if den2 > 0:
        rep.sub_checks["M_over_M_prime"] = mM / mMp <= 1 / den2
    earn_after = expected_earning(F_after, M_prime, engine)
    rep.lhs = earn_after
    if 1 - 2 * xi > 0:
        rep.sub_checks["weighted"] = mMp * earn_after <= mM * earn_before / (1 - 2 * xi)
        den = 1 - theta_M - delta_plus / (1 - xi)
        if den > 0:
            rep.rhs = earn_before / ((1 - 2 * xi) * den)
            rep.holds = earn_after <= rep.rhs
    return rep
