"""Seeded property suites, one per lemma family.

Every suite returns a :class:`SuiteReport`; a failure records enough of the
instance to reproduce it.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from . import oracles
from .chooser import (
    ChooserParams,
    check_grow,
    total_measure_bound_holds,
    grow_restricted,
    params_from_k,
    restricted_sum,
    scan_remainders,
    slim_guarantee,
    slim_to_restricted,
)
from .core import (
    InvariantViolation,
    ModuloSet,
    PreconditionError,
    Restriction,
    RestrictionMultiSet,
    Shape,
    classify,
    interval,
    ns_unrestricted,
)
from .earning import (
    StrategyFamily,
    expected_earning,
    low_capital_subset,
    min_earning_part,
    verify_kl_eta,
)
from .measure import (
    FULL,
    MeasureEngine,
    central_binomial_bound,
    alternating_sum_bound,
    cyl,
    intersect,
    mod_atom,
    modset,
    residue_counts,
    union,
    union_of_restrictions,
    complement,
)
from .strategy import (
    BettingStrategy,
    capital_report,
    check_conservative,
    check_savings_lowerbound,
    with_savings,
)


@dataclass
class SuiteReport:
    suite: str
    passed: int = 0
    failed: int = 0
    counterexamples: list[dict] = field(default_factory=list)
    elapsed: float = 0.0
    notes: dict = field(default_factory=dict)

    def record(self, ok: bool, **detail) -> None:
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.counterexamples) < 20:
                self.counterexamples.append({k: _plain(v) for k, v in detail.items()})

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "failed": self.failed,
            "counterexamples": self.counterexamples,
            "notes": {k: _plain(v) for k, v in self.notes.items()},
        }


def _plain(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (int, str, bool, float)) or v is None:
        return v
    return repr(v)


# ---------------------------------------------------------------------------
# generators


def random_restriction(rng: random.Random, positions, size: int) -> Restriction:
    ps = rng.sample(sorted(positions), size)
    return Restriction({p: rng.randint(0, 1) for p in ps})


def random_masses(rng: random.Random, mass: Fraction) -> tuple[Fraction, Fraction]:
    a = rng.choice((0, 1, 1, 2, 2, 2, 3, 3, 4))
    return mass * a / 4, mass * (4 - a) / 4


def grow_strategy(rng: random.Random, B: BettingStrategy, positions, bets: int, max_depth: int) -> BettingStrategy:
    positions = sorted(positions)
    for _ in range(bets):
        leaves = [(s, n) for s, n in B.leaves() if len(s) < max_depth]
        if not leaves:
            break
        s, node = rng.choice(leaves)
        free = [p for p in positions if p not in node.restriction]
        if not free:
            continue
        p = rng.choice(free)
        B = B.define_bet(s, p, *random_masses(rng, node.mass))
    return B


def random_strategy(rng: random.Random, positions=range(1, 17), max_bets: int = 40, max_depth: int = 12) -> BettingStrategy:
    return grow_strategy(rng, BettingStrategy.initial(), positions, rng.randint(0, max_bets), max_depth)


def random_family(rng: random.Random, n: int, positions, max_bets: int, max_depth: int) -> StrategyFamily:
    return StrategyFamily([random_strategy(rng, positions, max_bets, max_depth) for _ in range(n)])


def random_expr(rng: random.Random, L: int, depth: int = 3):
    """Random clopen expression over positions ``1..L``."""
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.6:
            return cyl(random_restriction(rng, range(1, L + 1), rng.randint(0, min(3, L))))
        I = rng.sample(range(1, L + 1), rng.randint(1, L))
        m = rng.randint(2, 4)
        return mod_atom(I, m, rng.randrange(m))
    op = rng.random()
    if op < 0.4:
        return union(*(random_expr(rng, L, depth - 1) for _ in range(rng.randint(2, 3))))
    if op < 0.8:
        return intersect(*(random_expr(rng, L, depth - 1) for _ in range(rng.randint(2, 3))))
    return complement(random_expr(rng, L, depth - 1))


# ---------------------------------------------------------------------------
# proposition


def _xi_approx_sqrt(count: int, u: int, m: int) -> bool:
    """``count / 2**u`` is ``m/sqrt(u)``-approximately ``1/m``, in squared integer form."""
    total = 1 << u
    lower_gap = total - m * count  # (1 - m x) 2^u
    if lower_gap > 0 and lower_gap * lower_gap * u > m * m * total * total:
        return False
    upper_gap = m * count - total  # (m x - 1) 2^u, compared against m x 2^u
    if upper_gap > 0 and upper_gap * upper_gap * u > m * m * (m * count) ** 2:
        return False
    return True


def suite_binomial_claim(upto: int = 4096) -> SuiteReport:
    rep = SuiteReport("binomial-claim")
    c = 1  # C(u, floor(u/2)), stepped from u - 1
    for u in range(1, upto + 1):
        t = u // 2
        c = c * u // (t + 1) if u % 2 else c * 2
        rep.record(c * c * u < 1 << (2 * u), u=u)
    # spot checks through the direct binomial
    for u in (1, 2, 3, 10, 99, 1000, upto):
        rep.record(central_binomial_bound(u), u=u, check="direct")
    return rep


def suite_proposition(cases: int = 200, seed: int = 0, max_u: int = 400, moduli=range(2, 7)) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("proposition")
    for m in moduli:
        for u in range((2 * m) ** 2, max_u + 1):
            counts = residue_counts(u, m)
            if sum(counts) != 1 << u:
                rep.record(False, m=m, u=u, issue="classes do not partition")
            for _ in range(cases):
                extra = rng.randint(0, 6)
                I = interval(1, u + extra)
                r = random_restriction(rng, I, extra)
                if rng.random() < 0.5:
                    r = r.assign(u + extra + 1 + rng.randint(0, 3), rng.randint(0, 1))
                uu = ns_unrestricted(r, I)
                j = r.ones_in(I)
                ok = uu == u and all(
                    _xi_approx_sqrt(counts[(o - j) % m], u, m) for o in range(m)
                )
                rep.record(ok, m=m, u=u, r=r.to_json())
    # cross-check the residue table against plain binomial sums on a sample
    for _ in range(50):
        m, u = rng.randint(2, 6), rng.randint(0, 120)
        counts = residue_counts(u, m)
        rep.record(all(counts[t] == oracles.binomial_class_sum(u, m, t) for t in range(m)), m=m, u=u)
    # the even/odd partial sum claim on random unimodal sequences
    for _ in range(cases):
        peak = rng.randint(0, 12)
        up = sorted(rng.randint(0, 50) for _ in range(peak))
        down = sorted((rng.randint(0, 50) for _ in range(rng.randint(0, 12))), reverse=True)
        seq = up + down
        rep.record(alternating_sum_bound(seq), seq=seq)
    bc = suite_binomial_claim()
    rep.passed += bc.passed
    rep.failed += bc.failed
    rep.counterexamples += bc.counterexamples
    return rep


# ---------------------------------------------------------------------------
# savings


def suite_savings(cases: int = 1000, seed: int = 0) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("savings")
    for case in range(cases):
        B = random_strategy(rng, range(1, 17), 40, 12)
        S = with_savings(B)
        same_shape = all(
            a[0] == b[0] and a[1].restriction == b[1].restriction and a[1].bet_position == b[1].bet_position
            for a, b in zip(B.nodes(), S.nodes())
        )
        near_max = all(cbar < c + 2 for c, cbar in capital_report(S).values())
        ok = same_shape and near_max and check_conservative(S) and check_savings_lowerbound(B)
        rep.record(ok, case=case, strategy=B.to_json() if not ok else None)
    return rep


# ---------------------------------------------------------------------------
# earning


def brute_earning(F: StrategyFamily, X, L: int) -> Fraction:
    """Expected earning by enumerating every assignment of ``1..L``."""
    total, hits = Fraction(0), 0
    for w in oracles.assignments(range(1, L + 1)):
        if not X.contains(w):
            continue
        hits += 1
        for i, B in F:
            node, d = B.root, 0
            while node.children is not None:
                node = node.children[w[node.bet_position]]
                d += 1
            total += Fraction(1, 1 << i) * node.mass * (1 << d)
    return total / hits


def suite_earning(cases: int = 500, seed: int = 0, L: int = 8) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("earning")
    for case in range(cases):
        eng = MeasureEngine()
        n = rng.randint(1, 3)
        F = random_family(rng, n, range(1, L + 1), 12, L)
        whole = expected_earning(F, FULL, eng)
        rep.record(whole == 1 - Fraction(1, 1 << n), case=case, check="whole-space", got=whole)

        X = random_expr(rng, L)
        mx = eng.measure(X)
        if mx == 0:
            continue
        eX = expected_earning(F, X, eng)
        if case % 5 == 0:
            rep.record(eX == brute_earning(F, X, L), case=case, check="oracle")

        X2 = intersect(X, random_expr(rng, L, 2))
        mx2 = eng.measure(X2)
        if mx2 > 0:
            e2 = expected_earning(F, X2, eng)
            rep.record(e2 <= mx / mx2 * eX, case=case, check="subset", lhs=e2, rhs=mx / mx2 * eX)

        # partition X along one position, or by modulo classes
        if rng.random() < 0.5:
            p = rng.randint(1, L)
            parts = [intersect(X, cyl({p: 0})), intersect(X, cyl({p: 1}))]
        else:
            m = rng.randint(2, 3)
            I = rng.sample(range(1, L + 1), rng.randint(1, L))
            parts = [intersect(X, mod_atom(I, m, o)) for o in range(m)]
        parts = [q for q in parts if eng.measure(q) > 0]
        try:
            k = min_earning_part(F, parts, X, eng)
            rep.record(expected_earning(F, parts[k], eng) <= eX, case=case, check="min-part")
        except (PreconditionError, InvariantViolation) as err:
            rep.record(False, case=case, check="min-part", error=str(err))

        d = mx * Fraction(rng.randint(1, 15), 16)
        try:
            res = low_capital_subset(F, X, d, eng)
        except InvariantViolation as err:
            rep.record(False, case=case, check="low-capital", error=str(err))
            continue
        ok = res.measure_Y >= d and res.measure_Z <= mx - d
        for i, B in F:
            for s, node in B.leaves():
                if node.mass * (1 << len(s)) > res.bounds[i]:
                    ok = ok and eng.measure(intersect(cyl(node.restriction), res.Y)) == 0
        rep.record(ok, case=case, check="low-capital", d=d)
        rep.notes["low_capital_strict"] = rep.notes.get("low_capital_strict", 0) + int(res.strict)
    return rep


# ---------------------------------------------------------------------------
# earning bound after new bets


def suite_kl_eta(cases: int = 300, seed: int = 0) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("kl-eta")
    asserted = vacuous = 0
    for case in range(cases):
        m = rng.choice((2, 3, 4))
        phi = 16 * m * m
        a = rng.randint(0, 7)
        I = interval(1, phi + a)
        pool = sorted(rng.sample(sorted(I), 10)) + [phi + a + 1, phi + a + 2]
        n = rng.randint(1, 3)
        before = random_family(rng, n, pool, 10, 8)
        after = StrategyFamily([grow_strategy(rng, B, pool, rng.randint(0, 14), 8) for _, B in before])
        M = ModuloSet(I, m, rng.randrange(m))
        try:
            r = verify_kl_eta(before, after, M, phi)
        except PreconditionError as err:
            rep.record(False, case=case, error=str(err))
            continue
        vacuous += r.vacuous
        asserted += r.holds is not None
        rep.record(r.ok, case=case, report=r.to_json())
    rep.notes.update(asserted=asserted, vacuous=vacuous)
    return rep


# ---------------------------------------------------------------------------
# slim -> restricted and growth


def random_slim_multiset(rng: random.Random, I, phi: int, count: int, extra=()) -> RestrictionMultiSet:
    I = sorted(I)
    out = []
    for _ in range(count):
        free = rng.randint(0, min(phi - 1, len(I)))
        assigned = rng.sample(I, len(I) - free)
        outside = [p for p in extra if rng.random() < 0.3]
        r = Restriction({p: rng.randint(0, 1) for p in assigned + outside})
        out.append((r, rng.randint(1, 3)))
    return RestrictionMultiSet(out)


def suite_slim(cases: int = 300, seed: int = 0) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("slim")
    for case in range(cases):
        size = rng.randint(1, 14)
        I = frozenset(rng.sample(range(1, 30), size))
        phi = rng.randint(1, size + 1)
        R = random_slim_multiset(rng, I, phi, rng.randint(1, 6), extra=(31, 32))
        if size >= 12 and rng.random() < 0.5:
            q = Fraction(rng.randint(math.ceil(3 * 4 * 16 / size), 16), 4 * 16)
            strict = True
        else:
            q, strict = Fraction(rng.randint(1, 15), 16), False
        try:
            J = slim_to_restricted(R, I, phi, q, strict=strict)
        except (PreconditionError, InvariantViolation) as err:
            rep.record(False, case=case, error=str(err))
            continue
        got = restricted_sum(R, J)
        need = slim_guarantee(R, I, phi, q)
        best = oracles.best_restricted_subset(R, I, len(J))
        ok = J <= I and len(J) >= q * len(I) and need <= got <= best
        if Fraction(3, size) <= q <= Fraction(1, 4):
            ok = ok and got >= (1 - 2 * q * phi) * R.sum_size()
        rep.record(ok, case=case, I=sorted(I), phi=phi, q=q, got=got, need=need, best=best)
    return rep


def random_grow_instance(rng: random.Random):
    """An instance meeting every precondition of the growth lemma, with real work to do.

    Weights are dyadic so that multiplicities ``weight * 2**|r|`` are integers.
    """
    phi = 2
    delta = rng.choice((Fraction(1, 5), Fraction(6, 25)))
    dp = delta * (1 - 2 * delta)
    g = 2
    q = delta / phi
    N = math.floor((1 / q) ** (g + 2)) + rng.randint(1, 40)
    base = rng.randint(1, 1000)
    I = list(range(base, base + N))
    unit = 1 << 20
    # lambda+(R) - x lies in (delta, g delta'], the lean part alone exceeds delta
    hi = math.floor(g * dp * unit)
    lo = math.floor(delta * unit) + 1
    open_units = rng.randint(lo, hi)
    lean_units = rng.randint(lo, open_units)
    members = []

    def add(r: Restriction, units: int):
        if units <= 0:
            return
        mult = Fraction(units, unit) * (1 << len(r))
        members.append((r, int(mult)))

    bits = {p: rng.randint(0, 1) for p in I}
    n_lean = rng.randint(1, 3)
    for t in range(n_lean):
        share = lean_units // n_lean + (lean_units % n_lean if t == 0 else 0)
        p = rng.choice(I)
        add(Restriction({x: b for x, b in bits.items() if x != p}), share)
    start = rng.randrange(len(I) - 5)
    hole = set(I[start:start + rng.randint(2, 5)])
    add(Restriction({x: b for x, b in bits.items() if x not in hole}), open_units - lean_units)
    add(Restriction(bits), rng.randint(0, 2) * unit // 4)
    return RestrictionMultiSet(members), frozenset(I), phi, delta


def suite_grow(cases: int = 40, seed: int = 0) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("grow")
    rounds = []
    for case in range(cases):
        R, I, phi, delta = random_grow_instance(rng)
        try:
            res = grow_restricted(R, I, phi, delta, strict=True)
            check_grow(R, I, phi, delta, res.x, res)
        except (PreconditionError, InvariantViolation) as err:
            rep.record(False, case=case, error=str(err))
            continue
        # independent recount of the three guarantees
        J = res.I_prime
        lean = sum(
            (k * r.measure() for r, k in R if 0 < sum(1 for p in J if p not in r) < phi),
            Fraction(0),
        )
        full = sum((k * r.measure() for r, k in R if all(p in r for p in J)), Fraction(0))
        ok = (
            J <= I
            and len(J) * (phi / delta) ** res.k >= len(I)
            and lean <= delta
            and full >= res.x + res.k * delta * (1 - 2 * delta)
            and res.k <= res.g
        )
        rounds.append(res.k)
        rep.record(ok, case=case, k=res.k, size=len(J))
    rep.notes["rounds"] = sorted(set(rounds))
    return rep


# ---------------------------------------------------------------------------
# good remainder


def suite_good_mod(cases: int = 300, seed: int = 0, L: int = 9) -> SuiteReport:
    rng = random.Random(seed)
    rep = SuiteReport("good-mod")
    for case in range(cases):
        eng = MeasureEngine()
        n = rng.randint(1, 3)
        F = random_family(rng, n, range(1, L + 1), 10, L)
        I = rng.sample(range(1, L + 1), rng.randint(1, L))
        m = rng.randint(2, 4)
        delta = Fraction(rng.randint(1, 15), 32)
        c = rng.choice((Fraction(3, 2), Fraction(2), Fraction(3)))
        theta = RestrictionMultiSet(
            random_restriction(rng, range(1, L + 1), rng.randint(2, 6)) for _ in range(rng.randint(0, 6))
        )
        mt = eng.measure(union_of_restrictions(theta.restrictions()))
        if not mt < delta:
            continue
        scan = scan_remainders(F, theta, I, m, c, delta, eng)
        ok = scan.qualified
        if ok and case % 4 == 0:
            # re-derive both bounds by enumeration
            M = modset(ModuloSet(I, m, scan.o))
            tset = union_of_restrictions(theta.restrictions())
            cond = oracles.brute_force_measure(intersect(tset, M), L) / oracles.brute_force_measure(M, L)
            ok = brute_earning(F, M, L) <= 1 / (1 - 1 / c) and cond <= c * delta
        rep.record(ok, case=case, m=m, I=sorted(I), delta=delta, c=c)
    return rep


# ---------------------------------------------------------------------------
# chooser claims


def suite_chooser_claims(cases: int = 7, seed: int = 0, horizon: int = 10_000) -> SuiteReport:
    from .game import GAMBLERS, make_gambler, run_game

    rep = SuiteReport("chooser-claims")
    for k in range(0, 17):
        rep.record(total_measure_bound_holds(k), check="size-bound", k=k)
        p = params_from_k(k)
        rep.record(
            p.xi == Fraction(1, 4) and (1 << p.n) == 16 * p.m and p.max_choices == 8 * p.n + 1,
            check="params",
            k=k,
        )
        # the last-choice arithmetic: q = (3/(32m)) / (3/(32m) - 2^-n) = 3 and 2^j 144 + 2 < h_j
        a = Fraction(3, 32 * p.m)
        rep.record(a / (a - Fraction(1, 1 << p.n)) == 3, check="last-choice-q", k=k)
    rep.record(all((1 << j) * 144 + 2 < (1 << (j + 8)) for j in range(1, 64)), check="last-choice-bound")

    desk = desk_params()
    for case in range(cases):
        name = GAMBLERS[case % len(GAMBLERS)]
        tr = run_game(desk, make_gambler(name, seed + case), horizon, enforce_conservative=name.startswith("savings"))
        v = tr.verdict
        rep.record(v["chosen_count"] <= desk.max_choices, check="finite-choices", gambler=name)
        for e in tr.emissions:
            if "M_size" in e["checks"]:
                rep.record(e["checks"]["M_size"], check="set-measure", gambler=name, emission=e["index"])
    return rep


def desk_params() -> ChooserParams:
    """Small parameters games can run at: ``m = 4``, ``phi = 16 m^2``, two strategies."""
    return ChooserParams(m=4, n=2, phi=256, ell=262)


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "proposition": suite_proposition,
    "savings": suite_savings,
    "earning": suite_earning,
    "kl-eta": suite_kl_eta,
    "slim": suite_slim,
    "grow": suite_grow,
    "good-mod": suite_good_mod,
    "chooser-claims": suite_chooser_claims,
}


def run_suite(name: str, cases: int | None = None, seed: int = 0) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn = SUITES[name]
    t0 = time.perf_counter()
    rep = fn(seed=seed) if cases is None else fn(cases=cases, seed=seed)
    rep.elapsed = time.perf_counter() - t0
    return rep
