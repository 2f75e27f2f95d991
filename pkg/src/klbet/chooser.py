"""The Modulo Chooser and the combinatorial lemmas it is built from."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .core import (
    InvariantViolation,
    ModuloSet,
    PreconditionError,
    Restriction,
    RestrictionMultiSet,
    Shape,
    classify,
    frac_str,
    interval,
    ns_unrestricted,
    pow2_exceeds,
)
from .earning import (
    KLEtaReport,
    StrategyFamily,
    expected_earning,
    verify_kl_eta,
)
from .measure import (
    MeasureEngine,
    intersect,
    modset,
    union_of_restrictions,
    xi_approx,
)


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ChooserParams:
    m: int
    n: int
    phi: int
    ell: int
    k: int | None = None
    slim_threshold: Fraction = Fraction(3, 8)
    delta: Fraction = Fraction(1, 4)
    earn_bound: Fraction = Fraction(3)
    c: Fraction = Fraction(3, 2)
    h_offset: int = 8

    def __post_init__(self):
        for name in ("slim_threshold", "delta", "earn_bound", "c"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.m < 2:
            raise PreconditionError(f"m must be >= 2, got {self.m}")
        if self.n < 1:
            raise PreconditionError(f"n must be >= 1, got {self.n}")
        if self.phi <= self.m * self.m:
            raise PreconditionError(f"need phi > m^2, got phi = {self.phi}, m = {self.m}")
        ratio, rem = divmod(self.phi, self.m * self.m)
        if rem or math.isqrt(ratio) ** 2 != ratio:
            raise PreconditionError(f"phi / m^2 must be a perfect square, got {self.phi} / {self.m ** 2}")
        if self.ell < 1:
            raise PreconditionError(f"ell must be >= 1, got {self.ell}")
        if not 0 < self.delta < Fraction(1, 2):
            raise PreconditionError(f"delta must lie in (0, 1/2), got {self.delta}")
        if self.c <= 1:
            raise PreconditionError(f"c must exceed 1, got {self.c}")

    @property
    def xi(self) -> Fraction:
        return Fraction(self.m, math.isqrt(self.phi))

    @property
    def delta_prime(self) -> Fraction:
        return self.delta * (1 - 2 * self.delta)

    @property
    def q(self) -> Fraction:
        return self.delta / self.phi

    def h(self, i: int) -> int:
        return 1 << (i + self.h_offset)

    @property
    def bounds(self) -> tuple[int, ...]:
        return tuple(self.h(i) for i in range(1, self.n + 1))

    @property
    def residue_threshold(self) -> Fraction:
        """``sum over i > n of 1/h_i``."""
        return Fraction(1, 1 << (self.n + self.h_offset))

    @property
    def max_choices(self) -> int:
        """At most ``n / delta'`` increments, plus the first set."""
        return math.ceil(self.n / self.delta_prime) + 1

    @property
    def measure_budget(self) -> Fraction:
        """Count bound times the largest measure a chosen set may have."""
        return self.max_choices * Fraction(1, self.m) / (1 - Fraction(1, 4))

    def ell_sufficient(self) -> bool:
        """``ell`` large enough for every growth step the count bound allows."""
        g = self.max_choices - 1
        return self.ell * self.q ** (g + 2) > 1

    def preconditions(self) -> dict[str, bool]:
        return {
            "phi_gt_m2": self.phi > self.m ** 2,
            "phi_over_m2_square": True,
            "ell_sufficient": self.ell_sufficient(),
            "first_set_large": self.ell >= 16 * self.m ** 2,
        }

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "n": self.n,
            "phi": str(self.phi),
            "ell": str(self.ell),
            "slim_threshold": frac_str(self.slim_threshold),
            "delta": frac_str(self.delta),
            "earn_bound": frac_str(self.earn_bound),
            "c": frac_str(self.c),
            "h_offset": self.h_offset,
            "h": [str(h) for h in self.bounds],
        }

    @classmethod
    def from_json(cls, obj: dict) -> ChooserParams:
        kw = {
            "m": int(obj["m"]),
            "n": int(obj["n"]),
            "phi": int(obj["phi"]),
            "ell": int(obj["ell"]),
            "k": None if obj.get("k") is None else int(obj["k"]),
        }
        for name in ("slim_threshold", "delta", "earn_bound", "c"):
            if name in obj:
                kw[name] = Fraction(obj[name])
        if "h_offset" in obj:
            kw["h_offset"] = int(obj["h_offset"])
        return cls(**kw)


def params_from_k(k: int) -> ChooserParams:
    if k < 0:
        raise PreconditionError(f"k must be >= 0, got {k}")
    m = 1 << (2 * (k + 4))
    n = 4 + (m.bit_length() - 1)
    phi = 16 * m * m
    ell = (4 * phi) ** (8 * n + 3)
    return ChooserParams(m=m, n=n, phi=phi, ell=ell, k=k)


def total_measure_bound_holds(k: int) -> bool:
    """Total measure bound of the full-size chooser is below ``2**-k``."""
    p = params_from_k(k)
    return (8 * p.n + 1) * Fraction(4, 3) / p.m < Fraction(1, 1 << k)


# ---------------------------------------------------------------------------
# restricted / lean bookkeeping


def restricted_sum(R: RestrictionMultiSet, J) -> Fraction:
    """Sum-size of the members of ``R`` assigning every position of ``J``."""
    J = frozenset(J)
    return sum(
        (k * r.measure() for r, k in R if ns_unrestricted(r, J) == 0), Fraction(0)
    )


def shape_sum(R: RestrictionMultiSet, J, phi: int, shape: Shape) -> Fraction:
    J = frozenset(J)
    return sum(
        (k * r.measure() for r, k in R if classify(r, J, phi) is shape), Fraction(0)
    )


def lean_part(R: RestrictionMultiSet, J, phi: int) -> RestrictionMultiSet:
    J = frozenset(J)
    return R.filter(lambda r: classify(r, J, phi) is Shape.LEAN)


def weighted_unrestricted(R: RestrictionMultiSet, J) -> Fraction:
    """``L(J) = sum of N*(r, J) * lambda(r)`` over ``R``."""
    J = frozenset(J)
    return sum((k * ns_unrestricted(r, J) * r.measure() for r, k in R), Fraction(0))


# ---------------------------------------------------------------------------
# slim -> restricted


def slim_blocks(I, q: Fraction) -> list[frozenset[int]]:
    """Consecutive blocks of length ``ceil(q |I|)`` in increasing position order."""
    ps = sorted(I)
    size = math.ceil(q * len(ps))
    count = len(ps) // size
    return [frozenset(ps[b * size:(b + 1) * size]) for b in range(count)]


def slim_guarantee(R: RestrictionMultiSet, I, phi: int, q) -> Fraction:
    """``(1 - phi q') lambda+(R)`` with ``q' = 1 / floor(|I| / ceil(q |I|))``."""
    q = Fraction(q)
    size = math.ceil(q * len(I))
    q_prime = Fraction(1, len(I) // size)
    return (1 - phi * q_prime) * R.sum_size()


def slim_to_restricted(R: RestrictionMultiSet, I, phi: int, q, strict: bool = True) -> frozenset[int]:
    """A block of ``I`` that most members of the slim multiset ``R`` fully restrict.

    Picks the block minimising ``L(J)``; ties go to the lowest block.
    ``strict`` enforces ``3/|I| <= q <= 1/4``; otherwise only ``0 < q < 1``.
    """
    I = frozenset(I)
    q = Fraction(q)
    if not I:
        raise PreconditionError("empty position set")
    for r, _ in R:
        if classify(r, I, phi) is Shape.CHUBBY:
            raise PreconditionError(f"chubby member {r!r} in a multiset that must be slim")
    if strict and not Fraction(3, len(I)) <= q <= Fraction(1, 4):
        raise PreconditionError(f"need 3/|I| <= q <= 1/4, got q = {q}, |I| = {len(I)}")
    if not 0 < q < 1:
        raise PreconditionError(f"need 0 < q < 1, got {q}")
    blocks = slim_blocks(I, q)
    scores = [weighted_unrestricted(R, b) for b in blocks]
    best = min(range(len(blocks)), key=lambda b: (scores[b], b))
    chosen = blocks[best]
    got = restricted_sum(R, chosen)
    if got < slim_guarantee(R, I, phi, q):
        raise InvariantViolation(f"selected block restricts only {got}")
    if Fraction(3, len(I)) <= q <= Fraction(1, 4) and got < (1 - 2 * q * phi) * R.sum_size():
        raise InvariantViolation(f"selected block misses the rounded guarantee: {got}")
    return chosen


# ---------------------------------------------------------------------------
# growing the restricted mass


@dataclass
class GrowResult:
    I_prime: frozenset[int]
    k: int
    g: int
    x: Fraction
    preconditions_held: bool
    violations: list[str] = field(default_factory=list)
    stalled: bool = False

    def __iter__(self):
        return iter((self.I_prime, self.k))


def _steps_needed(total: Fraction, x: Fraction, delta_prime: Fraction) -> int:
    if x >= total:
        return 0
    return math.ceil((total - x) / delta_prime)


def grow_restricted(R: RestrictionMultiSet, I, phi: int, delta, x=None, strict: bool = True) -> GrowResult:
    """Shrink ``I`` until the lean members of ``R`` have sum-size at most ``delta``.

    Each round hands the lean members to :func:`slim_to_restricted` with
    ``q = delta / phi``.  In strict mode a failed precondition raises; otherwise
    the run proceeds, records what failed, and stops if a round makes no progress.
    """
    I = frozenset(I)
    delta = Fraction(delta)
    delta_prime = delta * (1 - 2 * delta)
    q = delta / phi
    actual_x = restricted_sum(R, I)
    x = actual_x if x is None else Fraction(x)
    g = _steps_needed(R.sum_size(), x, delta_prime) if delta_prime > 0 else 0

    violations = []
    if phi < 2:
        violations.append(f"phi = {phi} < 2")
    if not 0 < delta < Fraction(1, 2):
        violations.append(f"delta = {delta} outside (0, 1/2)")
    if x > actual_x:
        violations.append(f"x = {x} exceeds the restricted sum-size {actual_x}")
    if not len(I) * q ** (g + 2) > 1:
        violations.append(f"|I| = {len(I)} <= (phi/delta)^(g+2) with g = {g}")
    held = not violations
    if strict and not held:
        raise PreconditionError("; ".join(violations))

    cur, k, stalled = I, 0, False
    cap = g if held else len(I)
    while True:
        lean = lean_part(R, cur, phi)
        if lean.sum_size() <= delta:
            break
        if k >= cap:
            if held:
                raise InvariantViolation(f"more than g = {g} shrinking rounds")
            stalled = True
            break
        nxt = slim_to_restricted(lean, cur, phi, q, strict=held)
        if nxt == cur:
            stalled = True
            break
        cur, k = nxt, k + 1

    res = GrowResult(cur, k, g, x, held, violations, stalled)
    if held:
        check_grow(R, I, phi, delta, x, res)
    return res


def check_grow(R: RestrictionMultiSet, I, phi: int, delta, x, res: GrowResult) -> None:
    delta = Fraction(delta)
    q = delta / phi
    if not res.I_prime <= frozenset(I):
        raise InvariantViolation("I' is not a subset of I")
    if len(res.I_prime) < q ** res.k * len(I):
        raise InvariantViolation(f"|I'| = {len(res.I_prime)} below q^k |I|")
    lean = shape_sum(R, res.I_prime, phi, Shape.LEAN)
    if lean > delta:
        raise InvariantViolation(f"lean sum-size {lean} > delta = {delta}")
    got = restricted_sum(R, res.I_prime)
    want = Fraction(x) + res.k * delta * (1 - 2 * delta)
    if got < want:
        raise InvariantViolation(f"restricted sum-size {got} < {want}")


# ---------------------------------------------------------------------------
# good remainder


@dataclass
class RemainderScan:
    o: int
    qualified: bool
    earn: Fraction
    theta_given_M: Fraction
    table: list[tuple[int, Fraction, Fraction] | None]


def scan_remainders(F: StrategyFamily, theta: RestrictionMultiSet, I, m: int, c, delta, engine: MeasureEngine | None = None) -> RemainderScan:
    engine = engine or MeasureEngine()
    c, delta = Fraction(c), Fraction(delta)
    earn_cap = 1 / (1 - 1 / c)
    theta_set = union_of_restrictions(theta.restrictions())
    table = []
    for o in range(m):
        M = modset(ModuloSet(I, m, o))
        mM = engine.measure(M)
        if mM == 0:
            table.append(None)
            continue
        earn = expected_earning(F, M, engine)
        cond = engine.measure(intersect(theta_set, M)) / mM
        table.append((o, earn, cond))
    good = [e for e in table if e is not None and e[1] <= earn_cap and e[2] <= c * delta]
    if good:
        o, earn, cond = good[0]
        return RemainderScan(o, True, earn, cond, table)
    # nothing qualifies: take the remainder closest to qualifying
    live = [e for e in table if e is not None]
    o, earn, cond = min(live, key=lambda e: (max(e[1] / earn_cap, e[2] / (c * delta)), e[0]))
    return RemainderScan(o, False, earn, cond, table)


def find_good_remainder(F: StrategyFamily, Theta: RestrictionMultiSet, I, m: int, c, delta, engine: MeasureEngine | None = None) -> int:
    engine = engine or MeasureEngine()
    c, delta = Fraction(c), Fraction(delta)
    if c <= 1:
        raise PreconditionError(f"c must exceed 1, got {c}")
    mt = engine.measure(union_of_restrictions(Theta.restrictions()))
    if not mt < delta:
        raise PreconditionError(f"lambda(Theta) = {mt} is not below delta = {delta}")
    scan = scan_remainders(F, Theta, I, m, c, delta, engine)
    if not scan.qualified:
        raise InvariantViolation("no remainder has both low earning and small lean overlap")
    return scan.o


# ---------------------------------------------------------------------------
# the chooser


def _size_at_least(size: int, ell: int, q: Fraction, z: Fraction) -> bool:
    """``size >= q**z * ell`` for rational ``z >= 0`` and ``0 < q < 1``."""
    lo, hi = math.floor(z), math.ceil(z)
    if size >= q ** lo * ell:
        return True
    if size < q ** hi * ell:
        return False
    inv = 1 / q
    if inv.denominator == 1 and inv.numerator & (inv.numerator - 1) == 0:
        a = inv.numerator.bit_length() - 1
        return not pow2_exceeds(-a * z, Fraction(size, ell))
    from mpmath import iv

    saved = iv.prec
    try:
        prec = 128
        while prec <= 1 << 14:
            iv.prec = prec
            rhs = iv.exp(iv.log(iv.mpf(q.numerator) / q.denominator) * z.numerator / z.denominator) * ell
            if rhs.b <= size:
                return True
            if rhs.a > size:
                return False
            prec *= 4
    finally:
        iv.prec = saved
    raise ArithmeticError("could not separate the size bound")


@dataclass
class Emission:
    index: int
    turn: int
    M: ModuloSet
    k: int = 0
    faithful: bool = True
    grow: GrowResult | None = None
    scan: RemainderScan | None = None
    psi_sum: Fraction = Fraction(0)
    theta_sum: Fraction = Fraction(0)
    theta_given_M: Fraction = Fraction(0)
    earn: Fraction = Fraction(0)
    measure: Fraction = Fraction(0)
    checks: dict[str, bool] = field(default_factory=dict)
    kl: KLEtaReport | None = None

    def to_json(self) -> dict:
        ps = sorted(self.M.positions)
        return {
            "index": self.index,
            "turn": self.turn,
            "set": {"I_size": len(ps), "I_min": ps[0], "I_max": ps[-1], "m": self.M.modulus, "o": self.M.remainder},
            "grow_rounds": self.k,
            "faithful": self.faithful,
            "psi_sum_size": frac_str(self.psi_sum),
            "theta_sum_size": frac_str(self.theta_sum),
            "theta_given_M": frac_str(self.theta_given_M),
            "earn": frac_str(self.earn),
            "measure": frac_str(self.measure),
            "checks": dict(sorted(self.checks.items())),
            "kl_eta_previous": None if self.kl is None else self.kl.to_json(),
        }


class ModuloChooser:
    """Stateful chooser for one game.

    ``faithful`` stays true while every lemma precondition used so far held;
    emission properties are asserted only while it does.
    """

    def __init__(self, params: ChooserParams, engine: MeasureEngine | None = None, strict: bool = False):
        self.params = params
        self.engine = engine or MeasureEngine()
        self.strict = strict
        self.I: frozenset[int] | None = None
        self.o: int | None = None
        self.j: int | None = None
        self.snapshot: StrategyFamily | None = None
        self.seen: list[int] = []
        self.slimmed = Fraction(0)
        self.emissions: list[Emission] = []
        self.faithful = True
        self.last_turn = 0

    @property
    def current(self) -> ModuloSet | None:
        return None if self.I is None else ModuloSet(self.I, self.params.m, self.o)

    @property
    def count(self) -> int:
        return len(self.emissions)

    def observe(self, F: StrategyFamily) -> Fraction:
        """Fold bets defined since the last call into the slimmed-down sum-size."""
        if self.I is None:
            return self.slimmed
        phi, I = self.params.phi, self.I
        for i in range(1, self.params.n + 1):
            B = F[i]
            for leaf, _p in B.bets_since(self.seen[i - 1]):
                node = B.node(leaf)
                # a chubby leaf whose children are slim adds their measure;
                # a slim leaf's children replace it one-for-one
                if classify(node.restriction, I, phi) is Shape.CHUBBY:
                    for child in node.children:
                        if classify(child.restriction, I, phi).slim:
                            self.slimmed += Fraction(1, 1 << (len(leaf) + 1))
            self.seen[i - 1] = B.n_bets
        return self.slimmed

    def _start_epoch(self, F: StrategyFamily, turn: int, I: frozenset[int], o: int) -> None:
        self.I, self.o, self.j = I, o, turn
        self.snapshot = F.first(self.params.n)
        self.seen = [B.n_bets for _, B in self.snapshot]
        self.slimmed = Fraction(0)

    def turn(self, turn: int, F: StrategyFamily) -> ModuloSet | None:
        """Called at the start of ``turn`` with the family as it stands; maybe emit a set."""
        p = self.params
        self.last_turn = turn
        if self.I is None:
            I1 = interval(1, p.ell)
            e = Emission(1, turn, ModuloSet(I1, p.m, 0))
            Fn = F.first(p.n)
            e.earn = expected_earning(Fn, modset(e.M), self.engine)
            e.measure = self.engine.measure(modset(e.M))
            self._check_emission(e, Fn)
            self.emissions.append(e)
            self._start_epoch(F, turn, I1, 0)
            return e.M
        self.observe(F)
        if not self.slimmed > p.slim_threshold:
            return None
        return self._emit(turn, F)

    def _emit(self, turn: int, F: StrategyFamily) -> ModuloSet:
        p = self.params
        if self.count + 1 > p.max_choices:
            raise InvariantViolation(f"chooser would choose more than {p.max_choices} sets")
        Fn = F.first(p.n)
        prev = self.current
        kl = verify_kl_eta(self.snapshot, Fn, prev, p.phi, self.engine)

        R = Fn.leaf_multiset()
        theta_now = lean_part(R, self.I, p.phi)
        e = Emission(self.count + 1, turn, prev, kl=kl)
        if theta_now.sum_size() <= p.delta:
            I_next = self.I
        else:
            res = grow_restricted(R, self.I, p.phi, p.delta, strict=self.strict)
            e.grow, e.k = res, res.k
            I_next = res.I_prime
            if not res.preconditions_held or res.stalled:
                self.faithful = False
        theta = lean_part(R, I_next, p.phi)
        e.theta_sum = theta.sum_size()
        e.psi_sum = restricted_sum(R, I_next)
        scan = scan_remainders(Fn, theta, I_next, p.m, p.c, p.delta, self.engine)
        if not scan.qualified:
            self.faithful = False
            if self.strict:
                raise InvariantViolation("no good remainder")
        e.scan = scan
        e.M = ModuloSet(I_next, p.m, scan.o)
        e.earn, e.theta_given_M = scan.earn, scan.theta_given_M
        e.measure = self.engine.measure(modset(e.M))
        e.faithful = self.faithful
        self._check_emission(e, Fn)
        self.emissions.append(e)
        self._start_epoch(F, turn, I_next, scan.o)
        return e.M

    def _check_emission(self, e: Emission, Fn: StrategyFamily) -> None:
        p = self.params
        i = e.index - 1
        ck = e.checks
        ck["I1_psi"] = e.psi_sum >= i * p.delta_prime
        z = e.psi_sum / p.delta_prime
        ck["I1_size"] = _size_at_least(len(e.M.positions), p.ell, p.q, z)
        ck["I2_lean"] = e.theta_sum <= p.delta
        ck["M1_lean_given_M"] = e.theta_given_M <= p.c * p.delta
        ck["M2_earn"] = e.earn <= p.earn_bound
        ck["count"] = e.index <= p.max_choices
        if len(e.M.positions) >= 16 * p.m ** 2:
            ck["M_size"] = xi_approx(e.measure, Fraction(1, p.m), Fraction(1, 4))
        if e.kl is not None:
            ck["kl_eta"] = e.kl.ok
            if not e.kl.ok:
                raise InvariantViolation(f"earning bound fails before emission {e.index}")
        if e.faithful and not all(ck.values()):
            bad = sorted(name for name, ok in ck.items() if not ok)
            raise InvariantViolation(f"emission {e.index} fails {bad}")

    def final_kl(self, F: StrategyFamily) -> KLEtaReport | None:
        if self.I is None:
            return None
        return verify_kl_eta(self.snapshot, F.first(self.params.n), self.current, self.params.phi, self.engine)


def chooser_turn(state: ModuloChooser, params: ChooserParams, F_now: StrategyFamily, turn: int | None = None):
    """Functional-style wrapper: returns ``(chosen or None, state)``."""
    if state.params != params:
        raise PreconditionError("state belongs to different parameters")
    t = turn if turn is not None else state.last_turn + 1
    return state.turn(t, F_now), state
