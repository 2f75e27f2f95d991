"""Exact uniform measure of clopen sets built from restrictions and modulo sets.

Expressions are immutable trees over two kinds of atoms, cylinders
(:class:`Cyl`, one restriction) and modulo atoms (:class:`ModAtom`), with
union, intersection and complement.  :func:`measure` evaluates them by
splitting on positions that occur in cylinder atoms; once only modulo atoms
remain, the count of ones on each region of the position Venn diagram is
folded in with binomial residue counts.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .core import (
    ModuloSet,
    PreconditionError,
    Restriction,
    ns_unrestricted,
)


class UniverseError(PreconditionError):
    pass


@dataclass(frozen=True)
class PositionUniverse:
    """All positions relevant to a computation lie in ``[1, bound]``."""

    bound: int

    def __post_init__(self):
        if self.bound < 1:
            raise ValueError(f"universe bound must be positive, got {self.bound}")

    def check(self, positions) -> None:
        for p in positions:
            if p > self.bound:
                raise UniverseError(
                    f"position {p} lies outside the universe [1, {self.bound}]"
                )


# ---------------------------------------------------------------------------
# binomial residue counts


def _cyclic_mul(a: tuple, b: tuple, m: int) -> tuple:
    out = [0] * m
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[(i + j) % m] += x * y
    return tuple(out)


@lru_cache(maxsize=8192)
def residue_counts(u: int, m: int) -> tuple[int, ...]:
    """``c[t] = sum of C(u, i) over i = t (mod m)``, for ``t`` in ``[0, m)``.

    Computed as the coefficients of ``(1 + x)**u`` reduced modulo ``x**m - 1``.
    """
    if u < 0 or m < 1:
        raise ValueError(f"bad arguments u={u}, m={m}")
    if m == 1:
        return (1 << u,)
    result = tuple([1] + [0] * (m - 1))
    base = tuple([1, 1] + [0] * (m - 2))
    e = u
    while e:
        if e & 1:
            result = _cyclic_mul(result, base, m)
        e >>= 1
        if e:
            base = _cyclic_mul(base, base, m)
    return result


def measure_restriction(r: Restriction) -> Fraction:
    return r.measure()


def measure_modulo_given_restriction(M: ModuloSet, r: Restriction) -> Fraction:
    """``lambda(M | r~)``; zero when the two sets are disjoint."""
    u = ns_unrestricted(r, M.positions)
    j = r.ones_in(M.positions)
    t = (M.remainder - j) % M.modulus
    return Fraction(residue_counts(u, M.modulus)[t], 1 << u)


def measure_modulo(M: ModuloSet) -> Fraction:
    u = len(M.positions)
    return Fraction(residue_counts(u, M.modulus)[M.remainder], 1 << u)


# ---------------------------------------------------------------------------
# expressions


class ClopenExpr:
    __slots__ = ("_hash", "_positions", "_cyl_positions")

    def restrict(self, p: int, b: int) -> ClopenExpr:
        raise NotImplementedError

    def contains(self, w: Mapping[int, int]) -> bool:
        raise NotImplementedError

    def _atoms(self):
        raise NotImplementedError

    def _eval_atoms(self, truth: Mapping) -> bool:
        raise NotImplementedError

    @property
    def positions(self) -> frozenset[int]:
        raise NotImplementedError

    @property
    def cyl_positions(self) -> frozenset[int]:
        raise NotImplementedError

    def __and__(self, other: ClopenExpr) -> ClopenExpr:
        return intersect(self, other)

    def __or__(self, other: ClopenExpr) -> ClopenExpr:
        return union(self, other)

    def __sub__(self, other: ClopenExpr) -> ClopenExpr:
        return difference(self, other)

    def __invert__(self) -> ClopenExpr:
        return complement(self)


class Const(ClopenExpr):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value
        self._hash = hash(("const", value))
        self._positions = frozenset()
        self._cyl_positions = frozenset()

    def __repr__(self):
        return "FULL" if self.value else "EMPTY"

    def __eq__(self, other):
        return isinstance(other, Const) and other.value == self.value

    def __hash__(self):
        return self._hash

    def restrict(self, p, b):
        return self

    def contains(self, w):
        return self.value

    def _atoms(self):
        return ()

    def _eval_atoms(self, truth):
        return self.value

    @property
    def positions(self):
        return self._positions

    @property
    def cyl_positions(self):
        return self._cyl_positions


FULL = Const(True)
EMPTY = Const(False)


class Cyl(ClopenExpr):
    """The clopen set of sequences consistent with a restriction."""

    __slots__ = ("r",)

    def __init__(self, r: Restriction):
        self.r = r
        self._hash = hash(("cyl", r))
        self._positions = None
        self._cyl_positions = None

    def __repr__(self):
        return f"Cyl({self.r!r})"

    def __eq__(self, other):
        return isinstance(other, Cyl) and other.r == self.r

    def __hash__(self):
        return self._hash

    def restrict(self, p, b):
        v = self.r.get(p)
        if v is None:
            return self
        if v != b:
            return EMPTY
        if len(self.r) == 1:
            return FULL
        return Cyl(self.r.without(p))

    def contains(self, w):
        return self.r.contains(w)

    def _atoms(self):
        return (self,)

    def _eval_atoms(self, truth):
        return truth[self]

    @property
    def positions(self):
        return self.r.support

    @property
    def cyl_positions(self):
        return self.r.support


def cyl(r: Restriction | Mapping[int, int]) -> ClopenExpr:
    if not isinstance(r, Restriction):
        r = Restriction(r)
    return FULL if len(r) == 0 else Cyl(r)


class ModAtom(ClopenExpr):
    """Count of ones on ``positions`` is ``remainder`` modulo ``modulus``."""

    __slots__ = ("I", "m", "o")

    def __init__(self, I: frozenset[int], m: int, o: int):
        self.I = I
        self.m = m
        self.o = o
        self._hash = hash(("mod", I, m, o))
        self._positions = I
        self._cyl_positions = frozenset()

    def __repr__(self):
        return f"ModAtom({repr(ModuloSet(self.I, self.m, self.o))[4:-1]})"

    def __eq__(self, other):
        return (
            isinstance(other, ModAtom)
            and other.m == self.m
            and other.o == self.o
            and other.I == self.I
        )

    def __hash__(self):
        return self._hash

    def restrict(self, p, b):
        if p not in self.I:
            return self
        return mod_atom(self.I - {p}, self.m, (self.o - b) % self.m)

    def contains(self, w):
        return sum(w[p] for p in self.I) % self.m == self.o

    def _atoms(self):
        return (self,)

    def _eval_atoms(self, truth):
        return truth[self]

    @property
    def positions(self):
        return self.I

    @property
    def cyl_positions(self):
        return self._cyl_positions


def mod_atom(I, m: int, o: int) -> ClopenExpr:
    I = frozenset(I)
    o %= m
    if not I:
        return FULL if o == 0 else EMPTY
    return ModAtom(I, m, o)


def modset(M: ModuloSet) -> ClopenExpr:
    return ModAtom(M.positions, M.modulus, M.remainder)


class _Nary(ClopenExpr):
    __slots__ = ("children", "_atoms_cache")
    _tag = ""

    def __init__(self, children: frozenset):
        self.children = children
        self._hash = hash((self._tag, children))
        self._positions = None
        self._cyl_positions = None
        self._atoms_cache = None

    def __eq__(self, other):
        return type(other) is type(self) and other._hash == self._hash and other.children == self.children

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(map(repr, self.children))})"

    @property
    def positions(self):
        if self._positions is None:
            self._positions = frozenset().union(*(c.positions for c in self.children))
        return self._positions

    @property
    def cyl_positions(self):
        if self._cyl_positions is None:
            self._cyl_positions = frozenset().union(
                *(c.cyl_positions for c in self.children)
            )
        return self._cyl_positions

    def _atoms(self):
        if self._atoms_cache is None:
            seen = {}
            for c in self.children:
                for a in c._atoms():
                    seen[a] = None
            self._atoms_cache = tuple(seen)
        return self._atoms_cache


class Union(_Nary):
    __slots__ = ()
    _tag = "union"

    def restrict(self, p, b):
        if p not in self.positions:
            return self
        return union(*(c.restrict(p, b) for c in self.children))

    def contains(self, w):
        return any(c.contains(w) for c in self.children)

    def _eval_atoms(self, truth):
        return any(c._eval_atoms(truth) for c in self.children)


class Intersection(_Nary):
    __slots__ = ()
    _tag = "inter"

    def restrict(self, p, b):
        if p not in self.positions:
            return self
        return intersect(*(c.restrict(p, b) for c in self.children))

    def contains(self, w):
        return all(c.contains(w) for c in self.children)

    def _eval_atoms(self, truth):
        return all(c._eval_atoms(truth) for c in self.children)


class Complement(ClopenExpr):
    __slots__ = ("child",)

    def __init__(self, child: ClopenExpr):
        self.child = child
        self._hash = hash(("not", child))

    def __eq__(self, other):
        return isinstance(other, Complement) and other.child == self.child

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Complement({self.child!r})"

    def restrict(self, p, b):
        if p not in self.child.positions:
            return self
        return complement(self.child.restrict(p, b))

    def contains(self, w):
        return not self.child.contains(w)

    def _atoms(self):
        return self.child._atoms()

    def _eval_atoms(self, truth):
        return not self.child._eval_atoms(truth)

    @property
    def positions(self):
        return self.child.positions

    @property
    def cyl_positions(self):
        return self.child.cyl_positions


def union(*parts: ClopenExpr) -> ClopenExpr:
    kids = set()
    for x in parts:
        if x is FULL or x == FULL:
            return FULL
        if x == EMPTY:
            continue
        if isinstance(x, Union):
            kids.update(x.children)
        else:
            kids.add(x)
    if not kids:
        return EMPTY
    if len(kids) == 1:
        return next(iter(kids))
    return Union(frozenset(kids))


def intersect(*parts: ClopenExpr) -> ClopenExpr:
    kids = set()
    for x in parts:
        if x == EMPTY:
            return EMPTY
        if x == FULL:
            continue
        if isinstance(x, Intersection):
            kids.update(x.children)
        else:
            kids.add(x)
    if not kids:
        return FULL
    if len(kids) == 1:
        return next(iter(kids))
    return Intersection(frozenset(kids))


def complement(x: ClopenExpr) -> ClopenExpr:
    if isinstance(x, Const):
        return EMPTY if x.value else FULL
    if isinstance(x, Complement):
        return x.child
    return Complement(x)


def difference(a: ClopenExpr, b: ClopenExpr) -> ClopenExpr:
    return intersect(a, complement(b))


def as_expr(x) -> ClopenExpr:
    if isinstance(x, ClopenExpr):
        return x
    if isinstance(x, Restriction):
        return cyl(x)
    if isinstance(x, ModuloSet):
        return modset(x)
    raise TypeError(f"cannot turn {type(x).__name__} into a clopen expression")


def union_of_restrictions(rs) -> ClopenExpr:
    return union(*(cyl(r) for r in rs))


# ---------------------------------------------------------------------------
# evaluation


class MeasureEngine:
    """Evaluates expression measures with a memo table shared across calls."""

    def __init__(self):
        self.cache: dict[ClopenExpr, Fraction] = {}

    def measure(self, e: ClopenExpr) -> Fraction:
        if isinstance(e, Const):
            return Fraction(int(e.value))
        hit = self.cache.get(e)
        if hit is not None:
            return hit
        val = self._compute(e)
        self.cache[e] = val
        return val

    def _compute(self, e: ClopenExpr) -> Fraction:
        if isinstance(e, Cyl):
            return e.r.measure()
        if isinstance(e, ModAtom):
            return Fraction(residue_counts(len(e.I), e.m)[e.o], 1 << len(e.I))
        if isinstance(e, Complement):
            return 1 - self.measure(e.child)
        cyl_pos = e.cyl_positions
        if not cyl_pos:
            return _mod_only_measure(e)
        if isinstance(e, Intersection):
            fast = self._cyl_mod_product(e)
            if fast is not None:
                return fast
        p = _branch_position(e)
        return (self.measure(e.restrict(p, 0)) + self.measure(e.restrict(p, 1))) / 2

    @staticmethod
    def _cyl_mod_product(e: Intersection) -> Fraction | None:
        # one cylinder intersected with one modulo atom has a closed form
        cyls = [c for c in e.children if isinstance(c, Cyl)]
        mods = [c for c in e.children if isinstance(c, ModAtom)]
        if len(cyls) != 1 or len(mods) != 1 or len(e.children) != 2:
            return None
        r, M = cyls[0].r, mods[0]
        return r.measure() * measure_modulo_given_restriction(ModuloSet(M.I, M.m, M.o), r)


def _branch_position(e: ClopenExpr) -> int:
    counts = Counter()
    for a in e._atoms():
        if isinstance(a, Cyl):
            counts.update(a.r.support)
    best = max(counts.values())
    return min(p for p, k in counts.items() if k == best)


def _mod_only_measure(e: ClopenExpr) -> Fraction:
    atoms = [a for a in e._atoms() if isinstance(a, ModAtom)]
    # one residue dimension per distinct (positions, modulus)
    dims: list[tuple[frozenset, int]] = []
    for a in atoms:
        key = (a.I, a.m)
        if key not in dims:
            dims.append(key)
    support = frozenset().union(*(I for I, _ in dims))
    regions: Counter = Counter()
    for p in support:
        regions[tuple(i for i, (I, _) in enumerate(dims) if p in I)] += 1
    states: dict[tuple, int] = {tuple(0 for _ in dims): 1}
    for sig, size in sorted(regions.items()):
        L = math.lcm(*(dims[i][1] for i in sig))
        counts = residue_counts(size, L)
        nxt: dict[tuple, int] = {}
        for st, w in states.items():
            for t, c in enumerate(counts):
                if not c:
                    continue
                s2 = list(st)
                for i in sig:
                    s2[i] = (s2[i] + t) % dims[i][1]
                s2 = tuple(s2)
                nxt[s2] = nxt.get(s2, 0) + w * c
        states = nxt
    total = 0
    for st, w in states.items():
        truth = {}
        for a in atoms:
            truth[a] = st[dims.index((a.I, a.m))] == a.o
        if e._eval_atoms(truth):
            total += w
    return Fraction(total, 1 << len(support))


def measure(e, universe: PositionUniverse | None = None, engine: MeasureEngine | None = None) -> Fraction:
    """Exact measure of an expression (or of a bare restriction / modulo set)."""
    e = as_expr(e)
    if universe is not None:
        universe.check(e.positions)
    return (engine or MeasureEngine()).measure(e)


measure_expr = measure


def conditional(a, b, engine: MeasureEngine | None = None) -> Fraction:
    """``lambda(a | b)``; ``b`` must have positive measure."""
    engine = engine or MeasureEngine()
    a, b = as_expr(a), as_expr(b)
    mb = engine.measure(b)
    if mb == 0:
        raise PreconditionError("conditioning on a set of measure zero")
    return engine.measure(intersect(a, b)) / mb


# ---------------------------------------------------------------------------
# approximation and modulo independence


def xi_approx(x: Fraction, y: Fraction, xi: Fraction) -> bool:
    """``(1 - xi) y <= x <= y / (1 - xi)``; at ``xi == 1`` the upper side is vacuous."""
    x, y, xi = Fraction(x), Fraction(y), Fraction(xi)
    if not 0 <= xi <= 1:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    if x < (1 - xi) * y:
        return False
    if xi == 1:
        return True
    return x * (1 - xi) <= y


def check_modulo_independence(I, m: int, xi: Fraction, r: Restriction, enforce: bool = True) -> bool:
    """Every remainder class of ``Mod(I, m, .)`` has conditional measure close to ``1/m``."""
    I = frozenset(I)
    xi = Fraction(xi)
    u = ns_unrestricted(r, I)
    if enforce and (xi <= 0 or u * xi * xi < m * m):
        raise PreconditionError(
            f"need {u} unrestricted positions >= (m/xi)^2 = {Fraction(m) ** 2 / xi ** 2 if xi else 'inf'}"
        )
    target = Fraction(1, m)
    return all(
        xi_approx(measure_modulo_given_restriction(ModuloSet(I, m, o), r), target, xi)
        for o in range(m)
    )


def central_binomial_bound(u: int) -> bool:
    """``C(u, floor(u/2)) 2^-u < 1/sqrt(u)`` in squared integer form."""
    c = math.comb(u, u // 2)
    return c * c * u < 4 ** u


def alternating_sum_bound(seq) -> bool:
    """For a unimodal non-negative sequence the even/odd index sums differ by at most its max."""
    even = sum(seq[1::2])
    odd = sum(seq[0::2])
    return abs(even - odd) <= (max(seq) if len(seq) else 0)
