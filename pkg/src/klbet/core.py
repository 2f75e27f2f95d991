"""Restrictions, modulo sets and restriction multisets.

Everything here is an immutable value.  Measures and sum-sizes are exact
:class:`fractions.Fraction` objects; nothing in the package touches floats
on a code path that decides a result.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator, Mapping
from fractions import Fraction


class PreconditionError(ValueError):
    """An operation was called outside the range where its guarantee holds."""


class InvariantViolation(AssertionError):
    """A guarantee that must hold under the preconditions did not."""


def frac_str(x: Fraction | int) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s: str | int | Fraction) -> Fraction:
    return Fraction(s)


def _check_position(p: int) -> int:
    if isinstance(p, bool) or not isinstance(p, int):
        raise TypeError(f"position must be an int, got {p!r}")
    if p < 1:
        raise ValueError(f"positions are 1-based, got {p}")
    return p


class Restriction(Mapping):
    """A finite partial assignment of bits to positions.

    Unassigned positions are implicitly ``*``.  The restriction denotes the
    clopen set of sequences that agree with it on its support.
    """

    __slots__ = ("_bits", "_support", "_hash")

    def __init__(self, bits: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        d = dict(bits)
        for p, b in d.items():
            _check_position(p)
            if b not in (0, 1):
                raise ValueError(f"bit at position {p} must be 0 or 1, got {b!r}")
        self._bits = d
        self._support = None
        self._hash = None

    @classmethod
    def _trusted(cls, d: dict) -> Restriction:
        r = cls.__new__(cls)
        r._bits = d
        r._support = None
        r._hash = None
        return r

    def __getitem__(self, p: int) -> int:
        return self._bits[p]

    def __iter__(self) -> Iterator[int]:
        return iter(self._bits)

    def __len__(self) -> int:
        return len(self._bits)

    def __contains__(self, p: object) -> bool:
        return p in self._bits

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._bits.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Restriction):
            return self._bits == other._bits
        return NotImplemented

    def __repr__(self) -> str:
        inner = ", ".join(f"{p}:{b}" for p, b in sorted(self._bits.items()))
        return f"Restriction({{{inner}}})"

    @property
    def support(self) -> frozenset[int]:
        if self._support is None:
            self._support = frozenset(self._bits)
        return self._support

    def assign(self, p: int, b: int) -> Restriction:
        """Return a copy with position ``p`` set to ``b``; ``p`` must be free."""
        _check_position(p)
        if p in self._bits:
            raise ValueError(f"position {p} is already restricted")
        if b not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {b!r}")
        d = dict(self._bits)
        d[p] = b
        return Restriction._trusted(d)

    def without(self, p: int) -> Restriction:
        d = dict(self._bits)
        del d[p]
        return Restriction._trusted(d)

    def consistent_with(self, other: Restriction) -> bool:
        """True iff the two clopen sets intersect."""
        a, b = (self, other) if len(self) <= len(other) else (other, self)
        return all(b._bits.get(p, v) == v for p, v in a._bits.items())

    def contains(self, w: Mapping[int, int]) -> bool:
        """Membership test for a (sufficiently long) assignment ``w``."""
        return all(w[p] == v for p, v in self._bits.items())

    def measure(self) -> Fraction:
        return Fraction(1, 1 << len(self._bits))

    def ones_in(self, positions: frozenset[int]) -> int:
        if len(positions) < len(self._bits):
            return sum(1 for p in positions if self._bits.get(p) == 1)
        return sum(1 for p, v in self._bits.items() if v == 1 and p in positions)

    def to_json(self) -> dict[str, int]:
        return {str(p): b for p, b in sorted(self._bits.items())}

    @classmethod
    def from_json(cls, obj: Mapping[str, int]) -> Restriction:
        return cls({int(p): int(b) for p, b in obj.items()})


EMPTY_RESTRICTION = Restriction()


class ModuloSet:
    """Sequences whose number of ones on ``positions`` is ``remainder`` mod ``modulus``."""

    __slots__ = ("positions", "modulus", "remainder", "_hash")

    def __init__(self, positions: Iterable[int], modulus: int, remainder: int):
        pos = frozenset(positions)
        if not pos:
            raise ValueError("a modulo set needs at least one position")
        for p in pos:
            _check_position(p)
        if modulus < 2:
            raise ValueError(f"modulus must be >= 2, got {modulus}")
        if not 0 <= remainder < modulus:
            raise ValueError(f"remainder {remainder} outside [0, {modulus})")
        self.positions = pos
        self.modulus = modulus
        self.remainder = remainder
        self._hash = None

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.positions, self.modulus, self.remainder))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ModuloSet):
            return (
                self.modulus == other.modulus
                and self.remainder == other.remainder
                and self.positions == other.positions
            )
        return NotImplemented

    def __repr__(self) -> str:
        ps = sorted(self.positions)
        if len(ps) > 6 and ps[-1] - ps[0] + 1 == len(ps):
            shown = f"[{ps[0]}..{ps[-1]}]"
        else:
            shown = "{" + ", ".join(map(str, ps)) + "}"
        return f"Mod({shown}, {self.modulus}, {self.remainder})"

    def contains(self, w: Mapping[int, int]) -> bool:
        return sum(w[p] for p in self.positions) % self.modulus == self.remainder

    def to_json(self) -> dict:
        return {"I": sorted(self.positions), "m": self.modulus, "o": self.remainder}

    @classmethod
    def from_json(cls, obj: Mapping) -> ModuloSet:
        return cls(obj["I"], int(obj["m"]), int(obj["o"]))


def interval(lo: int, hi: int) -> frozenset[int]:
    """The positions ``lo..hi`` inclusive."""
    return frozenset(range(lo, hi + 1))


def ns_unrestricted(r: Restriction, positions: Iterable[int]) -> int:
    """Number of positions in ``positions`` that ``r`` leaves unassigned."""
    if not isinstance(positions, (frozenset, set)):
        positions = frozenset(positions)
    if len(r) == 0:
        return len(positions)
    return len(positions) - len(positions & r.support)


class Shape(enum.Enum):
    CHUBBY = "chubby"
    LEAN = "lean"
    RESTRICTS_ENTIRE = "restricts-entire"

    @property
    def slim(self) -> bool:
        return self is not Shape.CHUBBY


def classify(r: Restriction, positions: Iterable[int], phi: int) -> Shape:
    # chubby uses the non-strict count: N* >= phi
    if phi < 1:
        raise ValueError(f"phi must be >= 1, got {phi}")
    u = ns_unrestricted(r, positions)
    if u >= phi:
        return Shape.CHUBBY
    if u == 0:
        return Shape.RESTRICTS_ENTIRE
    return Shape.LEAN


class RestrictionMultiSet:
    """A multiset of restrictions with integer multiplicities."""

    __slots__ = ("_counts",)

    def __init__(self, entries: Iterable[Restriction | tuple[Restriction, int]] = ()):
        counts: dict[Restriction, int] = {}
        for e in entries:
            if isinstance(e, Restriction):
                r, k = e, 1
            else:
                r, k = e
            if k < 1:
                raise ValueError(f"multiplicity must be >= 1, got {k}")
            counts[r] = counts.get(r, 0) + k
        self._counts = counts

    def __iter__(self) -> Iterator[tuple[Restriction, int]]:
        return iter(self._counts.items())

    def __len__(self) -> int:
        return len(self._counts)

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, RestrictionMultiSet):
            return self._counts == other._counts
        return NotImplemented

    def __repr__(self) -> str:
        return f"RestrictionMultiSet({len(self._counts)} distinct, sum_size={self.sum_size()})"

    def multiplicity(self, r: Restriction) -> int:
        return self._counts.get(r, 0)

    def restrictions(self) -> list[Restriction]:
        return list(self._counts)

    def sum_size(self) -> Fraction:
        total = Fraction(0)
        for r, k in self._counts.items():
            total += k * r.measure()
        return total

    def join(self, other: RestrictionMultiSet) -> RestrictionMultiSet:
        out = RestrictionMultiSet()
        out._counts = dict(self._counts)
        for r, k in other._counts.items():
            out._counts[r] = out._counts.get(r, 0) + k
        return out

    __or__ = join

    def filter(self, pred) -> RestrictionMultiSet:
        out = RestrictionMultiSet()
        out._counts = {r: k for r, k in self._counts.items() if pred(r)}
        return out

    def to_json(self) -> list[dict]:
        return [
            {"restriction": r.to_json(), "multiplicity": k}
            for r, k in sorted(self._counts.items(), key=lambda e: sorted(e[0].items()))
        ]


def join(a: RestrictionMultiSet, b: RestrictionMultiSet) -> RestrictionMultiSet:
    return a.join(b)


def pow2_exceeds(t: Fraction, x: Fraction) -> bool:
    """Decide ``2**t > x`` for rationals ``t`` and ``x`` without rounding error.

    Integer bounds settle almost every case.  What remains is
    ``2**(p/q)`` against a rational in ``[1, 2)``; that is decided by exact
    powers when ``q`` is small and by rigorous interval arithmetic otherwise
    (``2**(p/q)`` is irrational there, so the two sides never tie).
    """
    t, x = Fraction(t), Fraction(x)
    if x <= 0:
        return True
    a = t.numerator // t.denominator
    lo = Fraction(2) ** a
    if x < lo:
        return True
    if x >= 2 * lo:
        return False
    frac = t - a
    if frac == 0:
        return False
    y = x / lo
    p, q = frac.numerator, frac.denominator
    if q <= 256:
        return (1 << p) * y.denominator ** q > y.numerator ** q
    from mpmath import iv

    saved = iv.prec
    try:
        prec = 64
        while prec <= 1 << 16:
            iv.prec = prec
            lhs = iv.mpf(2) ** (iv.mpf(p) / q)
            rhs = iv.mpf(y.numerator) / y.denominator
            if lhs.a > rhs.b:
                return True
            if lhs.b < rhs.a:
                return False
            prec *= 4
    finally:
        iv.prec = saved
    raise ArithmeticError(f"could not separate 2**{t} from {x}")
