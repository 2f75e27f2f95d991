"""Finite non-monotonic betting strategies as persistent bet trees.

A strategy maps outcome strings (``"", "0", "01", ...``) to a restriction and
a mass.  Defining a bet on a leaf-string splits it into two children that
additionally fix one position.  Strategies are immutable: :meth:`define_bet`
path-copies from the root and returns a new strategy that shares every
untouched subtree with its predecessor and remembers that predecessor.

Capital of a node is its mass divided by the measure of its restriction,
``c(s) = mu(s) * 2**len(s)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

from .core import (
    EMPTY_RESTRICTION,
    InvariantViolation,
    Restriction,
    frac_str,
    pow2_exceeds,
)
from .measure import PositionUniverse


class BetError(ValueError):
    pass


class NotALeaf(BetError):
    pass


class PositionAlreadyRestricted(BetError):
    pass


class MassMismatch(BetError):
    pass


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class Node:
    restriction: Restriction
    mass: Fraction
    bet_position: int | None = None
    children: tuple[Node, Node] | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None


def _check_path(s: str) -> str:
    if any(ch not in "01" for ch in s):
        raise ValueError(f"outcome strings are made of 0/1, got {s!r}")
    return s


class BettingStrategy:
    """An immutable finite bet tree."""

    __slots__ = ("root", "n_bets", "previous", "last_bet")

    def __init__(self, root: Node, n_bets: int = 0, previous=None, last_bet=None):
        self.root = root
        self.n_bets = n_bets
        self.previous = previous
        self.last_bet = last_bet

    @classmethod
    def initial(cls) -> BettingStrategy:
        return cls(Node(EMPTY_RESTRICTION, Fraction(1)))

    def __repr__(self) -> str:
        return f"BettingStrategy(bets={self.n_bets})"

    # -- navigation --------------------------------------------------------

    def node(self, s: str) -> Node:
        node = self.root
        for ch in _check_path(s):
            if node.children is None:
                raise UnknownNode(s)
            node = node.children[ch == "1"]
        return node

    def has_node(self, s: str) -> bool:
        try:
            self.node(s)
        except UnknownNode:
            return False
        return True

    def is_leaf(self, s: str) -> bool:
        return self.node(s).is_leaf

    def nodes(self) -> Iterator[tuple[str, Node]]:
        """Every (outcome string, node) pair, parents before children."""
        stack = [("", self.root)]
        while stack:
            s, node = stack.pop()
            yield s, node
            if node.children is not None:
                stack.append((s + "1", node.children[1]))
                stack.append((s + "0", node.children[0]))

    def leaves(self) -> Iterator[tuple[str, Node]]:
        return ((s, n) for s, n in self.nodes() if n.children is None)

    def leaf_restrictions(self) -> list[Restriction]:
        return [n.restriction for _, n in self.leaves()]

    def capital(self, s: str) -> Fraction:
        return self.node(s).mass * (1 << len(s))

    def bet_positions(self) -> set[int]:
        return {n.bet_position for _, n in self.nodes() if n.children is not None}

    def bets_since(self, n_bets: int) -> list[tuple[str, int]]:
        """The ``(leaf, position)`` bets defined after the first ``n_bets``, oldest first."""
        out = []
        cur = self
        while cur is not None and cur.n_bets > n_bets:
            out.append(cur.last_bet)
            cur = cur.previous
        out.reverse()
        return out

    # -- growth ------------------------------------------------------------

    def define_bet(self, leaf: str, p: int, mass0, mass1) -> BettingStrategy:
        _check_path(leaf)
        mass0, mass1 = Fraction(mass0), Fraction(mass1)
        spine = [self.root]
        for ch in leaf:
            node = spine[-1]
            if node.children is None:
                raise NotALeaf(f"{leaf!r} is not a node of the strategy")
            spine.append(node.children[ch == "1"])
        target = spine[-1]
        if target.children is not None:
            raise NotALeaf(f"{leaf!r} already has a bet defined")
        if p in target.restriction:
            raise PositionAlreadyRestricted(
                f"position {p} is already restricted at {leaf!r}"
            )
        if mass0 < 0 or mass1 < 0:
            raise MassMismatch(f"masses must be non-negative, got {mass0}, {mass1}")
        if mass0 + mass1 != target.mass:
            raise MassMismatch(
                f"child masses {mass0} + {mass1} != {target.mass} at {leaf!r}"
            )
        r = target.restriction
        kids = (Node(r.assign(p, 0), mass0), Node(r.assign(p, 1), mass1))
        new = Node(r, target.mass, p, kids)
        for depth in range(len(leaf) - 1, -1, -1):
            parent = spine[depth]
            c = list(parent.children)
            c[leaf[depth] == "1"] = new
            new = Node(parent.restriction, parent.mass, parent.bet_position, tuple(c))
        return BettingStrategy(new, self.n_bets + 1, self, (leaf, p))

    # -- checks ------------------------------------------------------------

    def validate(self) -> None:
        """Raise :class:`InvariantViolation` if any structural invariant fails."""
        if len(self.root.restriction) or self.root.mass != 1:
            raise InvariantViolation("root must carry the empty restriction and mass 1")
        for s, node in self.nodes():
            if node.mass < 0:
                raise InvariantViolation(f"negative mass at {s!r}")
            if node.children is None:
                continue
            a, b = node.children
            p = node.bet_position
            if p in node.restriction:
                raise InvariantViolation(f"bet position {p} already restricted at {s!r}")
            if a.restriction != node.restriction.assign(p, 0) or b.restriction != node.restriction.assign(p, 1):
                raise InvariantViolation(f"children of {s!r} do not split position {p}")
            if a.mass + b.mass != node.mass:
                raise InvariantViolation(f"mass not conserved at {s!r}")

    # -- serialization -----------------------------------------------------

    def to_json(self) -> list[dict]:
        return [
            {
                "path": s,
                "restriction": n.restriction.to_json(),
                "mass": frac_str(n.mass),
                "bet_position": n.bet_position,
            }
            for s, n in sorted(self.nodes(), key=lambda e: (len(e[0]), e[0]))
        ]

    @classmethod
    def from_json(cls, rows: list[Mapping]) -> BettingStrategy:
        by_path = {row["path"]: row for row in rows}
        if "" not in by_path:
            raise ValueError("strategy dump has no root")

        def build(s: str) -> Node:
            row = by_path[s]
            kids = None
            if row.get("bet_position") is not None:
                kids = (build(s + "0"), build(s + "1"))
            return Node(
                Restriction.from_json(row["restriction"]),
                Fraction(row["mass"]),
                row.get("bet_position"),
                kids,
            )

        n_internal = sum(1 for row in rows if row.get("bet_position") is not None)
        out = cls(build(""), n_internal)
        out.validate()
        return out


def define_bet(B: BettingStrategy, leaf: str, p: int, mass0, mass1) -> BettingStrategy:
    return B.define_bet(leaf, p, mass0, mass1)


def capital(B: BettingStrategy, s: str) -> Fraction:
    return B.capital(s)


def capital_report(B: BettingStrategy) -> dict[str, tuple[Fraction, Fraction]]:
    """``{s: (c(s), cbar(s))}`` for every node."""
    out = {}
    stack = [("", B.root, Fraction(0))]
    while stack:
        s, node, running = stack.pop()
        c = node.mass * (1 << len(s))
        cbar = max(running, c)
        out[s] = (c, cbar)
        if node.children is not None:
            stack.append((s + "0", node.children[0], cbar))
            stack.append((s + "1", node.children[1], cbar))
    return out


def path_of(B: BettingStrategy, w: Mapping[int, int]) -> list[tuple[str, Node]]:
    """Root-to-leaf path of nodes whose restriction ``w`` agrees with."""
    out = [("", B.root)]
    node, s = B.root, ""
    while node.children is not None:
        b = w[node.bet_position]
        s += "1" if b else "0"
        node = node.children[b]
        out.append((s, node))
    return out


def maximal_achieved_capital(B: BettingStrategy, w: Mapping[int, int], universe: PositionUniverse | None = None) -> Fraction:
    if universe is not None:
        universe.check(B.bet_positions())
    return max(n.mass * (1 << len(s)) for s, n in path_of(B, w))


# ---------------------------------------------------------------------------
# savings


def savings_step(c: Fraction, c0: Fraction, c1: Fraction, play: Fraction, bank: Fraction):
    """Split ``(play, bank)`` at a node with original capitals ``c -> (c0, c1)``.

    Returns ``((play0, bank0), (play1, bank1))``.
    """
    if c == 0 or c0 == c1:
        return (play, bank), (play, bank)
    b = 0 if c0 > c1 else 1
    f = ((c0 if b == 0 else c1) - c) / c
    won = (1 + f) * play
    if won >= 2:
        win = (won / 2, bank + won / 2)
    else:
        win = (won, bank)
    lose = ((1 - f) * play, bank)
    return (win, lose) if b == 0 else (lose, win)


def savings_split(B: BettingStrategy) -> dict[str, tuple[Fraction, Fraction]]:
    """``{s: (c_play(s), c_bank(s))}`` of ``B`` with savings."""
    out = {"": (Fraction(1), Fraction(0))}
    stack = [("", B.root)]
    while stack:
        s, node = stack.pop()
        if node.children is None:
            continue
        d = len(s)
        c = node.mass * (1 << d)
        c0 = node.children[0].mass * (1 << (d + 1))
        c1 = node.children[1].mass * (1 << (d + 1))
        k0, k1 = savings_step(c, c0, c1, *out[s])
        out[s + "0"], out[s + "1"] = k0, k1
        stack.append((s + "0", node.children[0]))
        stack.append((s + "1", node.children[1]))
    return out


def with_savings(B: BettingStrategy) -> BettingStrategy:
    """Same restrictions and bet positions, masses rebuilt from play + bank capital."""
    split = savings_split(B)

    def build(s: str, node: Node) -> Node:
        play, bank = split[s]
        mass = (play + bank) / (1 << len(s))
        if node.children is None:
            return Node(node.restriction, mass)
        kids = (build(s + "0", node.children[0]), build(s + "1", node.children[1]))
        if kids[0].mass + kids[1].mass != mass:
            raise InvariantViolation(f"savings masses not additive at {s!r}")
        return Node(node.restriction, mass, node.bet_position, kids)

    return BettingStrategy(build("", B.root), B.n_bets)


def check_conservative(B: BettingStrategy) -> bool:
    return all(c >= cbar - 2 for c, cbar in capital_report(B).values())


def check_savings_lowerbound(B: BettingStrategy) -> bool:
    """``c'(s) > log2(cbar(s)) - 2`` at every node, checked as ``2**(c'+2) > cbar``."""
    orig = capital_report(B)
    split = savings_split(B)
    return all(
        pow2_exceeds(play + bank + 2, orig[s][1]) for s, (play, bank) in split.items()
    )
