"""The turn loop of the betting game, packaged gamblers, verdicts and transcripts."""

from __future__ import annotations

import csv
import io
import json
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .chooser import ChooserParams, ModuloChooser
from .core import (
    InvariantViolation,
    ModuloSet,
    PreconditionError,
    frac_str,
)
from .earning import StrategyFamily
from .measure import (
    ClopenExpr,
    MeasureEngine,
    as_expr,
    difference,
    measure_modulo_given_restriction,
    union,
    union_of_restrictions,
)
from .strategy import BetError, BettingStrategy, savings_step

SCHEMA = 1


class ConservativeViolation(BetError):
    pass


@dataclass(frozen=True)
class Bet:
    strategy: int
    leaf: str
    position: int
    mass0: Fraction
    mass1: Fraction

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "leaf": self.leaf,
            "position": self.position,
            "mass0": frac_str(self.mass0),
            "mass1": frac_str(self.mass1),
        }

    @classmethod
    def from_json(cls, obj: dict) -> Bet:
        return cls(
            int(obj["strategy"]),
            obj["leaf"],
            int(obj["position"]),
            Fraction(obj["mass0"]),
            Fraction(obj["mass1"]),
        )


@dataclass(frozen=True)
class GameView:
    turn: int
    family: StrategyFamily
    chosen: tuple[ModuloSet, ...]
    params: ChooserParams

    @property
    def current(self) -> ModuloSet | None:
        return self.chosen[-1] if self.chosen else None


# ---------------------------------------------------------------------------
# gamblers


class Gambler:
    name = "gambler"

    def act(self, view: GameView) -> Bet | None:
        raise NotImplementedError


class NullGambler(Gambler):
    name = "null"

    def act(self, view):
        return None


class GreedyDoubler(Gambler):
    """Each strategy in turn bets everything on zeros at positions 1, 2, ... until it clears its bound."""

    name = "greedy-doubler"

    def act(self, view):
        p = view.params
        for i, B in view.family:
            if i > p.n:
                break
            depth = B.n_bets
            leaf = "0" * depth
            if B.capital(leaf) > p.h(i):
                continue
            return Bet(i, leaf, depth + 1, B.node(leaf).mass, Fraction(0))
        return None


class ParityChaser(Gambler):
    """Breadth-first over leaves, betting inside the current position set.

    With two or more free positions of ``I`` left it splits evenly on the
    smallest one; with exactly one left the remainder fixes the last bit and it
    bets everything on that bit.  Leaves deeper than ``depth_limit`` are left alone.
    """

    name = "parity-chaser"

    def __init__(self, depth_limit: int = 8):
        self.depth_limit = depth_limit
        self._target = None
        self._queue: deque = deque()

    def _rebuild(self, view):
        self._queue = deque(
            sorted(
                ((i, s) for i, B in view.family if i <= view.params.n for s, _ in B.leaves()),
                key=lambda e: (len(e[1]), e[0], e[1]),
            )
        )

    def act(self, view):
        M = view.current
        if M is None:
            return None
        if self._target is not M:
            self._target = M
            self._rebuild(view)
        while self._queue:
            i, s = self._queue.popleft()
            B = view.family[i]
            if not B.is_leaf(s) or len(s) >= self.depth_limit:
                continue
            node = B.node(s)
            if node.mass == 0:
                continue
            r = node.restriction
            free = sorted(p for p in M.positions if p not in r)
            if not free:
                continue
            self._queue.append((i, s + "0"))
            self._queue.append((i, s + "1"))
            if len(free) >= 2:
                return Bet(i, s, free[0], node.mass / 2, node.mass / 2)
            ones = r.ones_in(M.positions)
            need = (M.remainder - ones) % M.modulus
            if need == 0:
                return Bet(i, s, free[0], node.mass, Fraction(0))
            if need == 1:
                return Bet(i, s, free[0], Fraction(0), node.mass)
            return Bet(i, s, free[0], node.mass / 2, node.mass / 2)
        return None


class RandomGambler(Gambler):
    """Seeded random bets on random leaves; stops after ``max_bets``."""

    name = "random"

    def __init__(self, seed: int = 0, max_bets: int = 200, spread: int = 4):
        self.rng = random.Random(seed)
        self.max_bets = max_bets
        self.spread = spread
        self.made = 0
        self._leaves: dict[int, list[str]] = {}

    def act(self, view):
        if self.made >= self.max_bets:
            return None
        p = view.params
        if not self._leaves:
            self._leaves = {i: [""] for i in range(1, p.n + 1)}
        i = self.rng.randrange(1, p.n + 1)
        leaves = self._leaves[i]
        k = self.rng.randrange(len(leaves))
        s = leaves[k]
        node = view.family[i].node(s)
        hi = min(p.ell, 1 << 20) + self.spread
        while True:
            pos = self.rng.randint(1, hi)
            if pos not in node.restriction:
                break
        a = self.rng.randint(0, 4)
        leaves[k] = leaves[-1]
        leaves.pop()
        leaves.extend((s + "0", s + "1"))
        self.made += 1
        return Bet(i, s, pos, node.mass * a / 4, node.mass * (4 - a) / 4)


class SavingsWrapper(Gambler):
    """Runs an inner gambler on its own strategies and plays their savings versions."""

    def __init__(self, inner: Gambler):
        self.inner = inner
        self.name = f"savings-{inner.name}"
        self.family: StrategyFamily | None = None
        self.split: dict[int, dict[str, tuple[Fraction, Fraction]]] = {}

    def act(self, view):
        if self.family is None:
            self.family = StrategyFamily.initial(len(view.family))
            self.split = {i: {"": (Fraction(1), Fraction(0))} for i, _ in view.family}
        bet = self.inner.act(GameView(view.turn, self.family, view.chosen, view.params))
        if bet is None:
            return None
        self.family = self.family.define_bet(bet.strategy, bet.leaf, bet.position, bet.mass0, bet.mass1)
        B = self.family[bet.strategy]
        s = bet.leaf
        c, c0, c1 = B.capital(s), B.capital(s + "0"), B.capital(s + "1")
        table = self.split[bet.strategy]
        k0, k1 = savings_step(c, c0, c1, *table[s])
        table[s + "0"], table[s + "1"] = k0, k1
        scale = Fraction(1, 1 << (len(s) + 1))
        return Bet(bet.strategy, s, bet.position, sum(k0) * scale, sum(k1) * scale)


class ReplayGambler(Gambler):
    def __init__(self, actions: Sequence[Bet | None], name: str):
        self.actions = list(actions)
        self.name = name
        self._next = 0

    def act(self, view):
        if self._next >= len(self.actions):
            return None
        a = self.actions[self._next]
        self._next += 1
        return a


GAMBLERS = ("null", "greedy-doubler", "parity-chaser", "random", "savings-parity-chaser", "savings-random", "savings-greedy-doubler")


def make_gambler(name: str, seed: int = 0) -> Gambler:
    if name.startswith("savings-"):
        return SavingsWrapper(make_gambler(name[len("savings-"):], seed))
    if name == "null":
        return NullGambler()
    if name == "greedy-doubler":
        return GreedyDoubler()
    if name == "parity-chaser":
        return ParityChaser()
    if name == "random":
        return RandomGambler(seed)
    raise PreconditionError(f"unknown gambler {name!r}; choose from {', '.join(GAMBLERS)}")


# ---------------------------------------------------------------------------
# goals


def high_capital_restrictions(B: BettingStrategy, h) -> list:
    """Restrictions of the first nodes on each path whose capital exceeds ``h``."""
    out = []
    stack = [("", B.root)]
    while stack:
        s, node = stack.pop()
        if node.mass * (1 << len(s)) > h:
            out.append(node.restriction)
            continue
        if node.children is not None:
            stack.append((s + "0", node.children[0]))
            stack.append((s + "1", node.children[1]))
    return out


@dataclass
class Surviving:
    measure: Fraction
    witness: ClopenExpr


def surviving_subset(C, F: StrategyFamily, H: Sequence[int], engine: MeasureEngine | None = None) -> Surviving:
    """Points of ``C`` on which strategy ``i`` never has capital above ``H[i-1]``, for every ``i <= len(H)``."""
    engine = engine or MeasureEngine()
    high = [r for i, B in F if i <= len(H) for r in high_capital_restrictions(B, H[i - 1])]
    witness = difference(as_expr(C), union_of_restrictions(high))
    return Surviving(engine.measure(witness), witness)


def goal_achieved(C, F: StrategyFamily, H: Sequence[int], engine: MeasureEngine | None = None) -> bool:
    return surviving_subset(C, F, H, engine).measure == 0


def _conservative_after(B: BettingStrategy, leaf: str) -> bool:
    cbar = Fraction(0)
    node = B.root
    for d, ch in enumerate(leaf):
        cbar = max(cbar, node.mass * (1 << d))
        node = node.children[ch == "1"]
    cbar = max(cbar, node.mass * (1 << len(leaf)))
    for child in node.children:
        c = child.mass * (1 << (len(leaf) + 1))
        if c < max(cbar, c) - 2:
            return False
    return True


# ---------------------------------------------------------------------------
# transcripts


@dataclass
class GameTranscript:
    config: dict
    turns: list[dict] = field(default_factory=list)
    emissions: list[dict] = field(default_factory=list)
    verdict: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "config": self.config,
            "turns": self.turns,
            "emissions": self.emissions,
            "verdict": self.verdict,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> GameTranscript:
        obj = json.loads(text)
        if obj.get("schema") != SCHEMA:
            raise ValueError(f"unsupported transcript schema {obj.get('schema')!r}")
        return cls(obj["config"], obj["turns"], obj["emissions"], obj["verdict"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["turn", "chosen_o", "strategy", "leaf", "position", "mass0", "mass1", "slimmed_sum_size", "earn_on_current_M", "chosen_measure_total"])
        for t in self.turns:
            a = t["action"] or {}
            cs = t["chosen_set"]
            mt = t["metrics"]
            w.writerow([
                t["turn"],
                "" if cs is None else cs["o"],
                a.get("strategy", ""),
                a.get("leaf", ""),
                a.get("position", ""),
                a.get("mass0", ""),
                a.get("mass1", ""),
                mt["slimmed_sum_size"],
                mt["earn_on_current_M"],
                mt["chosen_measure_total"],
            ])
        return buf.getvalue()

    @property
    def chosen_sets(self) -> list[ModuloSet]:
        return [ModuloSet.from_json(t["chosen_set"]) for t in self.turns if t["chosen_set"] is not None]

    @property
    def actions(self) -> list[Bet | None]:
        return [None if t["action"] is None else Bet.from_json(t["action"]) for t in self.turns]


def run_game(params: ChooserParams, gambler: Gambler, horizon: int, enforce_conservative: bool = False, seed: int = 0, kl_every: int = 0) -> GameTranscript:
    """Play chooser against ``gambler`` for at most ``horizon`` turns.

    The game stops early once a turn passes with no chosen set and no bet.
    ``kl_every > 0`` re-checks the earning bound for the current set every that many turns.
    """
    if horizon < 1:
        raise PreconditionError(f"horizon must be >= 1, got {horizon}")
    engine = MeasureEngine()
    chooser = ModuloChooser(params, engine)
    F = StrategyFamily.initial(params.n)
    tr = GameTranscript(config={
        "params": params.to_json(),
        "gambler": gambler.name,
        "seed": seed,
        "horizon": horizon,
        "enforce_conservative": enforce_conservative,
        "kl_every": kl_every,
    })
    chosen: list[ModuloSet] = []
    total = Fraction(0)
    weighted = Fraction(0)  # sum of 2^-i * integral of c_i over the current set
    M_measure = Fraction(1)
    max_pos = 0
    kl_checks = 0
    terminated = False

    for t in range(1, horizon + 1):
        M = chooser.turn(t, F)
        if M is not None:
            e = chooser.emissions[-1]
            chosen.append(M)
            total += e.measure
            M_measure = e.measure
            weighted = e.earn * e.measure
            max_pos = max(max_pos, max(M.positions))
        bet = gambler.act(GameView(t, F, tuple(chosen), params))
        if bet is not None:
            if not 1 <= bet.strategy <= params.n:
                raise BetError(f"strategy index {bet.strategy} outside [1, {params.n}]")
            B = F[bet.strategy]
            node = B.node(bet.leaf)
            B2 = B.define_bet(bet.leaf, bet.position, bet.mass0, bet.mass1)
            if enforce_conservative and not _conservative_after(B2, bet.leaf):
                raise ConservativeViolation(f"bet at turn {t} makes strategy {bet.strategy} non-conservative")
            F = F.replace(bet.strategy, B2)
            cur = chooser.current
            w = Fraction(1, 1 << bet.strategy)
            kids = B2.node(bet.leaf).children
            weighted += w * (
                sum(k.mass * measure_modulo_given_restriction(cur, k.restriction) for k in kids)
                - node.mass * measure_modulo_given_restriction(cur, node.restriction)
            )
            max_pos = max(max_pos, bet.position)
        slimmed = chooser.observe(F)
        if kl_every and t % kl_every == 0:
            rep = chooser.final_kl(F)
            kl_checks += 1
            if not rep.ok:
                raise InvariantViolation(f"earning bound fails at turn {t}")
        tr.turns.append({
            "turn": t,
            "chosen_set": None if M is None else M.to_json(),
            "action": None if bet is None else bet.to_json(),
            "metrics": {
                "slimmed_sum_size": frac_str(slimmed),
                "earn_on_current_M": frac_str(weighted / M_measure),
                "chosen_measure_total": frac_str(total),
            },
        })
        if M is None and bet is None:
            terminated = True
            break

    tr.emissions = [e.to_json() for e in chooser.emissions]
    tr.verdict = adjudicate(params, F, chosen, chooser, terminated, total, engine)
    tr.verdict["kl_checks"] = kl_checks
    tr.verdict["universe_bound"] = max_pos
    return tr


def adjudicate(params, F, chosen, chooser, terminated, total, engine) -> dict:
    H = params.bounds
    goals = [goal_achieved(C, F, H, engine) for C in chosen]
    last = surviving_subset(chosen[-1], F, H, engine)
    kl = chooser.final_kl(F)
    if not kl.ok:
        raise InvariantViolation("earning bound fails at the end of the game")
    residue = params.residue_threshold
    cwswr = None
    if last.measure > residue:
        # a large surviving part of the last set leaves a point of the union below every bound
        cwswr = surviving_subset(union(*(as_expr(C) for C in chosen)), F, H, engine).measure > 0
        if not cwswr:
            raise InvariantViolation("surviving residue but no surviving point in the chosen union")
    if all(goals):
        winner = "Gambler"
    elif terminated:
        winner = "Chooser"
    else:
        winner = "Undecided-at-horizon"
    return {
        "winner": winner,
        "terminated": terminated,
        "chosen_count": len(chosen),
        "max_choices": params.max_choices,
        "chosen_measure_total": frac_str(total),
        "measure_budget": frac_str(params.measure_budget),
        "goals_achieved": goals,
        "surviving_subset_measure": frac_str(last.measure),
        "residue_threshold": frac_str(residue),
        "residue_met": last.measure >= residue,
        "cwswr_check": cwswr,
        "faithful": chooser.faithful,
        "kl_eta_final": kl.to_json(),
    }


def replay(transcript: GameTranscript) -> GameTranscript:
    """Re-run a recorded game from its config and recorded actions."""
    cfg = transcript.config
    params = ChooserParams.from_json(cfg["params"])
    gambler = ReplayGambler(transcript.actions, cfg["gambler"])
    return run_game(
        params,
        gambler,
        cfg["horizon"],
        enforce_conservative=cfg["enforce_conservative"],
        seed=cfg["seed"],
        kl_every=cfg.get("kl_every", 0),
    )
