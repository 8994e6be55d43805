"""
This module contains the trail, the reference unit tests on constraints and
the two propagation engines.

The counter engine keeps curr/poss for every constraint up to date on each
assignment. The watched engine only looks at a constraint when one of its
watched literals becomes false and keeps a watching set that satisfies
``sum(S) - max(S) >= degree``.
"""
import logging
from abc import ABC, abstractmethod
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

from pbsat.errors import ConfigError, InstanceError
from pbsat.model import LinearConstraint, Literal, neg, var_of


logger = logging.getLogger(__name__)


class TrailEntry(NamedTuple):
    literal: Literal
    level: int
    reason: int | None  # None marks a decision


class Trail:
    """
    The partial assignment as an ordered stack of (literal, level, reason).

    :param num_vars: Number of variables, indexed from 1.
    """

    def __init__(self, num_vars: int):
        self.num_vars = num_vars
        self.values: list[bool | None] = [None] * (num_vars + 1)
        self.levels = [-1] * (num_vars + 1)
        self.reasons: list[int | None] = [None] * (num_vars + 1)
        self.positions = [-1] * (num_vars + 1)
        self.entries: list[TrailEntry] = []
        self.level_starts: list[int] = []

    @classmethod
    def from_literals(cls, num_vars: int, literals: Iterable[Literal]) -> "Trail":
        """Build a level-0 trail holding the given literals, in order."""
        trail = cls(num_vars)
        for lit in literals:
            trail.push(lit)
        return trail

    @property
    def decision_level(self) -> int:
        return len(self.level_starts)

    def __len__(self) -> int:
        return len(self.entries)

    def value(self, lit: Literal) -> bool | None:
        value = self.values[var_of(lit)]
        if value is None:
            return None
        return value if lit > 0 else not value

    def is_true(self, lit: Literal) -> bool:
        return self.value(lit) is True

    def is_false(self, lit: Literal) -> bool:
        return self.value(lit) is False

    def is_assigned(self, var: int) -> bool:
        return self.values[var] is not None

    def level_of(self, lit: Literal) -> int:
        return self.levels[var_of(lit)]

    def position_of(self, lit: Literal) -> int:
        return self.positions[var_of(lit)]

    def reason_of(self, lit: Literal) -> int | None:
        return self.reasons[var_of(lit)]

    def push(self, lit: Literal, reason: int | None = None) -> TrailEntry:
        """
        Make ``lit`` true at the current decision level.

        :param lit: The literal to assert.
        :param reason: Id of the constraint that forced it, None for a decision.
        :return: The new trail entry.
        """
        var = var_of(lit)
        if self.values[var] is not None:
            raise InstanceError(f"variable {var} is already assigned")
        entry = TrailEntry(lit, self.decision_level, reason)
        self.values[var] = lit > 0
        self.levels[var] = entry.level
        self.reasons[var] = reason
        self.positions[var] = len(self.entries)
        self.entries.append(entry)
        return entry

    def new_level(self):
        self.level_starts.append(len(self.entries))

    def pop(self) -> TrailEntry:
        entry = self.entries.pop()
        var = var_of(entry.literal)
        self.values[var] = None
        self.levels[var] = -1
        self.reasons[var] = None
        self.positions[var] = -1
        return entry

    def literals(self) -> list[Literal]:
        return [entry.literal for entry in self.entries]

    def locked(self) -> set[int]:
        """Ids of the constraints that are the reason of some trail literal."""
        return {entry.reason for entry in self.entries if entry.reason is not None}


@dataclass
class ConstraintState:
    curr: int
    poss: int
    watch_set: frozenset = field(default_factory=frozenset)
    max_unvalued_weight: int = 0


class UnitStatus(Enum):
    NOT_UNIT = "not unit"
    UNIT = "unit"
    CONFLICTING = "conflicting"


@dataclass(frozen=True)
class UnitCheck:
    status: UnitStatus
    forced: tuple[Literal, ...] = ()


def curr_poss(c: LinearConstraint, trail: Trail) -> tuple[int, int]:
    """
    Compute curr and poss of a constraint from scratch.

    curr is the weight of the true literals minus the degree; poss is the
    weight of the literals that are not false minus the degree.

    :param c: The constraint.
    :param trail: The partial assignment.
    :return: (curr, poss)
    """
    curr = poss = -c.degree
    for weight, lit in c.terms:
        value = trail.value(lit)
        if value is None:
            poss += weight
        elif value:
            curr += weight
            poss += weight
    return curr, poss


def is_unit(c: LinearConstraint, trail: Trail) -> UnitCheck:
    """
    Decide whether a constraint is conflicting, unit or neither.

    Every unvalued literal whose weight exceeds poss is forced.

    :param c: The constraint.
    :param trail: The partial assignment.
    :return: The status and the forced literals, in term order.
    """
    _, poss = curr_poss(c, trail)
    if poss < 0:
        return UnitCheck(UnitStatus.CONFLICTING)
    forced = tuple(lit for weight, lit in c.terms if weight > poss and trail.value(lit) is None)
    if forced:
        return UnitCheck(UnitStatus.UNIT, forced)
    return UnitCheck(UnitStatus.NOT_UNIT)


def is_watching_set(c: LinearConstraint, watched: Iterable[Literal]) -> bool:
    """True when ``sum(S) - max(S) >= degree`` over the weights of ``watched``."""
    weights = [c.weight_of(lit) for lit in watched]
    return sum(weights) - max(weights, default=0) >= c.degree


class PropagationEngine(ABC):
    """
    Shared machinery of both engines: constraint store, trail, FIFO queue
    over newly assigned literals and the propagation loop.

    :param num_vars: Number of variables of the instance.
    """
    name = "base"

    def __init__(self, num_vars: int):
        self.trail = Trail(num_vars)
        self.constraints: dict[int, LinearConstraint] = {}
        self.propagations = 0
        self._next_id = 0
        self._queue_head = 0
        self._pending: deque[int] = deque()

    @property
    def num_vars(self) -> int:
        return self.trail.num_vars

    def constraint(self, cid: int) -> LinearConstraint:
        return self.constraints[cid]

    def add_constraint(self, c: LinearConstraint, learned: bool | None = None) -> int:
        """
        Insert a constraint and queue it for examination under the current trail.

        :param c: The constraint.
        :param learned: Overrides the constraint's learned flag when given.
        :return: The id assigned to it.
        """
        cid = self._next_id
        self._next_id += 1
        c = c.with_id(cid, learned)
        self.constraints[cid] = c
        self._attach(c)
        self._pending.append(cid)
        return cid

    def remove_constraint(self, cid: int):
        c = self.constraints.pop(cid)
        self._detach(c)

    def decide(self, lit: Literal):
        """Open a new decision level and assert ``lit`` there."""
        self.trail.new_level()
        self._assign(lit, None)

    def assign(self, lit: Literal, reason: int | None = None):
        """Assert ``lit`` at the current level without opening a new one."""
        self._assign(lit, reason)

    def _assign(self, lit: Literal, reason: int | None):
        self.trail.push(lit, reason)
        self.on_assign(lit)

    def backtrack(self, level: int):
        """
        Undo every assignment above ``level``.

        :param level: The decision level to return to.
        """
        trail = self.trail
        while trail.decision_level > level:
            start = trail.level_starts.pop()
            while len(trail.entries) > start:
                entry = trail.pop()
                self.on_unassign(entry.literal)
        self._queue_head = min(self._queue_head, len(trail.entries))

    def propagate(self) -> int | None:
        """
        Run unit propagation to fixpoint.

        :return: The id of a conflicting constraint, or None at fixpoint.
        """
        # Newly added constraints first
        while self._pending:
            cid = self._pending.popleft()
            if cid in self.constraints and not self._examine(cid):
                return cid

        # Then every literal assigned since the last call, in order
        entries = self.trail.entries
        while self._queue_head < len(entries):
            lit = entries[self._queue_head].literal
            self._queue_head += 1
            conflict = self._on_falsified(neg(lit))
            if conflict is not None:
                return conflict
        return None

    def _force(self, lit: Literal, cid: int):
        self._assign(lit, cid)
        self.propagations += 1

    @abstractmethod
    def on_assign(self, lit: Literal):
        pass

    @abstractmethod
    def on_unassign(self, lit: Literal):
        pass

    @abstractmethod
    def state(self, cid: int) -> ConstraintState:
        pass

    @abstractmethod
    def _attach(self, c: LinearConstraint):
        pass

    @abstractmethod
    def _detach(self, c: LinearConstraint):
        pass

    @abstractmethod
    def _examine(self, cid: int) -> bool:
        """Examine one constraint, forcing literals as needed; False on conflict."""

    @abstractmethod
    def _on_falsified(self, lit: Literal) -> int | None:
        """Examine the constraints affected by ``lit`` becoming false."""


class CounterEngine(PropagationEngine):
    """
    Counter-based propagation: curr and poss are updated for every constraint
    containing the variable of each (un)assigned literal.
    """
    name = "counter"

    def __init__(self, num_vars: int):
        super().__init__(num_vars)
        self._occurrences: dict[Literal, dict[int, int]] = {}
        self._curr: dict[int, int] = {}
        self._poss: dict[int, int] = {}

    def on_assign(self, lit: Literal):
        for cid, weight in self._occurrences.get(lit, {}).items():
            self._curr[cid] += weight
        for cid, weight in self._occurrences.get(neg(lit), {}).items():
            self._poss[cid] -= weight

    def on_unassign(self, lit: Literal):
        for cid, weight in self._occurrences.get(lit, {}).items():
            self._curr[cid] -= weight
        for cid, weight in self._occurrences.get(neg(lit), {}).items():
            self._poss[cid] += weight

    def counters(self, cid: int) -> tuple[int, int]:
        return self._curr[cid], self._poss[cid]

    def state(self, cid: int) -> ConstraintState:
        c = self.constraints[cid]
        unvalued = [weight for weight, lit in c.terms if self.trail.value(lit) is None]
        return ConstraintState(self._curr[cid], self._poss[cid], max_unvalued_weight=max(unvalued, default=0))

    def _attach(self, c: LinearConstraint):
        self._curr[c.id], self._poss[c.id] = curr_poss(c, self.trail)
        for weight, lit in c.terms:
            self._occurrences.setdefault(lit, {})[c.id] = weight

    def _detach(self, c: LinearConstraint):
        for _, lit in c.terms:
            self._occurrences[lit].pop(c.id, None)
        del self._curr[c.id]
        del self._poss[c.id]

    def _examine(self, cid: int) -> bool:
        poss = self._poss[cid]
        if poss < 0:
            return False
        # Terms are sorted by descending weight, so stop at the first one that cannot be forced
        for weight, lit in self.constraints[cid].terms:
            if weight <= poss:
                break
            if self.trail.value(lit) is None:
                self._force(lit, cid)
        return True

    def _on_falsified(self, lit: Literal) -> int | None:
        for cid in list(self._occurrences.get(lit, {})):
            if not self._examine(cid):
                return cid
        return None


class WatchedEngine(PropagationEngine):
    """
    Watched-set propagation. A constraint is examined only when a literal of
    its watching set becomes false; the set is then rebuilt from non-false
    literals in descending weight order.
    """
    name = "watched"

    def __init__(self, num_vars: int):
        super().__init__(num_vars)
        self._watchers: dict[Literal, set[int]] = {}
        self._watch_sets: dict[int, set[Literal]] = {}

    def on_assign(self, lit: Literal):
        pass

    def on_unassign(self, lit: Literal):
        # Watching sets stay valid when variables become unvalued
        pass

    def watch_set(self, cid: int) -> frozenset:
        return frozenset(self._watch_sets[cid])

    def state(self, cid: int) -> ConstraintState:
        c = self.constraints[cid]
        curr, poss = curr_poss(c, self.trail)
        unvalued = [weight for weight, lit in c.terms if self.trail.value(lit) is None]
        return ConstraintState(curr, poss, self.watch_set(cid), max(unvalued, default=0))

    def _select_watches(self, c: LinearConstraint) -> tuple[set[Literal], bool]:
        """
        Choose a watching set under the current trail.

        :return: The chosen literals and whether they are all non-false and
            satisfy the watching criterion. On failure the set holds every
            non-false literal plus the most recently falsified ones.
        """
        trail = self.trail
        chosen: set[Literal] = set()
        total = top = 0
        for weight, lit in c.terms:
            if trail.is_false(lit):
                continue
            chosen.add(lit)
            total += weight
            top = max(top, weight)
            if total - top >= c.degree:
                return chosen, True

        falsified = sorted(
            ((weight, lit) for weight, lit in c.terms if trail.is_false(lit)),
            key=lambda term: trail.position_of(term[1]),
            reverse=True,
        )
        for weight, lit in falsified:
            if total - top >= c.degree:
                break
            chosen.add(lit)
            total += weight
            top = max(top, weight)
        return chosen, False

    def _rewatch(self, cid: int, watched: set[Literal]):
        old = self._watch_sets.get(cid, set())
        for lit in old - watched:
            self._watchers[lit].discard(cid)
        for lit in watched - old:
            self._watchers.setdefault(lit, set()).add(cid)
        self._watch_sets[cid] = watched

    def _attach(self, c: LinearConstraint):
        watched, _ = self._select_watches(c)
        self._rewatch(c.id, watched)

    def _detach(self, c: LinearConstraint):
        for lit in self._watch_sets.pop(c.id):
            self._watchers[lit].discard(c.id)

    def _examine(self, cid: int) -> bool:
        c = self.constraints[cid]
        watched, healthy = self._select_watches(c)
        self._rewatch(cid, watched)
        if healthy:
            return True

        check = is_unit(c, self.trail)
        if check.status is UnitStatus.CONFLICTING:
            return False
        for lit in check.forced:
            self._force(lit, cid)
        return True

    def _on_falsified(self, lit: Literal) -> int | None:
        for cid in list(self._watchers.get(lit, ())):
            if cid in self.constraints and not self._examine(cid):
                return cid
        return None


ENGINES = {CounterEngine.name: CounterEngine, WatchedEngine.name: WatchedEngine}


def make_engine(name: str, num_vars: int) -> PropagationEngine:
    """
    Create a propagation engine by name.

    :param name: "counter" or "watched".
    :param num_vars: Number of variables.
    :return: The engine.
    """
    try:
        return ENGINES[name](num_vars)
    except KeyError:
        raise ConfigError(f"unknown engine {name!r}; choose from {', '.join(ENGINES)}") from None
