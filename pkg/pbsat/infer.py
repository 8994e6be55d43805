"""
This module contains cutting-plane inference and conflict analysis, plus the
learned-constraint database with relevance- and length-bounded deletion and
the literal activity counters used for branching.
"""
import math
import logging
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from pbsat.config import DB_POLICIES, get_settings
from pbsat.errors import ConfigError, ConflictAtRoot, ResolutionError, ResolutionOverflow
from pbsat.model import (
    CONTRADICTION,
    TAUTOLOGY,
    LinearConstraint,
    Literal,
    RawConstraint,
    cardinality,
    clause,
    literal_index,
    neg,
    normalize,
    var_of,
)
from pbsat.propagate import PropagationEngine, Trail, curr_poss


logger = logging.getLogger(__name__)


@dataclass
class LearnedDB:
    """
    Ids of the learned constraints held by a propagation engine, oldest first,
    with the deletion bounds and the activity counters.
    """
    num_vars: int
    relevance_bound: int = 3
    length_bound: int = 50
    policy: str = "hybrid"
    decay_factor: float = 0.5
    decay_period: int = 50
    ids: list[int] = field(default_factory=list)
    activity: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.relevance_bound < 0 or self.length_bound < 0:
            raise ConfigError("relevance and length bounds must not be negative")
        if self.policy not in DB_POLICIES:
            raise ConfigError(f"unknown deletion policy {self.policy!r}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ConfigError(f"decay factor must lie strictly between 0 and 1, got {self.decay_factor}")
        self.activity = np.zeros(2 * (self.num_vars + 1), dtype=np.float64)

    def __len__(self) -> int:
        return len(self.ids)

    def add(self, cid: int):
        self.ids.append(cid)

    def literal_activity(self, lit: Literal) -> float:
        return float(self.activity[literal_index(lit)])


@dataclass(frozen=True)
class ConflictAnalysis:
    learned: LinearConstraint
    backjump_level: int
    fallback: bool = False
    weakened: bool = False
    resolutions: int = 0


def bump_activity(db: LearnedDB, literals: Iterable[Literal]):
    """Add one to the activity of every given literal."""
    indices = np.fromiter((literal_index(lit) for lit in literals), dtype=np.int64)
    np.add.at(db.activity, indices, 1.0)


def decay_activity(db: LearnedDB):
    """Scale every literal activity by the decay factor."""
    db.activity *= db.decay_factor


def pb_resolve(
        c: LinearConstraint,
        other: LinearConstraint,
        pivot: int,
        max_weight: int | None = None
       ) -> LinearConstraint | object:
    """
    Add suitable multiples of two constraints so that the pivot cancels.

    With w the pivot weight in ``c`` and w' the weight of its negation in
    ``other``, the sum uses the multipliers w'/g and w/g (g = gcd(w, w')), is
    normalized, saturated and finally divided by the common divisor of all
    its coefficients.

    :param c: First premise.
    :param other: Second premise, holding the pivot in the opposite polarity.
    :param pivot: The variable to eliminate.
    :param max_weight: Largest coefficient allowed before the step is abandoned.
    :return: The resolvent, TAUTOLOGY or CONTRADICTION.
    """
    lit = next((lit for lit in c.literals if var_of(lit) == pivot), None)
    if lit is None or other.weight_of(neg(lit)) == 0:
        raise ResolutionError(f"premises do not clash on variable {pivot}")
    if max_weight is None:
        max_weight = get_settings().max_weight

    # Scale both premises so the pivot coefficients match
    weight, other_weight = c.weight_of(lit), other.weight_of(neg(lit))
    g = math.gcd(weight, other_weight)
    scale, other_scale = other_weight // g, weight // g
    degree = scale * c.degree + other_scale * other.degree
    if degree > max_weight:
        raise ResolutionOverflow(f"resolvent degree {degree} exceeds {max_weight}")

    terms = tuple((scale * w, l) for w, l in c.terms) + tuple((other_scale * w, l) for w, l in other.terms)
    normal = normalize(RawConstraint(terms, ">=", degree))
    if normal is CONTRADICTION:
        return CONTRADICTION
    if not normal:
        return TAUTOLOGY

    # Divide out the common factor, if any
    result = normal[0]
    divisor = math.gcd(result.degree, *result.weights)
    if divisor > 1:
        result = LinearConstraint(tuple((w // divisor, l) for w, l in result.terms), result.degree // divisor)
    return result


def weaken_to_cardinality(c: LinearConstraint) -> LinearConstraint:
    """
    Weaken a constraint to the cardinality constraint over the same literals
    with degree ceil(k / max weight).
    """
    return cardinality(c.literals, -(-c.degree // c.max_weight))


def irrelevance(c: LinearConstraint, trail: Trail) -> int:
    """poss of the constraint: it is i-irrelevant for every i up to this value."""
    return curr_poss(c, trail)[1]


def assertion_level(c: LinearConstraint, trail: Trail) -> int | None:
    """
    Smallest decision level below the current one at which the trail,
    restricted to that level, makes ``c`` unit or conflicting.

    :param c: The constraint.
    :param trail: The full trail.
    :return: The level, or None when ``c`` only becomes unit at the current level.
    """
    top = trail.decision_level
    candidates = {0}
    for _, lit in c.terms:
        if trail.value(lit) is not None and trail.level_of(lit) < top:
            candidates.add(trail.level_of(lit))

    for level in sorted(candidates):
        if level >= top:
            break
        poss = -c.degree
        largest_unvalued = 0
        for weight, lit in c.terms:
            value = trail.value(lit)
            if value is None or trail.level_of(lit) > level:
                poss += weight
                largest_unvalued = max(largest_unvalued, weight)
            elif value:
                poss += weight
        if poss < 0 or largest_unvalued > poss:
            return level
    return None


def _is_conflicting(c, trail: Trail) -> bool:
    return isinstance(c, LinearConstraint) and curr_poss(c, trail)[1] < 0


def _latest_falsified(c: LinearConstraint, trail: Trail) -> Literal | None:
    """The false literal of ``c`` assigned last at the current level."""
    level = trail.decision_level
    latest = None
    for _, lit in c.terms:
        if trail.is_false(lit) and trail.level_of(lit) == level:
            if latest is None or trail.position_of(lit) > trail.position_of(latest):
                latest = lit
    return latest


def _falsified_before(c: LinearConstraint, trail: Trail, position: int | None = None) -> list[Literal]:
    return [
        lit for _, lit in c.terms
        if trail.is_false(lit) and (position is None or trail.position_of(lit) < position)
    ]


def clausal_cut(engine: PropagationEngine, conflict: LinearConstraint) -> LinearConstraint:
    """
    First-UIP clause learning over clausal explanations of the trail.

    Each reason is read as the clause made of the literal it forced and its
    literals that were already false at that moment; the conflict is read as
    the clause of its false literals.

    :param engine: The engine whose trail is in conflict.
    :param conflict: The conflicting constraint.
    :return: A clause falsified by the trail with one literal at the current level.
    """
    trail = engine.trail
    level = trail.decision_level
    seen: set[int] = set()
    lower: list[Literal] = []
    pending = 0

    def add(lit: Literal):
        nonlocal pending
        var = var_of(lit)
        if var in seen:
            return
        seen.add(var)
        lit_level = trail.level_of(lit)
        if lit_level == level:
            pending += 1
        elif lit_level > 0:
            lower.append(lit)

    for lit in _falsified_before(conflict, trail):
        add(lit)
    if pending == 0:
        return clause(lower)

    index = len(trail.entries) - 1
    while True:
        while var_of(trail.entries[index].literal) not in seen:
            index -= 1
        entry = trail.entries[index]
        index -= 1
        pending -= 1
        if pending == 0:
            break
        reason = engine.constraint(entry.reason)
        for lit in _falsified_before(reason, trail, trail.position_of(entry.literal)):
            add(lit)

    return clause(lower + [neg(entry.literal)])


def analyze_conflict(
        engine: PropagationEngine,
        conflict_id: int,
        max_weight: int | None = None
       ) -> ConflictAnalysis:
    """
    Derive a learned constraint from a conflict by cutting-plane resolution.

    The conflicting constraint is resolved against the reason of its most
    recently falsified literal until the result is unit or conflicting below
    the current level. When a resolvent stops being falsified by the trail,
    the antecedent with the larger pivot weight is weakened to a cardinality
    constraint and the step retried once; if that also fails, or weights
    overflow, the first-UIP clause over clausal explanations is learned instead.

    :param engine: The engine holding the trail and the constraints.
    :param conflict_id: Id of the conflicting constraint.
    :param max_weight: Coefficient limit for resolution.
    :return: The learned constraint and its backjump level.
    """
    trail = engine.trail
    if trail.decision_level == 0:
        raise ConflictAtRoot("conflict at decision level 0")

    conflict = engine.constraint(conflict_id)
    current = conflict
    weakened = False
    resolutions = 0
    while True:
        level = assertion_level(current, trail)
        if level is not None:
            learned = LinearConstraint(current.terms, current.degree, learned=True)
            return ConflictAnalysis(learned, level, weakened=weakened, resolutions=resolutions)

        pivot_lit = _latest_falsified(current, trail)
        reason_id = trail.reason_of(pivot_lit) if pivot_lit is not None else None
        if reason_id is None:
            break
        reason = engine.constraint(reason_id)

        try:
            resolvent = pb_resolve(current, reason, var_of(pivot_lit), max_weight)
            if resolvent is not CONTRADICTION and not _is_conflicting(resolvent, trail):
                # Weaken the antecedent with the larger pivot weight and retry once
                weakened = True
                if current.weight_of(pivot_lit) > reason.weight_of(neg(pivot_lit)):
                    resolvent = pb_resolve(weaken_to_cardinality(current), reason, var_of(pivot_lit), max_weight)
                else:
                    resolvent = pb_resolve(current, weaken_to_cardinality(reason), var_of(pivot_lit), max_weight)
        except ResolutionOverflow as e:
            logger.debug(f"Resolution overflow, falling back to clause learning: {e}")
            break

        if resolvent is CONTRADICTION:
            raise ConflictAtRoot("resolution derived an unsatisfiable constraint")
        if not _is_conflicting(resolvent, trail):
            break
        current = resolvent
        resolutions += 1

    # Fall back to a clause that the trail is guaranteed to falsify
    learned = clausal_cut(engine, conflict)
    logger.debug(f"Clausal fallback learned {learned}")
    learned = LinearConstraint(learned.terms, learned.degree, learned=True)
    return ConflictAnalysis(learned, assertion_level(learned, trail) or 0, fallback=True,
                            weakened=weakened, resolutions=resolutions)


def reduce_db(db: LearnedDB, engine: PropagationEngine, protected: Iterable[int] = ()) -> list[int]:
    """
    Delete learned constraints that break the retention policy.

    Under the hybrid policy a constraint goes when its irrelevance exceeds the
    relevance bound and its length exceeds the length bound; under the strict
    policy either is enough. Reasons of trail literals and the protected ids
    are always kept.

    :param db: The learned database.
    :param engine: The engine holding the constraints and trail.
    :param protected: Ids kept regardless of the policy, such as the newest learned constraint.
    :return: Ids of the deleted constraints.
    """
    locked = engine.trail.locked() | set(protected)
    kept, deleted = [], []
    for cid in db.ids:
        c = engine.constraint(cid)
        irrelevant = irrelevance(c, engine.trail) > db.relevance_bound
        too_long = c.size > db.length_bound
        drop = (irrelevant and too_long) if db.policy == "hybrid" else (irrelevant or too_long)
        if drop and cid not in locked:
            engine.remove_constraint(cid)
            deleted.append(cid)
        else:
            kept.append(cid)
    db.ids = kept

    if deleted:
        logger.debug(f"Deleted {len(deleted)} learned constraints, {len(kept)} kept")
    return deleted
