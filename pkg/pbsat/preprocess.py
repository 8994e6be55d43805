"""
This module contains strengthening by probing.

A literal is fixed, unit propagation runs to fixpoint, and every constraint
``sum(w l) >= r`` that ends up oversatisfied by s is replaced by
``s ~l0 + sum(w l) >= r + s``. The replacement is implied by the instance and
implies the original, so satisfiability is preserved in both directions.
"""
import time
import logging
from dataclasses import asdict, dataclass

from pbsat.model import (
    CONTRADICTION,
    Instance,
    LinearConstraint,
    Literal,
    RawConstraint,
    clause,
    implies_syntactically,
    neg,
    normalize,
)
from pbsat.propagate import CounterEngine


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrengthenBudget:
    """
    Limits of a strengthening pass. ``depth`` 2 additionally probes pairs of literals.
    """
    max_probes: int | None = None
    max_sweeps: int = 50
    timeout_s: float | None = None
    depth: int = 1


@dataclass(frozen=True)
class Replacement:
    """
    A constraint derived from ``original`` under ``probe``.

    A single-literal probe yields a constraint that implies the original and
    takes its place. A pair probe only yields a consequence of the instance,
    which is added next to the original.
    """
    original: LinearConstraint
    replacement: LinearConstraint
    probe: tuple[Literal, ...]

    @property
    def replaces_original(self) -> bool:
        return len(self.probe) == 1


@dataclass(frozen=True)
class ProbeOutcome:
    replacements: tuple[Replacement, ...] = ()
    failed: bool = False


@dataclass
class PreprocessStats:
    probes: int = 0
    replacements: int = 0
    removed: int = 0
    failed_literals: int = 0
    sweeps: int = 0


class Strengthener:
    """
    A level-0 counter engine over an instance's constraints, kept in sync as
    replacements are applied.

    :param instance: The normalized instance.
    """

    def __init__(self, instance: Instance):
        self.num_vars = instance.num_vars
        self.engine = CounterEngine(instance.num_vars)
        self.contradiction = instance.contradiction
        self.stats = PreprocessStats()
        self._ids: dict[LinearConstraint, int] = {}
        self._root_satisfied: set[int] = set()

        # Duplicates collapse to one copy
        for c in instance.constraints:
            self._add(c)
        self._propagate_root()

    def _add(self, c: LinearConstraint) -> int | None:
        c = LinearConstraint(c.terms, c.degree)
        if c in self._ids:
            return None
        cid = self.engine.add_constraint(c)
        self._ids[c] = cid
        return cid

    def _remove(self, c: LinearConstraint):
        cid = self._ids.pop(c)
        self.engine.remove_constraint(cid)
        self._root_satisfied.discard(cid)

    def _propagate_root(self):
        if self.engine.propagate() is not None:
            self.contradiction = True
            return
        self._root_satisfied = {
            cid for cid in self.engine.constraints if self.engine.counters(cid)[0] >= 0
        }

    def constraints(self) -> list[LinearConstraint]:
        return [LinearConstraint(c.terms, c.degree) for c in self.engine.constraints.values()]

    def probe(self, literals: tuple[Literal, ...]) -> ProbeOutcome:
        """
        Fix ``literals`` at level 1, propagate and collect the replacements for
        every oversatisfied constraint. The engine is back at level 0 afterwards.

        :param literals: One literal, or two for pair probing.
        :return: The replacements, or a failed outcome when the probe conflicts.
        """
        engine, trail = self.engine, self.engine.trail
        self.stats.probes += 1
        engine.decide(literals[0])
        conflict = engine.propagate() is not None
        for lit in literals[1:]:
            if conflict:
                break
            value = trail.value(lit)
            if value is False:
                conflict = True
            elif value is None:
                engine.assign(lit)
                conflict = engine.propagate() is not None

        if conflict:
            engine.backtrack(0)
            return ProbeOutcome(failed=True)

        replacements = []
        for cid, c in engine.constraints.items():
            surplus = engine.counters(cid)[0]
            if surplus <= 0 or cid in self._root_satisfied:
                continue
            raw = RawConstraint(c.terms + tuple((surplus, neg(lit)) for lit in literals), ">=", c.degree + surplus)
            normal = normalize(raw)
            if normal is CONTRADICTION or not normal:
                continue
            stronger = normal[0]
            if stronger == c or stronger in self._ids or implies_syntactically(c, stronger):
                continue
            replacements.append(Replacement(LinearConstraint(c.terms, c.degree), stronger, literals))

        engine.backtrack(0)
        return ProbeOutcome(tuple(replacements))

    def assert_root(self, lit: Literal):
        """Add ``lit`` as a unit constraint after a failed probe."""
        self._add(clause([lit]))
        self.stats.failed_literals += 1
        self._propagate_root()

    def apply(self, replacement: Replacement) -> bool:
        """
        Swap a constraint for its replacement (or add the derived constraint,
        for a pair probe) and drop every constraint it now subsumes.

        :return: False when the original is already gone.
        """
        if replacement.original not in self._ids:
            return False
        if replacement.replaces_original:
            self._remove(replacement.original)
        self.stats.replacements += 1
        stronger = replacement.replacement
        if stronger in self._ids:
            return True
        self._add(stronger)

        # Subsumption removal over constraints sharing a literal
        literals = set(stronger.literals)
        for other in list(self._ids):
            if other == stronger or literals.isdisjoint(other.literals):
                continue
            if implies_syntactically(stronger, other):
                self._remove(other)
                self.stats.removed += 1

        self._propagate_root()
        return True


def _probe_literals(num_vars: int, depth: int):
    """Both polarities of every variable in ascending order, then pairs when depth is 2."""
    for var in range(1, num_vars + 1):
        yield (var,)
        yield (-var,)
    if depth >= 2:
        for first in range(1, num_vars + 1):
            for second in range(first + 1, num_vars + 1):
                for a in (first, -first):
                    for b in (second, -second):
                        yield (a, b)


def strengthen_probe(instance: Instance, l0: Literal) -> ProbeOutcome:
    """
    Probe a single literal against an instance.

    :param instance: The normalized instance.
    :param l0: A literal unassigned at level 0.
    :return: The replacements the probe yields; ``failed`` means ~l0 is implied.
    """
    return Strengthener(instance).probe((l0,))


def strengthen_pass(instance: Instance, budget: StrengthenBudget | None = None) -> Instance:
    """
    Repeat probing sweeps until one makes no change or the budget runs out.

    :param instance: The normalized instance.
    :param budget: Probe, sweep and time limits.
    :return: An instance with the same models, with strengthened constraints.
    """
    budget = budget or StrengthenBudget()
    strengthener = Strengthener(instance)
    stats = strengthener.stats
    start = time.perf_counter()

    def exhausted() -> bool:
        if budget.max_probes is not None and stats.probes >= budget.max_probes:
            return True
        return budget.timeout_s is not None and time.perf_counter() - start >= budget.timeout_s

    while not strengthener.contradiction and stats.sweeps < budget.max_sweeps and not exhausted():
        stats.sweeps += 1
        changed = False
        for literals in _probe_literals(instance.num_vars, budget.depth):
            if strengthener.contradiction or exhausted():
                break
            if any(strengthener.engine.trail.is_assigned(abs(lit)) for lit in literals):
                continue
            outcome = strengthener.probe(literals)
            if outcome.failed:
                if len(literals) == 1:
                    strengthener.assert_root(neg(literals[0]))
                    changed = True
                continue
            for replacement in outcome.replacements:
                changed = strengthener.apply(replacement) or changed
        if not changed:
            break

    logger.info(
        f"Strengthening: {stats.probes} probes, {stats.replacements} replacements, "
        f"{stats.removed} subsumed, {stats.failed_literals} failed literals in {stats.sweeps} sweeps"
    )
    meta = dict(instance.meta, preprocess=asdict(stats))
    if strengthener.contradiction:
        return Instance(instance.num_vars, (), meta, contradiction=True)
    return Instance(instance.num_vars, tuple(strengthener.constraints()), meta)
