"""
This module contains the core domain types: literals, normal-form
pseudo-Boolean constraints, raw (pre-normalization) constraints and instances,
together with normalization, saturation and cardinality-to-clause expansion.

Literals are signed non-zero integers in the DIMACS convention: ``3`` is the
variable x3 and ``-3`` its negation.
"""
import math
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from pbsat.config import get_settings
from pbsat.errors import ExpansionTooLarge, InstanceError


Literal = int
Term = tuple[int, Literal]


def make_literal(var: int, positive: bool = True) -> Literal:
    """
    Build a literal from a variable index and a polarity.

    :param var: The variable index, at least 1.
    :param positive: True for the variable itself, False for its negation.
    :return: The signed literal.
    """
    if var < 1:
        raise InstanceError(f"variable index must be positive, got {var}")
    return var if positive else -var


def var_of(lit: Literal) -> int:
    return lit if lit > 0 else -lit


def neg(lit: Literal) -> Literal:
    return -lit


def literal_index(lit: Literal) -> int:
    """Dense index of a literal: 2*var for x, 2*var + 1 for its negation."""
    return 2 * lit if lit > 0 else -2 * lit + 1


def literal_value(lit: Literal, assignment: Mapping[int, bool]) -> bool:
    return assignment[var_of(lit)] == (lit > 0)


def format_literal(lit: Literal) -> str:
    return f"x{lit}" if lit > 0 else f"~x{-lit}"


class _Marker:
    """A named sentinel returned in place of a constraint."""

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name


# Returned by normalize (and friends) for a constraint no assignment satisfies
CONTRADICTION = _Marker("CONTRADICTION")
# Returned by cutting-plane resolution when the result is vacuous
TAUTOLOGY = _Marker("TAUTOLOGY")


@dataclass(frozen=True)
class LinearConstraint:
    """
    A normal-form pseudo-Boolean constraint ``sum(w_i * l_i) >= degree``.

    Terms are kept sorted by descending weight, then ascending variable. The id
    is a handle assigned when the constraint is inserted into a propagation
    engine; it does not take part in equality.
    """
    terms: tuple[Term, ...]
    degree: int
    id: int = field(default=-1, compare=False)
    learned: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.degree < 1:
            raise InstanceError(f"degree must be positive, got {self.degree}")
        seen = set()
        for weight, lit in self.terms:
            if weight < 1:
                raise InstanceError(f"weights must be positive, got {weight}")
            if weight > self.degree:
                raise InstanceError(f"weight {weight} exceeds degree {self.degree}; saturate first")
            var = var_of(lit)
            if lit == 0 or var in seen:
                raise InstanceError(f"invalid or repeated literal {lit}")
            seen.add(var)

    @property
    def literals(self) -> tuple[Literal, ...]:
        return tuple(lit for _, lit in self.terms)

    @property
    def weights(self) -> tuple[int, ...]:
        return tuple(weight for weight, _ in self.terms)

    @property
    def size(self) -> int:
        return len(self.terms)

    @property
    def total_weight(self) -> int:
        return sum(weight for weight, _ in self.terms)

    @property
    def max_weight(self) -> int:
        return self.terms[0][0] if self.terms else 0

    @property
    def is_cardinality(self) -> bool:
        return all(weight == 1 for weight, _ in self.terms)

    @property
    def is_clause(self) -> bool:
        return self.degree == 1 and self.is_cardinality

    def weight_of(self, lit: Literal) -> int:
        """Weight of ``lit`` in this constraint, 0 when it does not occur."""
        for weight, other in self.terms:
            if other == lit:
                return weight
        return 0

    def evaluate(self, assignment: Mapping[int, bool]) -> bool:
        """
        Evaluate the constraint under a total assignment.

        :param assignment: Variable index to boolean value.
        :return: True when the weighted sum of true literals reaches the degree.
        """
        return sum(weight for weight, lit in self.terms if literal_value(lit, assignment)) >= self.degree

    def with_id(self, cid: int, learned: bool | None = None) -> "LinearConstraint":
        return LinearConstraint(self.terms, self.degree, cid, self.learned if learned is None else learned)

    def __str__(self) -> str:
        lhs = " + ".join(
            format_literal(lit) if weight == 1 else f"{weight} {format_literal(lit)}"
            for weight, lit in self.terms
        )
        return f"{lhs or '0'} >= {self.degree}"


def _sort_terms(terms: Iterable[Term]) -> tuple[Term, ...]:
    return tuple(sorted(terms, key=lambda term: (-term[0], var_of(term[1]), term[1])))


def make_constraint(terms: Iterable[Term], degree: int, learned: bool = False) -> LinearConstraint:
    """
    Build a normal-form constraint from already-normal terms.

    :param terms: (weight, literal) pairs with positive weights on distinct variables.
    :param degree: The positive right-hand side.
    :param learned: Whether the constraint was derived during search.
    :return: The constraint with its terms in canonical order.
    """
    return LinearConstraint(_sort_terms(terms), degree, learned=learned)


def clause(literals: Iterable[Literal]) -> LinearConstraint:
    return make_constraint(((1, lit) for lit in literals), 1)


def cardinality(literals: Iterable[Literal], degree: int) -> LinearConstraint:
    return make_constraint(((1, lit) for lit in literals), degree)


@dataclass(frozen=True)
class RawConstraint:
    """
    A linear constraint as written by a user, before normalization.

    Weights may be any non-zero integers, literals may repeat and the relation
    is either ``>=`` or ``=``.
    """
    terms: tuple[Term, ...]
    relation: str = ">="
    rhs: int = 1

    def __post_init__(self):
        if self.relation not in (">=", "="):
            raise InstanceError(f"relation must be '>=' or '=', got {self.relation!r}")
        for _, lit in self.terms:
            if lit == 0:
                raise InstanceError("literal 0 is not a valid literal")

    def evaluate(self, assignment: Mapping[int, bool]) -> bool:
        lhs = sum(weight for weight, lit in self.terms if literal_value(lit, assignment))
        return lhs == self.rhs if self.relation == "=" else lhs >= self.rhs


def saturate(c: LinearConstraint | RawConstraint) -> LinearConstraint:
    """
    Cap every weight at the degree.

    A LinearConstraint is saturated by construction and comes back unchanged;
    unsaturated input is given as a raw ``sum(w l) >= k`` with positive
    weights on distinct variables and k >= 1.

    :param c: The constraint.
    :return: The logically equivalent saturated constraint.
    """
    if isinstance(c, LinearConstraint):
        return c
    if c.relation != ">=" or c.rhs < 1 or any(weight < 1 for weight, _ in c.terms):
        raise InstanceError("saturate expects sum(w l) >= k with positive weights and degree")
    return LinearConstraint(_sort_terms((min(weight, c.rhs), lit) for weight, lit in c.terms), c.rhs)


def _normalize_geq(terms: Iterable[Term], rhs: int) -> LinearConstraint | _Marker | None:
    """
    Bring ``sum(terms) >= rhs`` to normal form.

    :return: The constraint, None for a tautology, or CONTRADICTION.
    """
    # Accumulate coefficients on the positive literal of each variable
    coefficients: dict[int, int] = {}
    for weight, lit in terms:
        var = var_of(lit)
        if lit > 0:
            coefficients[var] = coefficients.get(var, 0) + weight
        else:
            # w * ~x = w - w * x
            coefficients[var] = coefficients.get(var, 0) - weight
            rhs -= weight

    # Flip negative coefficients onto the negated literal
    normal: list[Term] = []
    for var, coefficient in coefficients.items():
        if coefficient > 0:
            normal.append((coefficient, var))
        elif coefficient < 0:
            normal.append((-coefficient, -var))
            rhs -= coefficient

    if rhs <= 0:
        return None
    if rhs > sum(weight for weight, _ in normal):
        return CONTRADICTION
    return LinearConstraint(_sort_terms((min(weight, rhs), lit) for weight, lit in normal), rhs)


def normalize(raw: RawConstraint) -> list[LinearConstraint] | _Marker:
    """
    Rewrite a raw constraint into zero, one or two normal-form constraints.

    Equalities are split into the pair ``sum(w l) >= k`` and
    ``sum(w ~l) >= sum(w) - k`` before duplicate variables are merged.

    :param raw: The constraint to normalize.
    :return: The normalized constraints (tautologies dropped), or CONTRADICTION.
    """
    sides = [(raw.terms, raw.rhs)]
    if raw.relation == "=":
        sides.append((tuple((-weight, lit) for weight, lit in raw.terms), -raw.rhs))

    results = []
    for terms, rhs in sides:
        normal = _normalize_geq((term for term in terms if term[0] != 0), rhs)
        if normal is CONTRADICTION:
            return CONTRADICTION
        if normal is not None:
            results.append(normal)
    return results


def cardinality_to_cnf(c: LinearConstraint, cap: int | None = None) -> list[LinearConstraint]:
    """
    Expand a cardinality constraint into the equivalent set of clauses.

    Every subset of ``m - k + 1`` literals must contain a true literal, which
    gives C(m, k - 1) clauses. A degree above the number of literals gives the
    single empty clause.

    :param c: A constraint with all weights equal to 1.
    :param cap: Largest number of clauses allowed; defaults to the configured expansion cap.
    :return: The clauses, in lexicographic order of the term subsets.
    """
    if not c.is_cardinality:
        raise InstanceError(f"cardinality_to_cnf expects unit weights, got {c}")
    if cap is None:
        cap = get_settings().expansion_cap

    m, k = c.size, c.degree
    if k > m:
        # Fewer literals than the degree: no assignment satisfies it
        return [clause([])]
    count = math.comb(m, k - 1)
    if count > cap:
        raise ExpansionTooLarge(f"expanding {c} needs {count} clauses (cap {cap})")

    return [clause(subset) for subset in itertools.combinations(c.literals, m - k + 1)]


def implies_syntactically(c1: LinearConstraint, c2: LinearConstraint) -> bool:
    """
    Sufficient test that every model of ``c1`` satisfies ``c2``.

    Weakening ``c1`` down to ``c2``'s weights costs at most the sum of the
    excess weights, so the implication holds when what remains still reaches
    ``c2``'s degree.
    """
    excess = 0
    for weight, lit in c1.terms:
        excess += max(0, weight - c2.weight_of(lit))
    return c1.degree - excess >= c2.degree


@dataclass(frozen=True)
class Instance:
    """
    A set of normal-form constraints over variables ``1..num_vars``.

    ``contradiction`` is set when normalization met a constraint no assignment
    can satisfy; such an instance is unsatisfiable whatever its other constraints.
    """
    num_vars: int
    constraints: tuple[LinearConstraint, ...]
    meta: dict = field(default_factory=dict, compare=False)
    contradiction: bool = False

    def __post_init__(self):
        if self.num_vars < 0:
            raise InstanceError(f"num_vars must not be negative, got {self.num_vars}")
        for c in self.constraints:
            for _, lit in c.terms:
                if var_of(lit) > self.num_vars:
                    raise InstanceError(f"literal {lit} exceeds num_vars={self.num_vars}")

    @classmethod
    def from_raw(cls, num_vars: int, raws: Iterable[RawConstraint], meta: dict | None = None) -> "Instance":
        """
        Normalize raw constraints into an instance.

        :param num_vars: Number of variables.
        :param raws: The raw constraints.
        :param meta: Generator family and parameters.
        :return: The instance.
        """
        constraints: list[LinearConstraint] = []
        contradiction = False
        for raw in raws:
            normal = normalize(raw)
            if normal is CONTRADICTION:
                contradiction = True
            else:
                constraints.extend(normal)
        return cls(num_vars, tuple(constraints), dict(meta or {}), contradiction)

    def first_violated(self, assignment: Mapping[int, bool]) -> LinearConstraint | None:
        for c in self.constraints:
            if not c.evaluate(assignment):
                return c
        return None

    def is_satisfied_by(self, assignment: Mapping[int, bool]) -> bool:
        return not self.contradiction and self.first_violated(assignment) is None

