"""
This module contains the readers and writers for DIMACS CNF, the OPB subset
(linear >=, <= and = constraints, no objective), model files and the
charged-graph edge list, plus the model verifier.
"""
import re
import logging
from dataclasses import dataclass
from typing import Mapping

from pbsat.bench import ChargedGraph
from pbsat.errors import FormatError, ParseError, VerificationError
from pbsat.model import Instance, LinearConstraint, RawConstraint


logger = logging.getLogger(__name__)

_OPB_HEADER = re.compile(r"#variable=\s*(\d+)\s+#constraint=\s*(\d+)")
_OPB_LITERAL = re.compile(r"(~?)x(\d+)$")
_DIMACS_HEADER = re.compile(r"^\s*p\s+cnf\b", re.MULTILINE)


def _parse_int(token: str, line: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"expected {what}, got {token!r}", line) from None


# DIMACS

def parse_dimacs(text: str) -> Instance:
    """
    Parse a DIMACS CNF text.

    Comment lines start with ``c``; a line holding only ``%`` ends the clause
    section. Clauses may span lines and end with ``0``.

    :param text: The file contents.
    :return: The instance; tautological clauses are dropped, an empty clause marks a contradiction.
    """
    num_vars = declared = None
    clauses: list[tuple[list[int], int]] = []
    current: list[int] = []
    last_line = 0

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line == "%":
            break
        last_line = number

        if line.startswith("p"):
            parts = line.split()
            if num_vars is not None:
                raise ParseError("duplicate header", number)
            if len(parts) != 4 or parts[1] != "cnf":
                raise ParseError(f"malformed header {line!r}", number)
            num_vars = _parse_int(parts[2], number, "a variable count")
            declared = _parse_int(parts[3], number, "a clause count")
            if num_vars < 0 or declared < 0:
                raise ParseError("header counts must not be negative", number)
            continue

        if num_vars is None:
            raise ParseError("clause before the 'p cnf' header", number)
        for token in line.split():
            lit = _parse_int(token, number, "a literal")
            if lit == 0:
                clauses.append((current, number))
                current = []
            elif abs(lit) > num_vars:
                raise ParseError(f"literal {lit} exceeds the declared {num_vars} variables", number)
            else:
                current.append(lit)

    if num_vars is None:
        raise ParseError("missing 'p cnf' header")
    if current:
        raise ParseError("last clause is not terminated by 0", last_line)
    if len(clauses) != declared:
        raise ParseError(f"header declares {declared} clauses, found {len(clauses)}")

    raws = [RawConstraint(tuple((1, lit) for lit in literals), ">=", 1) for literals, _ in clauses]
    return Instance.from_raw(num_vars, raws, {"format": "dimacs"})


def write_dimacs(instance: Instance) -> str:
    """
    Render an instance of clauses as DIMACS CNF.

    :param instance: An instance whose constraints are all clauses.
    :return: The text, with a contradiction written as the empty clause.
    """
    lines = []
    for c in instance.constraints:
        if not c.is_clause:
            raise FormatError(f"DIMACS cannot express {c}")
        lines.append(" ".join(str(lit) for lit in c.literals) + " 0")
    if instance.contradiction:
        lines.append("0")

    header = []
    if "family" in instance.meta:
        header.append(f"c {instance.meta['family']}")
    header.append(f"p cnf {instance.num_vars} {len(lines)}")
    return "\n".join(header + lines) + "\n"


# OPB

def _parse_opb_terms(tokens: list[str], number: int) -> tuple[list[tuple[int, int]], int]:
    """(weight, literal) pairs of a left-hand side and the largest variable seen."""
    terms = []
    weight = None
    largest = 0
    for token in tokens:
        match = _OPB_LITERAL.match(token)
        if match is None:
            if weight is not None:
                raise ParseError(f"weight {weight} is not followed by a literal", number)
            weight = _parse_int(token, number, "a weight or literal")
            continue
        var = int(match.group(2))
        if var < 1:
            raise ParseError(f"invalid variable {token!r}", number)
        terms.append((1 if weight is None else weight, -var if match.group(1) else var))
        largest = max(largest, var)
        weight = None
    if weight is not None:
        raise ParseError(f"weight {weight} is not followed by a literal", number)
    return terms, largest


def parse_opb(text: str) -> Instance:
    """
    Parse the linear subset of the OPB format.

    Each constraint reads ``[w lit]+ (>=|=|<=) k ;`` where a literal is ``x<i>``
    or ``~x<i>``. Lines starting with ``*`` are comments; the optional header
    ``* #variable= V #constraint= C`` fixes the variable count and is checked.

    :param text: The file contents.
    :return: The normalized instance.
    """
    num_vars = declared = None
    raws = []
    largest = 0

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("*"):
            header = _OPB_HEADER.search(line)
            if header and num_vars is None:
                num_vars, declared = int(header.group(1)), int(header.group(2))
            continue
        if line.startswith(("min:", "max:")):
            raise ParseError("objective functions are not supported", number)
        if not line.endswith(";"):
            raise ParseError("constraint does not end with ';'", number)

        tokens = line[:-1].split()
        relations = [i for i, token in enumerate(tokens) if token in (">=", "=", "<=")]
        if len(relations) != 1 or relations[0] != len(tokens) - 2:
            raise ParseError(f"expected '<terms> >= <degree> ;', got {line!r}", number)
        relation = tokens[-2]
        rhs = _parse_int(tokens[-1], number, "a right-hand side")
        terms, seen = _parse_opb_terms(tokens[:-2], number)
        if num_vars is not None and seen > num_vars:
            raise ParseError(f"variable x{seen} exceeds the declared {num_vars} variables", number)
        largest = max(largest, seen)

        if relation == "<=":
            terms, rhs, relation = [(-w, lit) for w, lit in terms], -rhs, ">="
        raws.append(RawConstraint(tuple(terms), relation, rhs))

    if declared is not None and len(raws) != declared:
        raise ParseError(f"header declares {declared} constraints, found {len(raws)}")
    return Instance.from_raw(largest if num_vars is None else num_vars, raws, {"format": "opb"})


def format_opb_constraint(c: LinearConstraint) -> str:
    terms = " ".join(f"+{w} x{lit}" if lit > 0 else f"+{w} ~x{-lit}" for w, lit in c.terms)
    return f"{terms} >= {c.degree} ;"


def write_opb(instance: Instance) -> str:
    """
    Render an instance as OPB.

    :param instance: The instance.
    :return: The text, with a contradiction written as ``>= 1 ;``.
    """
    lines = [format_opb_constraint(c) for c in instance.constraints]
    if instance.contradiction:
        lines.append(">= 1 ;")

    header = [f"* #variable= {instance.num_vars} #constraint= {len(lines)}"]
    if "family" in instance.meta:
        header.append(f"* {instance.meta['family']}")
    return "\n".join(header + lines) + "\n"


def parse_instance(text: str) -> Instance:
    """Parse DIMACS when the text has a 'p cnf' header, OPB otherwise."""
    if _DIMACS_HEADER.search(text):
        logger.debug("Reading DIMACS input")
        return parse_dimacs(text)
    logger.debug("Reading OPB input")
    return parse_opb(text)


# Models and verification

def parse_model(text: str) -> dict[int, bool]:
    """
    Read a model from signed integers, either plain or as solver output.

    ``s`` and ``c`` lines are skipped, ``v`` prefixes are stripped and ``0`` is
    ignored.

    :param text: The model text.
    :return: Variable to value.
    """
    model: dict[int, bool] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "sc":
            continue
        if line[0] == "v":
            line = line[1:]
        for token in line.split():
            lit = _parse_int(token, number, "a literal")
            if lit == 0:
                continue
            if model.get(abs(lit), lit > 0) != (lit > 0):
                raise ParseError(f"variable {abs(lit)} is assigned both ways", number)
            model[abs(lit)] = lit > 0
    return model


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    violated: LinearConstraint | None = None


def verify(instance: Instance, model: Mapping[int, bool]) -> VerificationResult:
    """
    Check a total model against every constraint of an instance.

    :param instance: The instance as parsed, before any preprocessing.
    :param model: A value for each of the variables 1..num_vars.
    :return: Whether every constraint holds, and the first one violated otherwise.
    """
    missing = [var for var in range(1, instance.num_vars + 1) if var not in model]
    if missing:
        raise VerificationError(f"model leaves {len(missing)} variables unassigned, first x{missing[0]}")
    extra = [var for var in model if not 1 <= var <= instance.num_vars]
    if extra:
        raise VerificationError(f"model assigns x{extra[0]} outside 1..{instance.num_vars}")

    if instance.contradiction:
        return VerificationResult(False)
    violated = instance.first_violated(model)
    return VerificationResult(violated is None, violated)


# Charged graphs

def parse_graph(text: str) -> ChargedGraph:
    """
    Parse a charged graph: ``c`` comments, one ``charges b1 ... bN`` line and
    one ``u v`` line per edge.
    """
    charges = None
    edges = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c ") or line == "c":
            continue
        parts = line.split()
        if parts[0] == "charges":
            if charges is not None:
                raise ParseError("duplicate charges line", number)
            charges = tuple(_parse_int(token, number, "a charge") for token in parts[1:])
            continue
        if charges is None:
            raise ParseError("edge before the charges line", number)
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", number)
        edges.append((_parse_int(parts[0], number, "a node"), _parse_int(parts[1], number, "a node")))

    if charges is None:
        raise ParseError("missing charges line")
    return ChargedGraph(charges, tuple(edges))


def write_graph(graph: ChargedGraph) -> str:
    lines = ["charges " + " ".join(str(charge) for charge in graph.charges)]
    lines.extend(f"{u} {v}" for u, v in graph.edges)
    return "\n".join(lines) + "\n"


def write_instance(instance: Instance, fmt: str) -> str:
    """Render as ``cnf`` or ``opb``."""
    if fmt == "cnf":
        return write_dimacs(instance)
    if fmt == "opb":
        return write_opb(instance)
    raise FormatError(f"unknown format {fmt!r}")
