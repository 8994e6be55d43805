"""
This module contains the benchmark families (pigeonhole, parity/Tseitin,
clique coloring, modularity encodings, random mixed instances), the
independent oracles used to check the solver (GF(2) elimination and
exhaustive enumeration) and the suite runner behind the ``bench`` command.
"""
import logging
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from pbsat.config import get_settings
from pbsat.errors import ConfigError, ExpansionTooLarge, InstanceError, OracleCapExceeded
from pbsat.model import (
    CONTRADICTION,
    Instance,
    LinearConstraint,
    Literal,
    RawConstraint,
    Term,
    cardinality,
    clause,
    normalize,
    var_of,
)
from pbsat.search import SolveStatus, SolverConfig, solve


logger = logging.getLogger(__name__)

SUITES = ("pigeonhole", "tseitin", "clique-color", "random")
COLUMNS = ["instance", "encoding", "status", "decisions", "conflicts", "time", "expected"]


# Pigeonhole

def pigeon_var(n: int, pigeon: int, hole: int) -> int:
    """Variable of "pigeon i sits in hole j", numbered (i - 1) * n + j."""
    return (pigeon - 1) * n + hole


def _pigeon_clauses(n: int) -> list[LinearConstraint]:
    return [clause(pigeon_var(n, i, j) for j in range(1, n + 1)) for i in range(1, n + 2)]


def gen_pigeonhole_cnf(n: int) -> Instance:
    """
    n + 1 pigeons in n holes as clauses: every pigeon sits in some hole and no
    two pigeons share one.

    :param n: Number of holes, at least 1.
    :return: The unsatisfiable instance over n(n + 1) variables.
    """
    if n < 1:
        raise InstanceError(f"pigeonhole needs at least one hole, got {n}")
    constraints = _pigeon_clauses(n)
    for j in range(1, n + 1):
        for i, k in itertools.combinations(range(1, n + 2), 2):
            constraints.append(clause([-pigeon_var(n, i, j), -pigeon_var(n, k, j)]))
    return Instance(n * (n + 1), tuple(constraints), {"family": f"hole{n}", "encoding": "cnf", "n": n})


def gen_pigeonhole_pb(n: int) -> Instance:
    """
    n + 1 pigeons in n holes with one cardinality constraint per hole:
    at least n of the pigeons are not in it.

    :param n: Number of holes, at least 1.
    :return: The unsatisfiable instance with 2n + 1 constraints.
    """
    if n < 1:
        raise InstanceError(f"pigeonhole needs at least one hole, got {n}")
    constraints = _pigeon_clauses(n)
    for j in range(1, n + 1):
        constraints.append(cardinality((-pigeon_var(n, i, j) for i in range(1, n + 2)), n))
    return Instance(n * (n + 1), tuple(constraints), {"family": f"hole{n}", "encoding": "pb", "n": n})


# Parity and Tseitin

def gen_parity_cnf(literals: Sequence[Literal], parity: int,
                   max_len: int | None = None) -> list[LinearConstraint] | object:
    """
    Clauses whose models are exactly the assignments where the number of true
    literals has the given parity.

    One clause rules out each assignment of the wrong parity, in the order
    ``itertools.product`` enumerates them, which gives 2^(len - 1) clauses.

    :param literals: The literals, on distinct variables.
    :param parity: 0 or 1.
    :param max_len: Longest accepted list of literals; defaults to the configured cap.
    :return: The clauses, or CONTRADICTION for an empty list with odd parity.
    """
    if parity not in (0, 1):
        raise InstanceError(f"parity must be 0 or 1, got {parity}")
    if len({var_of(lit) for lit in literals}) != len(literals):
        raise InstanceError(f"parity literals must be on distinct variables: {list(literals)}")
    if max_len is None:
        max_len = get_settings().parity_max_len
    if len(literals) > max_len:
        raise ExpansionTooLarge(f"parity over {len(literals)} literals needs {2 ** (len(literals) - 1)} clauses")
    if not literals:
        return CONTRADICTION if parity else []

    clauses = []
    for bits in itertools.product((0, 1), repeat=len(literals)):
        if sum(bits) % 2 != parity:
            clauses.append(clause(-lit if bit else lit for lit, bit in zip(literals, bits)))
    return clauses


@dataclass(frozen=True)
class ChargedGraph:
    """
    An undirected graph with a 0/1 charge on each node.

    Nodes are numbered from 1; edge k (0-based) carries the variable k + 1.
    Parallel edges are allowed, loops are not.
    """
    charges: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for charge in self.charges:
            if charge not in (0, 1):
                raise InstanceError(f"charges must be 0 or 1, got {charge}")
        for u, v in self.edges:
            if not (1 <= u <= self.num_nodes and 1 <= v <= self.num_nodes):
                raise InstanceError(f"edge ({u}, {v}) refers to a node outside 1..{self.num_nodes}")
            if u == v:
                raise InstanceError(f"loop on node {u}")

    @property
    def num_nodes(self) -> int:
        return len(self.charges)

    @property
    def total_charge(self) -> int:
        return sum(self.charges)

    def incident(self, node: int) -> list[int]:
        """Edge variables touching ``node``."""
        return [k + 1 for k, (u, v) in enumerate(self.edges) if node in (u, v)]


def gen_tseitin(graph: ChargedGraph, max_len: int | None = None) -> Instance:
    """
    The parity of the edges around each node must equal its charge.

    :param graph: The charged graph.
    :param max_len: Largest node degree expanded to clauses.
    :return: An instance that is unsatisfiable exactly when the total charge is odd.
    """
    constraints: list[LinearConstraint] = []
    contradiction = False
    for node in range(1, graph.num_nodes + 1):
        clauses = gen_parity_cnf(graph.incident(node), graph.charges[node - 1], max_len)
        if clauses is CONTRADICTION:
            contradiction = True
        else:
            constraints.extend(clauses)
    meta = {"family": f"tseitin{graph.num_nodes}", "encoding": "cnf", "total_charge": graph.total_charge}
    return Instance(len(graph.edges), tuple(constraints), meta, contradiction)


def random_regular_graph(nodes: int, degree: int = 3, seed: int = 0,
                         odd_charge: bool = True, max_tries: int = 1000) -> ChargedGraph:
    """
    A random simple regular graph by the configuration model with rejection.

    :param nodes: Number of nodes.
    :param degree: Degree of every node; nodes * degree must be even.
    :param seed: Random seed.
    :param odd_charge: Put a single charge on node 1, otherwise no charge at all.
    :param max_tries: Pairings tried before giving up.
    :return: The charged graph.
    """
    if degree < 1 or degree >= nodes or (nodes * degree) % 2:
        raise InstanceError(f"no simple {degree}-regular graph on {nodes} nodes")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(1, nodes + 1), degree)

    for _ in range(max_tries):
        pairs = rng.permutation(points).reshape(-1, 2)
        edges = {tuple(sorted((int(u), int(v)))) for u, v in pairs}
        if len(edges) == len(pairs) and all(u != v for u, v in edges):
            charges = tuple([1 if odd_charge else 0] + [0] * (nodes - 1))
            return ChargedGraph(charges, tuple(sorted(edges)))
    raise InstanceError(f"no simple pairing found after {max_tries} tries")


# Clique coloring

def gen_clique_color(m: int, n: int) -> Instance:
    """
    A graph on m nodes contains an (n + 1)-clique and is n-colorable.

    Variables: the edges e_ij (i < j) in lexicographic order, then the colors
    c_il at C(m, 2) + (i - 1) n + l, then the clique embedding q_kj at
    C(m, 2) + m n + (k - 1) m + j.

    :param m: Number of graph nodes.
    :param n: Number of colors.
    :return: The instance, unsatisfiable when m >= n + 1.
    """
    if m < 2 or n < 1:
        raise InstanceError(f"clique coloring needs m >= 2 and n >= 1, got m={m}, n={n}")
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    edge = {pair: index + 1 for index, pair in enumerate(pairs)}
    offset = len(pairs)

    def color(i: int, l: int) -> int:
        return offset + (i - 1) * n + l

    def embed(k: int, j: int) -> int:
        return offset + m * n + (k - 1) * m + j

    constraints = []
    # Adjacent nodes differ in color
    for (i, j), e in edge.items():
        for l in range(1, n + 1):
            constraints.append(clause([-e, -color(i, l), -color(j, l)]))
    # Every node has a color
    for i in range(1, m + 1):
        constraints.append(clause(color(i, l) for l in range(1, n + 1)))
    # Every clique element maps to a node
    for k in range(1, n + 2):
        constraints.append(clause(embed(k, j) for j in range(1, m + 1)))
    # No two clique elements share a node
    for j in range(1, m + 1):
        for i, k in itertools.combinations(range(1, n + 2), 2):
            constraints.append(clause([-embed(i, j), -embed(k, j)]))
    # Clique elements land on adjacent nodes
    for (i, j), e in edge.items():
        for k, l in itertools.permutations(range(1, n + 2), 2):
            constraints.append(clause([e, -embed(k, i), -embed(l, j)]))

    num_vars = offset + m * n + (n + 1) * m
    return Instance(num_vars, tuple(constraints), {"family": f"clique{m}-{n}", "encoding": "cnf", "m": m, "n": n})


# Modularity

@dataclass(frozen=True)
class ModEncoding:
    constraints: tuple[LinearConstraint, ...]
    aux_vars: tuple[int, ...]
    num_vars: int
    contradiction: bool = False


def gen_mod_encoding(terms: Sequence[Term], residue: int, modulus: int, num_vars: int) -> ModEncoding:
    """
    Encode ``sum(w l) = residue (mod modulus)`` with fresh variables s_i,
    i = 1..floor(w / modulus) where w is the total weight, as the equality
    ``sum(w l) + modulus * sum(s) = modulus * floor(w / modulus) + residue``.

    :param terms: (weight, literal) pairs with positive weights.
    :param residue: The residue, 0 <= residue < modulus.
    :param modulus: The modulus, at least 1.
    :param num_vars: Variables already in use; the s_i are numbered after them.
    :return: The normalized constraints and the auxiliary variables.
    """
    if modulus < 1 or not 0 <= residue < modulus:
        raise InstanceError(f"need 0 <= residue < modulus, got residue={residue}, modulus={modulus}")
    if any(weight < 1 for weight, _ in terms):
        raise InstanceError("modularity weights must be positive")
    if any(var_of(lit) > num_vars for _, lit in terms):
        raise InstanceError(f"literal beyond num_vars={num_vars}")

    total = sum(weight for weight, _ in terms)
    count = total // modulus
    aux = tuple(range(num_vars + 1, num_vars + count + 1))
    raw = RawConstraint(tuple(terms) + tuple((modulus, s) for s in aux), "=", modulus * count + residue)
    normal = normalize(raw)
    if normal is CONTRADICTION:
        return ModEncoding((), aux, num_vars + count, contradiction=True)
    return ModEncoding(tuple(normal), aux, num_vars + count)


def mod2_solve(system: Iterable[tuple[Sequence[Literal], int]], num_vars: int | None = None) -> dict[int, bool] | None:
    """
    Solve a system of parity constraints by Gaussian elimination over GF(2).

    A negated literal contributes its variable and flips the parity; a
    variable repeated in one equation cancels out.

    :param system: (literals, parity bit) pairs.
    :param num_vars: Number of variables; inferred from the system when omitted.
    :return: A solution with every free variable false, or None when inconsistent.
    """
    system = list(system)
    if num_vars is None:
        num_vars = max((var_of(lit) for literals, _ in system for lit in literals), default=0)

    # Augmented matrix [A | b] over GF(2)
    matrix = np.zeros((len(system), num_vars + 1), dtype=np.uint8)
    for row, (literals, parity) in enumerate(system):
        matrix[row, num_vars] = parity & 1
        for lit in literals:
            matrix[row, var_of(lit) - 1] ^= 1
            if lit < 0:
                matrix[row, num_vars] ^= 1

    # Reduced row echelon form
    pivots = []
    r = 0
    for c in range(num_vars):
        if r >= len(system):
            break
        rows = np.where(matrix[r:, c] == 1)[0]
        if rows.size == 0:
            continue
        p = r + int(rows[0])
        if p != r:
            matrix[[r, p], :] = matrix[[p, r], :]
        ones = np.where(matrix[:, c] == 1)[0]
        ones = ones[ones != r]
        if ones.size:
            matrix[ones, :] ^= matrix[r, :]
        pivots.append(c)
        r += 1

    # An all-zero row with parity 1 reads 0 = 1
    if np.any(np.all(matrix[:, :num_vars] == 0, axis=1) & (matrix[:, num_vars] == 1)):
        return None

    solution = {var: False for var in range(1, num_vars + 1)}
    for row, c in enumerate(pivots):
        solution[c + 1] = bool(matrix[row, num_vars])
    return solution


# Oracles

def model_mask(constraints: Iterable[LinearConstraint], num_vars: int, chunk_bits: int = 16) -> np.ndarray:
    """
    Satisfaction of a constraint set under every total assignment.

    :param constraints: The constraints.
    :param num_vars: Number of variables; assignment i gives variable v the value of bit v - 1 of i.
    :param chunk_bits: Assignments are evaluated in blocks of 2^chunk_bits rows.
    :return: A boolean vector of length 2^num_vars.
    """
    constraints = list(constraints)
    total = 1 << num_vars
    mask = np.ones(total, dtype=bool)
    shifts = np.arange(num_vars, dtype=np.int64)
    step = 1 << chunk_bits

    for start in range(0, total, step):
        rows = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = ((rows[:, None] >> shifts) & 1).astype(np.int64)
        block = np.ones(len(rows), dtype=bool)
        for c in constraints:
            dtype = np.int64 if c.total_weight < 2 ** 62 else object
            lhs = np.zeros(len(rows), dtype=dtype)
            for weight, lit in c.terms:
                column = bits[:, var_of(lit) - 1]
                lhs = lhs + weight * (column if lit > 0 else 1 - column)
            block &= lhs >= c.degree
        mask[start:start + len(rows)] = block
    return mask


def brute_force_sat(instance: Instance, cap: int | None = None) -> tuple[bool, dict[int, bool] | None]:
    """
    Decide an instance by enumerating every assignment.

    :param instance: The instance.
    :param cap: Largest number of variables accepted; defaults to the configured cap.
    :return: (satisfiable, the first model in enumeration order or None).
    """
    if cap is None:
        cap = get_settings().brute_force_cap
    if instance.num_vars > cap:
        raise OracleCapExceeded(f"{instance.num_vars} variables exceed the enumeration cap of {cap}")
    if instance.contradiction:
        return False, None

    satisfying = np.flatnonzero(model_mask(instance.constraints, instance.num_vars))
    if satisfying.size == 0:
        return False, None
    index = int(satisfying[0])
    return True, {var: bool((index >> (var - 1)) & 1) for var in range(1, instance.num_vars + 1)}


def gen_random_instance(num_vars: int, num_constraints: int, seed: int = 0,
                        mix: Sequence[str] = ("clause", "cardinality", "pb"),
                        max_len: int = 5, max_weight: int = 5) -> Instance:
    """
    A random mix of clauses, cardinality constraints and general PB constraints.

    :param num_vars: Number of variables, at least 1.
    :param num_constraints: Number of raw constraints drawn.
    :param seed: Random seed.
    :param mix: Kinds to draw from, uniformly.
    :param max_len: Longest constraint.
    :param max_weight: Largest weight of a PB term.
    :return: The normalized instance.
    """
    if num_vars < 1:
        raise InstanceError("random instances need at least one variable")
    unknown = set(mix) - {"clause", "cardinality", "pb"}
    if unknown or not mix:
        raise ConfigError(f"unknown constraint kinds {sorted(unknown)}")
    rng = np.random.default_rng(seed)

    raws = []
    for _ in range(num_constraints):
        kind = mix[int(rng.integers(len(mix)))]
        length = int(rng.integers(1, min(max_len, num_vars) + 1))
        variables = rng.choice(num_vars, size=length, replace=False) + 1
        literals = [int(var) if rng.random() < 0.5 else -int(var) for var in variables]
        if kind == "clause":
            terms, rhs = [(1, lit) for lit in literals], 1
        elif kind == "cardinality":
            terms, rhs = [(1, lit) for lit in literals], int(rng.integers(1, length + 1))
        else:
            weights = rng.integers(1, max_weight + 1, size=length)
            terms = [(int(w), lit) for w, lit in zip(weights, literals)]
            rhs = int(rng.integers(1, int(weights.sum()) + 1))
        raws.append(RawConstraint(tuple(terms), ">=", rhs))

    meta = {"family": f"random{num_vars}-{num_constraints}-s{seed}", "encoding": "mixed", "seed": seed}
    return Instance.from_raw(num_vars, raws, meta)


# Suites

@dataclass
class SuiteOptions:
    max_n: int = 8
    pb_sizes: tuple[int, ...] = (8, 20, 50)
    timeout_s: float | None = 60.0
    count: int = 20
    seed: int = 0
    config: SolverConfig = field(default_factory=SolverConfig.from_settings)


def _run_row(instance: Instance, config: SolverConfig, expected: str) -> dict:
    result = solve(instance, config)
    stats = result.stats
    logger.info(f"{instance.meta.get('family')} ({instance.meta.get('encoding')}): {result.status.value}")
    return {
        "instance": instance.meta.get("family", "instance"),
        "encoding": instance.meta.get("encoding", ""),
        "status": result.status.value,
        "decisions": stats.decisions,
        "conflicts": stats.conflicts,
        "time": round(stats.wall_time, 4),
        "expected": expected,
    }


def run_suite(name: str, options: SuiteOptions | None = None) -> pd.DataFrame:
    """
    Solve one benchmark family across its sizes.

    :param name: One of pigeonhole, tseitin, clique-color or random.
    :param options: Sizes, limits and the base solver config.
    :return: One row per solved instance.
    """
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    options = options or SuiteOptions()
    config = replace(options.config, timeout_s=options.timeout_s)
    unsat, sat = SolveStatus.UNSAT.value, SolveStatus.SAT.value
    rows = []

    if name == "pigeonhole":
        for n in range(2, options.max_n + 1):
            rows.append(_run_row(gen_pigeonhole_cnf(n), config, unsat))
        for n in range(2, options.max_n + 1):
            instance = gen_pigeonhole_cnf(n)
            instance = replace(instance, meta=dict(instance.meta, encoding="cnf+strengthen"))
            rows.append(_run_row(instance, replace(config, preprocess=True), unsat))
        for n in options.pb_sizes:
            instance = gen_pigeonhole_pb(n)
            instance = replace(instance, meta=dict(instance.meta, encoding="pb+strengthen"))
            rows.append(_run_row(instance, replace(config, heuristic="moms", preprocess=True), unsat))

    elif name == "tseitin":
        for nodes in range(4, 2 * options.max_n + 1, 2):
            for odd in (True, False):
                graph = random_regular_graph(nodes, 3, seed=options.seed + nodes, odd_charge=odd)
                rows.append(_run_row(gen_tseitin(graph), config, unsat if odd else sat))

    elif name == "clique-color":
        for n in range(1, options.max_n + 1):
            rows.append(_run_row(gen_clique_color(n + 1, n), config, unsat))

    else:
        rng = np.random.default_rng(options.seed)
        for index in range(options.count):
            num_vars = int(rng.integers(3, 13))
            instance = gen_random_instance(num_vars, int(rng.integers(2, 3 * num_vars)), seed=options.seed + index)
            satisfiable, _ = brute_force_sat(instance)
            rows.append(_run_row(instance, config, sat if satisfiable else unsat))

    # Create and return DataFrame
    return pd.DataFrame(rows, columns=COLUMNS)
