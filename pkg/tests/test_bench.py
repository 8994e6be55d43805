import itertools
import math

import numpy as np
import pytest

from pbsat.bench import (
    COLUMNS,
    ChargedGraph,
    SuiteOptions,
    brute_force_sat,
    gen_clique_color,
    gen_mod_encoding,
    gen_parity_cnf,
    gen_pigeonhole_cnf,
    gen_pigeonhole_pb,
    gen_random_instance,
    gen_tseitin,
    mod2_solve,
    model_mask,
    pigeon_var,
    random_regular_graph,
    run_suite,
)
from pbsat.errors import ConfigError, ExpansionTooLarge, InstanceError, OracleCapExceeded
from pbsat.model import CONTRADICTION, Instance, cardinality, cardinality_to_cnf, clause, make_constraint
from pbsat.search import SolveStatus, SolverConfig, solve

TRIANGLE_EDGES = ((1, 2), (2, 3), (1, 3))


def parity_models(literals, parity, num_vars):
    """Assignment indices whose true-literal count among ``literals`` has the given parity."""
    result = set()
    for index in range(1 << num_vars):
        true = sum(1 for lit in literals if bool((index >> (abs(lit) - 1)) & 1) == (lit > 0))
        if true % 2 == parity:
            result.add(index)
    return result


class TestPigeonhole:

    @staticmethod
    def test_single_hole():
        instance = gen_pigeonhole_cnf(1)
        assert instance.num_vars == 2
        assert instance.constraints == (clause([1]), clause([2]), clause([-1, -2]))
        assert not brute_force_sat(instance)[0]

    @staticmethod
    def test_sizes():
        for n in range(1, 7):
            instance = gen_pigeonhole_cnf(n)
            assert instance.num_vars == n * (n + 1)
            assert len(instance.constraints) == (n + 1) + n * math.comb(n + 1, 2)
            assert instance.meta == {"family": f"hole{n}", "encoding": "cnf", "n": n}

    @staticmethod
    def test_variable_numbering():
        assert pigeon_var(3, 1, 1) == 1
        assert pigeon_var(3, 2, 1) == 4
        assert pigeon_var(3, 4, 3) == 12

    @staticmethod
    def test_pb_encoding():
        instance = gen_pigeonhole_pb(2)
        assert len(instance.constraints) == 5
        assert instance.constraints[3] == cardinality([-1, -3, -5], 2)
        assert instance.meta["encoding"] == "pb"

    @staticmethod
    def test_pb_expands_to_cnf():
        for n in range(1, 7):
            expanded = set()
            for c in gen_pigeonhole_pb(n).constraints:
                expanded.update(cardinality_to_cnf(c))
            assert expanded == set(gen_pigeonhole_cnf(n).constraints)

    @staticmethod
    def test_unsatisfiable():
        assert not brute_force_sat(gen_pigeonhole_cnf(2))[0]
        assert not brute_force_sat(gen_pigeonhole_pb(3))[0]

    @staticmethod
    def test_needs_a_hole():
        with pytest.raises(InstanceError):
            gen_pigeonhole_cnf(0)

    @staticmethod
    @pytest.mark.slow
    def test_cnf_decisions_grow_steeply():
        decisions = []
        for n in range(6, 10):
            result = solve(gen_pigeonhole_cnf(n), SolverConfig(heuristic="activity"))
            assert result.status is SolveStatus.UNSAT
            decisions.append(result.stats.decisions)
        assert all(smaller < larger for smaller, larger in zip(decisions, decisions[1:])), decisions
        assert decisions[-1] >= 5 * decisions[0], decisions


class TestParity:

    @staticmethod
    def test_three_literals():
        assert gen_parity_cnf([1, 2, 3], 1) == [
            clause([1, 2, 3]),
            clause([1, -2, -3]),
            clause([-1, 2, -3]),
            clause([-1, -2, 3]),
        ]

    @staticmethod
    def test_small_cases(models):
        assert gen_parity_cnf([1], 1) == [clause([1])]
        even = gen_parity_cnf([1, 2], 0)
        assert even == [clause([1, -2]), clause([-1, 2])]
        assert models(even, 2) == {0b00, 0b11}
        assert gen_parity_cnf([], 0) == []
        assert gen_parity_cnf([], 1) is CONTRADICTION

    @staticmethod
    def test_models_match_the_parity(models):
        for length in range(1, 6):
            for parity in (0, 1):
                literals = [var if var % 2 else -var for var in range(1, length + 1)]
                clauses = gen_parity_cnf(literals, parity)
                assert len(clauses) == 2 ** (length - 1)
                assert models(clauses, length) == parity_models(literals, parity, length)

    @staticmethod
    def test_errors():
        with pytest.raises(ExpansionTooLarge):
            gen_parity_cnf(list(range(1, 6)), 1, max_len=4)
        with pytest.raises(InstanceError):
            gen_parity_cnf([1, -1], 0)
        with pytest.raises(InstanceError):
            gen_parity_cnf([1], 2)


class TestTseitin:

    @staticmethod
    def test_triangle():
        odd = gen_tseitin(ChargedGraph((1, 0, 0), TRIANGLE_EDGES))
        assert odd.num_vars == 3
        assert not brute_force_sat(odd)[0]

        satisfiable, model = brute_force_sat(gen_tseitin(ChargedGraph((0, 0, 0), TRIANGLE_EDGES)))
        assert satisfiable
        assert model == {1: False, 2: False, 3: False}

    @staticmethod
    def test_isolated_charged_node_is_a_contradiction():
        instance = gen_tseitin(ChargedGraph((1, 0, 0), ((2, 3),)))
        assert instance.contradiction

    @staticmethod
    def test_oracles_agree_on_random_graphs():
        rng = np.random.default_rng(2)
        for _ in range(60):
            nodes = int(rng.integers(2, 5))
            edges = []
            for _ in range(int(rng.integers(1, 6))):
                u, v = rng.choice(np.arange(1, nodes + 1), size=2, replace=False)
                edges.append((int(u), int(v)))
            charges = tuple(int(b) for b in rng.integers(0, 2, size=nodes))
            graph = ChargedGraph(charges, tuple(edges))

            system = [(graph.incident(node), charges[node - 1]) for node in range(1, nodes + 1)]
            solution = mod2_solve(system, len(edges))
            satisfiable, _ = brute_force_sat(gen_tseitin(graph))
            assert satisfiable == (solution is not None)
            if graph.total_charge % 2:
                assert not satisfiable

    @staticmethod
    def test_graph_validation():
        with pytest.raises(InstanceError):
            ChargedGraph((0, 2), ((1, 2),))
        with pytest.raises(InstanceError):
            ChargedGraph((0, 0), ((1, 1),))
        with pytest.raises(InstanceError):
            ChargedGraph((0, 0), ((1, 3),))

    @staticmethod
    def test_random_regular_graph():
        graph = random_regular_graph(8, 3, seed=1)
        assert graph.total_charge == 1
        assert len(graph.edges) == 12
        assert len(set(graph.edges)) == 12
        for node in range(1, 9):
            assert len(graph.incident(node)) == 3
        assert random_regular_graph(8, 3, seed=1) == graph
        assert random_regular_graph(8, 3, seed=1, odd_charge=False).total_charge == 0
        with pytest.raises(InstanceError):
            random_regular_graph(5, 3)


class TestCliqueColor:

    @staticmethod
    def test_group_sizes():
        instance = gen_clique_color(3, 2)
        assert instance.num_vars == 3 + 6 + 9
        assert len(instance.constraints) == 6 + 3 + 3 + 9 + 18

    @staticmethod
    def test_unsatisfiable_small_cases():
        assert not brute_force_sat(gen_clique_color(2, 1))[0]
        assert not brute_force_sat(gen_clique_color(3, 2))[0]

    @staticmethod
    def test_validation():
        with pytest.raises(InstanceError):
            gen_clique_color(1, 1)


class TestModEncoding:

    @staticmethod
    def test_odd_sum_of_three(models):
        encoding = gen_mod_encoding([(1, 1), (1, 2), (1, 3)], 1, 2, 3)
        assert encoding.aux_vars == (4,)
        assert encoding.num_vars == 4
        assert encoding.constraints == (
            make_constraint([(2, 4), (1, 1), (1, 2), (1, 3)], 3),
            make_constraint([(2, -4), (1, -1), (1, -2), (1, -3)], 2),
        )
        projected = {index & 0b111 for index in models(encoding.constraints, 4)}
        assert projected == parity_models([1, 2, 3], 1, 3)

    @staticmethod
    def test_single_literal():
        encoding = gen_mod_encoding([(1, 1)], 1, 2, 1)
        assert encoding.aux_vars == ()
        assert encoding.constraints == (clause([1]),)

    @staticmethod
    def test_weighted_residues(models):
        terms = [(2, 1), (3, 2), (4, 3)]
        for residue in range(3):
            encoding = gen_mod_encoding(terms, residue, 3, 3)
            projected = {index & 0b111 for index in models(encoding.constraints, encoding.num_vars)}
            expected = set()
            for index in range(8):
                total = sum(w for w, var in terms if (index >> (var - 1)) & 1)
                if total % 3 == residue:
                    expected.add(index)
            assert projected == expected

    @staticmethod
    def test_validation():
        with pytest.raises(InstanceError):
            gen_mod_encoding([(1, 1)], 2, 2, 1)
        with pytest.raises(InstanceError):
            gen_mod_encoding([(0, 1)], 0, 2, 1)


class TestMod2Solve:

    @staticmethod
    def test_examples():
        assert mod2_solve([([1, 2], 1), ([2, 3], 1), ([1, 3], 1)]) is None
        assert mod2_solve([([1, 2], 0)]) == {1: False, 2: False}
        assert mod2_solve([([1], 1), ([1, 2], 1)]) == {1: True, 2: False}

    @staticmethod
    def test_negated_and_repeated_literals():
        # ~x = 1 means x = 0; x + x = 1 reads 0 = 1
        assert mod2_solve([([-1], 1)]) == {1: False}
        assert mod2_solve([([1, 1], 1)]) is None

    @staticmethod
    def test_matches_enumeration():
        rng = np.random.default_rng(4)
        for _ in range(200):
            num_vars = int(rng.integers(1, 6))
            system = []
            for _ in range(int(rng.integers(1, 6))):
                size = int(rng.integers(1, num_vars + 1))
                variables = rng.choice(np.arange(1, num_vars + 1), size=size, replace=False)
                system.append(([int(v) for v in variables], int(rng.integers(0, 2))))

            def holds(values):
                return all(sum(values[v - 1] for v in literals) % 2 == parity for literals, parity in system)

            feasible = any(holds(values) for values in itertools.product((0, 1), repeat=num_vars))
            solution = mod2_solve(system, num_vars)
            assert (solution is not None) == feasible
            if solution is not None:
                assert holds([int(solution[v]) for v in range(1, num_vars + 1)])

    @staticmethod
    @pytest.mark.slow
    def test_matches_enumeration_up_to_twelve_variables():
        rng = np.random.default_rng(40)
        for _ in range(1000):
            num_vars = int(rng.integers(1, 13))
            bits = (np.arange(1 << num_vars)[:, None] >> np.arange(num_vars)) & 1
            feasible = np.ones(1 << num_vars, dtype=bool)
            system = []
            for _ in range(int(rng.integers(1, num_vars + 3))):
                size = int(rng.integers(1, num_vars + 1))
                variables = rng.choice(np.arange(1, num_vars + 1), size=size, replace=False)
                literals = [int(v) if rng.random() < 0.5 else -int(v) for v in variables]
                parity = int(rng.integers(0, 2))
                system.append((literals, parity))
                values = bits[:, np.abs(literals) - 1] ^ (np.array(literals) < 0)
                feasible &= values.sum(axis=1) % 2 == parity

            solution = mod2_solve(system, num_vars)
            assert (solution is not None) == bool(feasible.any())
            if solution is not None:
                index = sum(1 << (var - 1) for var, value in solution.items() if value)
                assert feasible[index]


class TestOracles:

    @staticmethod
    def test_brute_force():
        satisfiable, model = brute_force_sat(Instance(2, (clause([1, 2]),)))
        assert satisfiable
        assert model == {1: True, 2: False}
        assert brute_force_sat(Instance(1, (), contradiction=True)) == (False, None)

    @staticmethod
    def test_cap():
        with pytest.raises(OracleCapExceeded):
            brute_force_sat(Instance(21, ()))
        with pytest.raises(OracleCapExceeded):
            brute_force_sat(Instance(5, ()), cap=4)

    @staticmethod
    def test_chunking_does_not_change_the_mask():
        instance = gen_random_instance(9, 12, seed=3)
        whole = model_mask(instance.constraints, 9)
        chunked = model_mask(instance.constraints, 9, chunk_bits=4)
        assert (whole == chunked).all()

    @staticmethod
    def test_mask_matches_evaluate():
        instance = gen_random_instance(5, 6, seed=8)
        mask = model_mask(instance.constraints, 5)
        for index in range(32):
            assignment = {var: bool((index >> (var - 1)) & 1) for var in range(1, 6)}
            assert mask[index] == instance.is_satisfied_by(assignment)


class TestRandomInstances:

    @staticmethod
    def test_deterministic_per_seed():
        first = gen_random_instance(6, 10, seed=5)
        assert first == gen_random_instance(6, 10, seed=5)
        assert first.meta["family"] == "random6-10-s5"

    @staticmethod
    def test_mix_selection():
        clauses = gen_random_instance(6, 20, seed=1, mix=("clause",))
        assert all(c.is_clause for c in clauses.constraints)
        with pytest.raises(ConfigError):
            gen_random_instance(6, 5, mix=("xor",))


class TestRunSuite:

    @staticmethod
    def test_random_suite_matches_expectations():
        df = run_suite("random", SuiteOptions(count=6, seed=2, timeout_s=None, config=SolverConfig()))
        assert list(df.columns) == COLUMNS
        assert len(df) == 6
        assert (df["status"] == df["expected"]).all()

    @staticmethod
    def test_pigeonhole_suite():
        options = SuiteOptions(max_n=3, pb_sizes=(3,), timeout_s=None, config=SolverConfig())
        df = run_suite("pigeonhole", options)
        assert list(df["encoding"]) == ["cnf", "cnf", "cnf+strengthen", "cnf+strengthen", "pb+strengthen"]
        assert (df["status"] == "UNSATISFIABLE").all()

    @staticmethod
    def test_tseitin_and_clique_suites():
        options = SuiteOptions(max_n=3, timeout_s=None, config=SolverConfig())
        tseitin = run_suite("tseitin", options)
        assert len(tseitin) == 4
        assert (tseitin["status"] == tseitin["expected"]).all()
        clique = run_suite("clique-color", SuiteOptions(max_n=2, timeout_s=None, config=SolverConfig()))
        assert (clique["status"] == "UNSATISFIABLE").all()

    @staticmethod
    def test_unknown_suite():
        with pytest.raises(ConfigError):
            run_suite("sudoku")

    @staticmethod
    @pytest.mark.slow
    def test_cnf_pigeonhole_effort_grows():
        df = run_suite("pigeonhole", SuiteOptions(max_n=7, pb_sizes=(), timeout_s=None,
                                                  config=SolverConfig(heuristic="activity")))
        cnf = df[df["encoding"] == "cnf"]
        assert cnf["conflicts"].iloc[-1] > cnf["conflicts"].iloc[0]
