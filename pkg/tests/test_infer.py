import itertools

import numpy as np
import pytest

from pbsat.errors import ConfigError, ConflictAtRoot, ResolutionError, ResolutionOverflow
from pbsat.infer import (
    LearnedDB,
    analyze_conflict,
    assertion_level,
    bump_activity,
    decay_activity,
    irrelevance,
    pb_resolve,
    reduce_db,
    weaken_to_cardinality,
)
from pbsat.model import CONTRADICTION, TAUTOLOGY, cardinality, clause, make_constraint
from pbsat.propagate import CounterEngine, Trail, make_engine


A, B, C, D, E = 1, 2, 3, 4, 5


def implies(models, premises, conclusion, num_vars):
    return models(premises, num_vars) <= models([conclusion], num_vars)


class TestPbResolve:

    @staticmethod
    def test_cardinality_with_clause():
        c = cardinality([A, B, C], 2)
        other = clause([A, -C, D])
        assert pb_resolve(c, other, C) == make_constraint([(2, A), (1, B), (1, D)], 2)

    @staticmethod
    def test_clause_with_clause():
        assert pb_resolve(clause([A, -B, C]), clause([B, -D]), B) == clause([A, C, -D])

    @staticmethod
    def test_result_is_saturated():
        assert pb_resolve(clause([1, 2]), clause([-1, 2]), 1) == clause([2])

    @staticmethod
    def test_markers():
        assert pb_resolve(clause([1, 2]), clause([-1, -2]), 1) is TAUTOLOGY
        assert pb_resolve(clause([1]), clause([-1]), 1) is CONTRADICTION

    @staticmethod
    def test_errors():
        with pytest.raises(ResolutionError):
            pb_resolve(clause([1, 2]), clause([1, 3]), 1)
        with pytest.raises(ResolutionOverflow):
            pb_resolve(cardinality([1, 2], 2), clause([-1, 3]), 1, max_weight=2)

    @staticmethod
    def test_weights_are_scaled_to_cancel_the_pivot():
        # 3x + 2y + 2z >= 3 and 2~x + w >= 2 take multipliers 2 and 3
        c = make_constraint([(3, 1), (2, 2), (2, 3)], 3)
        other = make_constraint([(2, -1), (1, 4)], 2)
        assert pb_resolve(c, other, 1) == make_constraint([(4, 2), (4, 3), (3, 4)], 6)

    @staticmethod
    def test_every_clashing_pair_in_a_small_universe(models):
        constraints = [
            clause([1, 2]),
            clause([-1, 3]),
            cardinality([1, 2, 3], 2),
            cardinality([-1, 2, -3], 2),
            make_constraint([(2, 1), (1, 2), (1, 3)], 2),
            make_constraint([(2, -1), (1, -2), (1, 3)], 2),
            make_constraint([(3, -1), (2, 2), (1, 3)], 4),
        ]
        for c, other in itertools.product(constraints, repeat=2):
            if c.weight_of(1) and other.weight_of(-1):
                result = pb_resolve(c, other, 1)
                if result is CONTRADICTION:
                    assert not models([c, other], 3)
                elif result is not TAUTOLOGY:
                    assert models([c, other], 3) <= models([result], 3)

    @staticmethod
    def test_soundness_on_random_premises(models):
        rng = np.random.default_rng(7)
        for _ in range(200):
            num_vars = 5
            premises = []
            for polarity in (1, -1):
                others = rng.choice(np.arange(2, num_vars + 1), size=int(rng.integers(0, 4)), replace=False)
                literals = [polarity] + [int(v) if rng.random() < 0.5 else -int(v) for v in others]
                weights = [int(w) for w in rng.integers(1, 4, size=len(literals))]
                degree = int(rng.integers(1, sum(weights) + 1))
                premises.append(make_constraint(((min(w, degree), lit) for w, lit in zip(weights, literals)), degree))

            result = pb_resolve(premises[0], premises[1], 1)
            both = models(premises, num_vars)
            if result is CONTRADICTION:
                assert not both
            elif result is not TAUTOLOGY:
                assert both <= models([result], num_vars)

    @staticmethod
    def test_clauses_resolve_like_classical_resolution():
        rng = np.random.default_rng(9)
        for _ in range(200):
            left = {1} | {int(v) * (1 if rng.random() < 0.5 else -1) for v in rng.choice(np.arange(2, 7), 2, replace=False)}
            right = {-1} | {int(v) * (1 if rng.random() < 0.5 else -1) for v in rng.choice(np.arange(2, 7), 2, replace=False)}
            expected = (left | right) - {1, -1}
            result = pb_resolve(clause(left), clause(right), 1)
            if any(-lit in expected for lit in expected):
                assert result is TAUTOLOGY
            else:
                assert result == clause(expected)


class TestWeakening:

    @staticmethod
    def test_examples(models):
        assert weaken_to_cardinality(make_constraint([(2, A), (1, B), (1, D)], 2)) == clause([A, B, D])
        assert weaken_to_cardinality(clause([A, B])) == clause([A, B])
        c = make_constraint([(3, 1), (2, 2), (1, 3)], 4)
        weak = weaken_to_cardinality(c)
        assert weak == cardinality([1, 2, 3], 2)
        assert implies(models, [c], weak, 3)


class TestIrrelevance:

    @staticmethod
    def test_examples():
        nogood = clause([-A, -B, -C, D, E])
        assert irrelevance(nogood, Trail.from_literals(5, [A, B, C])) == 1
        assert irrelevance(clause([A, B, E]), Trail.from_literals(5, [-A, -B, -C])) == 0
        assert irrelevance(nogood, Trail.from_literals(5, [-A, -B, -C])) == 4

    @staticmethod
    def test_clause_counts_its_non_false_literals():
        rng = np.random.default_rng(11)
        for _ in range(2000):
            num_vars = int(rng.integers(1, 9))
            size = int(rng.integers(1, num_vars + 1))
            variables = rng.choice(np.arange(1, num_vars + 1), size=size, replace=False)
            c = clause([int(v) if rng.random() < 0.5 else -int(v) for v in variables])
            assigned = rng.permutation(np.arange(1, num_vars + 1))[:int(rng.integers(0, num_vars + 1))]
            trail = Trail.from_literals(num_vars, [int(v) if rng.random() < 0.5 else -int(v) for v in assigned])
            non_false = sum(1 for lit in c.literals if not trail.is_false(lit))
            assert irrelevance(c, trail) == non_false - 1


class TestAssertionLevel:

    @staticmethod
    def test_lowest_level_where_unit():
        engine = CounterEngine(3)
        engine.decide(-1)
        engine.decide(-2)
        engine.decide(-3)
        assert assertion_level(clause([1, 2, 3]), engine.trail) == 2
        assert assertion_level(clause([1, 3]), engine.trail) == 1
        assert assertion_level(clause([3]), engine.trail) == 0
        assert assertion_level(clause([2, 3]), engine.trail) == 2


@pytest.mark.parametrize("kind", ["counter", "watched"])
class TestAnalyzeConflict:

    @staticmethod
    def test_learns_first_uip_clause(kind):
        engine = make_engine(kind, 5)
        engine.add_constraint(clause([-A, B, C, -D, E]))
        engine.add_constraint(clause([-C, -D]))
        assert engine.propagate() is None
        for lit in (A, -B, -E):
            engine.decide(lit)
            assert engine.propagate() is None
        engine.decide(D)
        conflict = engine.propagate()
        assert conflict is not None

        analysis = analyze_conflict(engine, conflict)
        assert analysis.learned == clause([-A, B, -D, E])
        assert analysis.backjump_level == 3
        assert analysis.learned.learned
        assert not analysis.fallback

    @staticmethod
    def test_first_decision_conflict(kind):
        engine = make_engine(kind, 2)
        engine.add_constraint(clause([-1, 2]))
        engine.add_constraint(clause([-1, -2]))
        assert engine.propagate() is None
        engine.decide(1)
        conflict = engine.propagate()
        analysis = analyze_conflict(engine, conflict)
        assert analysis.learned == clause([-1])
        assert analysis.backjump_level == 0

    @staticmethod
    def test_conflict_at_root(kind):
        engine = make_engine(kind, 1)
        engine.add_constraint(clause([1]))
        cid = engine.add_constraint(clause([-1]))
        engine.propagate()
        with pytest.raises(ConflictAtRoot):
            analyze_conflict(engine, cid)


class TestResolutionFallback:

    @staticmethod
    def test_unfalsified_resolvent_falls_back_to_clause():
        # e forced by 2e + a + c >= 2 at the level of ~b, where 2~e + b + d >= 2 conflicts;
        # resolving on e gives a + b + c + d >= 2, which the trail does not falsify
        eq31 = make_constraint([(2, E), (1, A), (1, C)], 2)
        eq32 = make_constraint([(2, -E), (1, B), (1, D)], 2)
        engine = CounterEngine(5)
        first = engine.add_constraint(eq31)
        second = engine.add_constraint(eq32)
        engine.decide(-A)
        engine.decide(-B)
        engine.assign(E, reason=first)
        assert engine.counters(second)[1] < 0

        assert pb_resolve(eq32, eq31, E) == cardinality([A, B, C, D], 2)
        analysis = analyze_conflict(engine, second)
        assert analysis.fallback
        assert analysis.weakened
        assert analysis.learned == clause([A, B])
        assert analysis.backjump_level == 1

    @staticmethod
    def test_overflow_falls_back_to_clause():
        def conflicting_engine():
            # ~x2 forces x1 through 3x1 + 2x2 + x3 >= 3, falsifying ~x1 + x2 >= 1
            engine = CounterEngine(3)
            reason = engine.add_constraint(make_constraint([(3, 1), (2, 2), (1, 3)], 3))
            conflict = engine.add_constraint(clause([-1, 2]))
            engine.decide(-2)
            engine.assign(1, reason=reason)
            return engine, conflict

        engine, conflict = conflicting_engine()
        analysis = analyze_conflict(engine, conflict)
        assert not analysis.fallback
        assert analysis.learned == make_constraint([(3, 2), (1, 3)], 3)
        assert analysis.backjump_level == 0

        # The step needs degree 6
        engine, conflict = conflicting_engine()
        analysis = analyze_conflict(engine, conflict, max_weight=4)
        assert analysis.fallback
        assert analysis.learned == clause([2])
        assert analysis.backjump_level == 0


class TestLearnedDB:

    @staticmethod
    def test_validation():
        with pytest.raises(ConfigError):
            LearnedDB(3, relevance_bound=-1)
        with pytest.raises(ConfigError):
            LearnedDB(3, policy="lazy")
        with pytest.raises(ConfigError):
            LearnedDB(3, decay_factor=1.0)

    @staticmethod
    def test_bump_and_decay():
        db = LearnedDB(3)
        bump_activity(db, [-A, B])
        bump_activity(db, [B])
        assert db.literal_activity(-A) == 1.0
        assert db.literal_activity(B) == 2.0
        assert db.literal_activity(A) == 0.0
        order = np.argsort(db.activity, kind="stable")
        decay_activity(db)
        assert db.literal_activity(B) == 1.0
        assert (np.argsort(db.activity, kind="stable") == order).all()


class TestReduceDb:

    @staticmethod
    def test_irrelevant_long_nogood_is_deleted():
        engine = CounterEngine(5)
        cid = engine.add_constraint(clause([-A, -B, -C, D, E]), learned=True)
        db = LearnedDB(5, relevance_bound=3, length_bound=4)
        db.add(cid)
        for lit in (-A, -B, -C):
            engine.decide(lit)
        assert reduce_db(db, engine) == [cid]
        assert cid not in engine.constraints
        assert db.ids == []

    @staticmethod
    def test_hybrid_policy_needs_both_bounds():
        engine = CounterEngine(5)
        cid = engine.add_constraint(clause([-A, -B, -C, D, E]), learned=True)
        db = LearnedDB(5, relevance_bound=3, length_bound=5)
        db.add(cid)
        for lit in (-A, -B, -C):
            engine.decide(lit)
        assert reduce_db(db, engine) == []
        db.policy = "strict"
        assert reduce_db(db, engine) == [cid]

    @staticmethod
    def test_reasons_are_kept():
        engine = CounterEngine(3)
        cid = engine.add_constraint(clause([1, 2, 3]), learned=True)
        db = LearnedDB(3, relevance_bound=0, length_bound=1, policy="strict")
        db.add(cid)
        engine.propagate()
        engine.decide(-1)
        engine.decide(-2)
        assert engine.propagate() is None
        assert engine.trail.reason_of(3) == cid
        assert reduce_db(db, engine) == []
        assert db.ids == [cid]

    @staticmethod
    def test_protected_ids_are_kept():
        engine = CounterEngine(5)
        cid = engine.add_constraint(clause([-A, -B, -C, D, E]), learned=True)
        db = LearnedDB(5, relevance_bound=0, length_bound=0, policy="strict")
        db.add(cid)
        for lit in (-A, -B, -C):
            engine.decide(lit)
        assert reduce_db(db, engine, protected=[cid]) == []
        assert db.ids == [cid]
        assert reduce_db(db, engine) == [cid]

    @staticmethod
    def test_zero_irrelevant_constraints_are_kept():
        engine = CounterEngine(3)
        cid = engine.add_constraint(clause([1, 2, 3]), learned=True)
        db = LearnedDB(3, relevance_bound=0, length_bound=0)
        db.add(cid)
        engine.decide(-1)
        engine.decide(3)
        engine.decide(-2)
        assert irrelevance(engine.constraint(cid), engine.trail) == 0
        assert reduce_db(db, engine) == []


class TestLearnedConstraintsAreImplied:

    @staticmethod
    def test_random_instances(models, random_instances):
        from pbsat.search import Solver, SolverConfig

        for instance in random_instances(30):
            if instance.contradiction:
                continue
            for engine in ("counter", "watched"):
                solver = Solver(instance, SolverConfig(engine=engine, reduce_db=False, heuristic="moms"))
                solver.solve()
                original = models(instance.constraints, instance.num_vars)
                for cid in solver.db.ids:
                    learned = solver.engine.constraint(cid)
                    assert original <= models([learned], instance.num_vars), str(learned)
