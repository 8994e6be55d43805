"""
This module contains the DPLL search driver: propagation, conflict analysis
with backjumping and learning, relevance-bounded database reduction,
geometric restarts and the four branching heuristics.
"""
import time
import logging
import threading
import concurrent.futures
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from pbsat.config import DB_POLICIES, ENGINES, HEURISTICS, Settings, get_settings
from pbsat.errors import ConfigError, ConflictAtRoot, PBSatError
from pbsat.infer import LearnedDB, ConflictAnalysis, analyze_conflict, bump_activity, decay_activity, reduce_db
from pbsat.model import Instance, LinearConstraint, Literal
from pbsat.preprocess import StrengthenBudget, strengthen_pass
from pbsat.propagate import PropagationEngine, UnitStatus, is_unit, make_engine


logger = logging.getLogger(__name__)


class SolveStatus(Enum):
    SAT = "SATISFIABLE"
    UNSAT = "UNSATISFIABLE"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters of a single solver run.

    ``restart_first`` of 0 disables restarts; limits left at None are unbounded.
    """
    heuristic: str = "activity"
    engine: str = "watched"
    relevance_bound: int = 3
    length_bound: int = 50
    db_policy: str = "hybrid"
    reduce_db: bool = True
    reduce_interval: int = 100
    preprocess: bool = False
    preprocess_max_probes: int | None = None
    probe_depth: int = 1
    seed: int = 0
    restart_first: int = 100
    restart_factor: float = 1.5
    max_decisions: int | None = None
    max_conflicts: int | None = None
    timeout_s: float | None = None
    probe_candidates: int = 5
    random_branch_freq: float = 0.0
    decay_factor: float = 0.5
    decay_period: int = 50
    max_weight: int = 2 ** 62

    def __post_init__(self):
        if self.heuristic not in HEURISTICS:
            raise ConfigError(f"unknown heuristic {self.heuristic!r}; choose from {', '.join(HEURISTICS)}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {', '.join(ENGINES)}")
        if self.db_policy not in DB_POLICIES:
            raise ConfigError(f"unknown deletion policy {self.db_policy!r}")
        if self.relevance_bound < 0 or self.length_bound < 0:
            raise ConfigError("relevance and length bounds must not be negative")
        if self.reduce_interval < 1 or self.probe_candidates < 1 or self.decay_period < 1:
            raise ConfigError("intervals and candidate counts must be positive")
        if self.probe_depth not in (1, 2):
            raise ConfigError(f"probe depth must be 1 or 2, got {self.probe_depth}")
        if self.restart_first < 0 or self.restart_factor < 1.0:
            raise ConfigError("restart schedule must be non-negative and non-shrinking")
        if not 0.0 <= self.random_branch_freq <= 1.0:
            raise ConfigError(f"random branch frequency must lie in [0, 1], got {self.random_branch_freq}")

    @classmethod
    def from_settings(cls, settings: Settings | None = None, **overrides) -> "SolverConfig":
        """
        Build a config whose defaults come from the environment settings.

        :param settings: Settings to draw from; the process-wide ones by default.
        :param overrides: Field values taking precedence over the settings.
        :return: The config.
        """
        settings = settings or get_settings()
        values = {
            "heuristic": settings.heuristic,
            "engine": settings.engine,
            "relevance_bound": settings.relevance_bound,
            "length_bound": settings.length_bound,
            "max_weight": settings.max_weight,
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass
class SolveStats:
    decisions: int = 0
    propagations: int = 0
    conflicts: int = 0
    learned: int = 0
    max_db_size: int = 0
    restarts: int = 0
    fallbacks: int = 0
    deleted: int = 0
    wall_time: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveResult:
    status: SolveStatus
    model: dict[int, bool] | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    limit: str | None = None

    def model_literals(self) -> list[Literal]:
        if self.model is None:
            return []
        return [var if value else -var for var, value in sorted(self.model.items())]


class Solver:
    """
    One DPLL search over one instance.

    :param instance: The normalized instance.
    :param config: Run parameters; defaults come from the environment settings.
    :param stop_event: Set by another thread to stop the run early.
    """

    def __init__(self, instance: Instance, config: SolverConfig | None = None,
                 stop_event: threading.Event | None = None):
        self.instance = instance
        self.config = config or SolverConfig.from_settings()
        self.stop_event = stop_event
        self.stats = SolveStats()
        self.decision_trace: list[Literal] = []
        self.rng = np.random.default_rng(self.config.seed)
        self.engine: PropagationEngine = make_engine(self.config.engine, instance.num_vars)
        self.db = LearnedDB(
            instance.num_vars,
            relevance_bound=self.config.relevance_bound,
            length_bound=self.config.length_bound,
            policy=self.config.db_policy,
            decay_factor=self.config.decay_factor,
            decay_period=self.config.decay_period,
        )
        self._start = 0.0

    @property
    def trail(self):
        return self.engine.trail

    def solve(self) -> SolveResult:
        """
        Run the search to completion or until a limit is hit.

        :return: The status, a model when satisfiable, and the run statistics.
        """
        family = self.instance.meta.get("family", "instance")
        logger.info(
            f"Solving {family}: {self.instance.num_vars} variables, {len(self.instance.constraints)} constraints "
            f"(heuristic={self.config.heuristic}, engine={self.config.engine})"
        )
        self._start = time.perf_counter()
        result = self._run()
        self.stats.propagations = self.engine.propagations
        self.stats.wall_time = time.perf_counter() - self._start
        result.stats = self.stats
        logger.info(
            f"{family}: {result.status.value} after {self.stats.decisions} decisions, "
            f"{self.stats.conflicts} conflicts in {self.stats.wall_time:.3f}s"
        )
        return result

    def setup(self) -> Instance | None:
        """
        Strengthen the instance when configured and load it into the engine.

        :return: The instance searched over, or None when it is already known unsatisfiable.
        """
        instance = self.instance
        if instance.contradiction:
            return None

        # Optional strengthening before search
        if self.config.preprocess:
            budget = StrengthenBudget(max_probes=self.config.preprocess_max_probes, depth=self.config.probe_depth)
            instance = strengthen_pass(instance, budget)
            if instance.contradiction:
                return None

        for c in instance.constraints:
            self.engine.add_constraint(c, learned=False)
        return instance

    def _run(self) -> SolveResult:
        instance = self.setup()
        if instance is None:
            return SolveResult(SolveStatus.UNSAT)

        engine = self.engine
        restart_limit = self.config.restart_first
        since_restart = since_reduce = 0
        newest = None
        reduce_due = False
        while True:
            limit = self._limit_reached()
            if limit is not None:
                return SolveResult(SolveStatus.UNKNOWN, limit=limit)

            conflict = engine.propagate()
            if conflict is not None:
                self.stats.conflicts += 1
                if self.trail.decision_level == 0:
                    return SolveResult(SolveStatus.UNSAT)
                try:
                    analysis = analyze_conflict(engine, conflict, self.config.max_weight)
                except ConflictAtRoot:
                    return SolveResult(SolveStatus.UNSAT)
                newest = self._learn(analysis)
                since_restart += 1
                since_reduce += 1

                # Geometric restarts keep the learned constraints
                if restart_limit and since_restart >= restart_limit:
                    engine.backtrack(0)
                    self.stats.restarts += 1
                    since_restart = 0
                    restart_limit = int(restart_limit * self.config.restart_factor)
                    logger.debug(f"Restart {self.stats.restarts}, next after {restart_limit} conflicts")

                if self.config.reduce_db and since_reduce >= self.config.reduce_interval:
                    reduce_due = True
                    since_reduce = 0
                continue

            # Reduce only at a fixpoint, once the newest learned constraint has asserted
            if reduce_due:
                self.stats.deleted += len(reduce_db(self.db, engine, protected=(newest,)))
                reduce_due = False

            if len(self.trail) == instance.num_vars:
                model = {var: bool(self.trail.values[var]) for var in range(1, instance.num_vars + 1)}
                return SolveResult(SolveStatus.SAT, model)

            lit = self.pick_branch()
            self.stats.decisions += 1
            self.decision_trace.append(lit)
            engine.decide(lit)

    def _learn(self, analysis: ConflictAnalysis) -> int:
        if analysis.fallback:
            self.stats.fallbacks += 1
        self.engine.backtrack(analysis.backjump_level)
        cid = self.engine.add_constraint(analysis.learned, learned=True)
        assert is_unit(analysis.learned, self.trail).status is not UnitStatus.NOT_UNIT, \
            "learned constraint is neither unit nor conflicting at its backjump level"
        self.db.add(cid)
        bump_activity(self.db, analysis.learned.literals)
        if self.stats.conflicts % self.db.decay_period == 0:
            decay_activity(self.db)
        self.stats.learned += 1
        self.stats.max_db_size = max(self.stats.max_db_size, len(self.db))
        return cid

    def _limit_reached(self) -> str | None:
        config = self.config
        if config.max_decisions is not None and self.stats.decisions >= config.max_decisions:
            return "decisions"
        if config.max_conflicts is not None and self.stats.conflicts >= config.max_conflicts:
            return "conflicts"
        if config.timeout_s is not None and time.perf_counter() - self._start >= config.timeout_s:
            return "timeout"
        if self.stop_event is not None and self.stop_event.is_set():
            return "stopped"
        return None

    # Branching

    def pick_branch(self) -> Literal:
        if self.config.random_branch_freq and self.rng.random() < self.config.random_branch_freq:
            free = [var for var in range(1, self.instance.num_vars + 1) if not self.trail.is_assigned(var)]
            return -int(self.rng.choice(free))
        return {
            "moms": self.pick_branch_moms,
            "probe": self.pick_branch_probe,
            "activity": self.pick_branch_activity,
            "recent": self.pick_branch_recent,
        }[self.config.heuristic]()

    def _lowest_unassigned(self) -> int:
        return next(var for var in range(1, self.instance.num_vars + 1) if not self.trail.is_assigned(var))

    def _residual(self, c: LinearConstraint) -> list[Literal] | None:
        """Unvalued literals of an unsatisfied constraint, None if it is satisfied."""
        trail = self.trail
        curr = -c.degree
        unvalued = []
        for weight, lit in c.terms:
            value = trail.value(lit)
            if value is None:
                unvalued.append(lit)
            elif value:
                curr += weight
        return None if curr >= 0 else unvalued

    def _moms_counts(self) -> dict[Literal, int]:
        """Literal occurrences over the unsatisfied constraints of minimum residual size."""
        smallest = None
        counts: dict[Literal, int] = {}
        for c in self.engine.constraints.values():
            unvalued = self._residual(c)
            if not unvalued:
                continue
            if smallest is None or len(unvalued) < smallest:
                smallest = len(unvalued)
                counts = {}
            if len(unvalued) == smallest:
                for lit in unvalued:
                    counts[lit] = counts.get(lit, 0) + 1
        return counts

    def _moms_ranking(self) -> list[tuple[int, int, int]]:
        """(var, positive count, negative count) by descending total, then variable index."""
        counts = self._moms_counts()
        variables = sorted({abs(lit) for lit in counts})
        ranking = [(var, counts.get(var, 0), counts.get(-var, 0)) for var in variables]
        ranking.sort(key=lambda item: (-(item[1] + item[2]), item[0]))
        return ranking

    def pick_branch_moms(self) -> Literal:
        """
        Maximum occurrences in constraints of minimum size.

        :return: The most frequent variable, in its more frequent polarity (ties go false).
        """
        ranking = self._moms_ranking()
        if not ranking:
            return -self._lowest_unassigned()
        var, positive, negative = ranking[0]
        return var if positive > negative else -var

    def _probe(self, lit: Literal) -> tuple[int, bool]:
        """Assert ``lit`` tentatively and report (forced literal count, conflict)."""
        level = self.trail.decision_level
        before = len(self.trail)
        self.engine.decide(lit)
        conflict = self.engine.propagate()
        forced = len(self.trail) - before - 1
        self.engine.backtrack(level)
        return forced, conflict is not None

    def pick_branch_probe(self) -> Literal:
        """
        Probe both polarities of a MOMS shortlist and pick the variable whose
        propagation counts have the largest product, ties by sum. A probe that
        conflicts returns the opposite literal at once.
        """
        ranking = self._moms_ranking()[:self.config.probe_candidates]
        best_key, best_lit = (0, 0), None
        for var, _, _ in ranking:
            positive, conflict = self._probe(var)
            if conflict:
                return -var
            negative, conflict = self._probe(-var)
            if conflict:
                return var
            key = (positive * negative, positive + negative)
            if key > best_key:
                best_key, best_lit = key, (var if positive > negative else -var)
        if best_lit is None:
            return self.pick_branch_moms()
        return best_lit

    def _phase(self, var: int) -> Literal:
        activity = self.db.activity
        return var if activity[2 * var] > activity[2 * var + 1] else -var

    def pick_branch_activity(self) -> Literal:
        """
        The unassigned literal with the highest activity; ties go to the lowest
        variable, then to the negative literal.
        """
        n = self.instance.num_vars
        activity = self.db.activity
        positive = activity[2:2 * n + 2:2]
        negative = activity[3:2 * n + 2:2]
        scores = np.maximum(positive, negative)
        assigned = np.fromiter((self.trail.is_assigned(var) for var in range(1, n + 1)), dtype=bool, count=n)
        scores = np.where(assigned, -np.inf, scores)
        var = int(np.argmax(scores)) + 1
        return self._phase(var)

    def pick_branch_recent(self) -> Literal:
        """
        Branch inside the most recently learned constraint that is not yet
        satisfied, on its unvalued literal of highest activity; fall back to
        the activity heuristic when there is none.
        """
        for cid in reversed(self.db.ids):
            unvalued = self._residual(self.engine.constraint(cid))
            if not unvalued:
                continue
            best = max(unvalued, key=lambda lit: (self.db.literal_activity(lit), -abs(lit)))
            return self._phase(abs(best))
        return self.pick_branch_activity()


def solve(instance: Instance, config: SolverConfig | None = None,
          stop_event: threading.Event | None = None) -> SolveResult:
    """
    Decide satisfiability of a normalized instance.

    :param instance: The instance.
    :param config: Run parameters.
    :param stop_event: Optional cooperative cancellation flag.
    :return: The result.
    """
    return Solver(instance, config, stop_event).solve()


def diversify(config: SolverConfig, count: int) -> list[SolverConfig]:
    """``count`` variants of a config with shifted seeds and rotated heuristics."""
    start = HEURISTICS.index(config.heuristic)
    return [
        replace(config, seed=config.seed + i, heuristic=HEURISTICS[(start + i) % len(HEURISTICS)])
        for i in range(count)
    ]


def solve_portfolio(instance: Instance, configs: Sequence[SolverConfig],
                    max_workers: int | None = None) -> SolveResult:
    """
    Run several configs on their own threads; the first definitive answer wins
    and the other runs are asked to stop.

    :param instance: The instance, shared read-only by every run.
    :param configs: One config per run.
    :param max_workers: Thread pool size; one thread per config by default.
    :return: The winning result, or an UNKNOWN one if no run finished.
    """
    if not configs:
        raise ConfigError("a portfolio needs at least one config")
    stop = threading.Event()
    winner: SolveResult | None = None
    results: list[SolveResult] = []

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers or len(configs)) as executor:
        # Submit one solver per config
        futures = {executor.submit(solve, instance, config, stop): config for config in configs}

        # Keep track of failed runs
        failed_tasks = []

        for future in concurrent.futures.as_completed(futures):
            try:
                result = future.result()
            except PBSatError as e:
                logger.error(f"Portfolio run {futures[future]} failed: {e}")
                failed_tasks.append(futures[future])
                continue
            results.append(result)
            if winner is None and result.status is not SolveStatus.UNKNOWN:
                winner = result
                stop.set()
                logger.info(f"Portfolio winner: heuristic={futures[future].heuristic}, seed={futures[future].seed}")

    if failed_tasks:
        logger.warning(f"{len(failed_tasks)} of {len(configs)} portfolio runs failed")
    if winner is not None:
        return winner
    if results:
        return results[0]
    raise PBSatError("every portfolio run failed")
