"""
This module contains the command-line interface.

  solve FILE       decide a DIMACS or OPB instance ("-" reads stdin)
  gen FAMILY ...   write a benchmark instance
  verify FILE MODEL
  bench SUITE      run a benchmark suite and print the result table

Solver answers follow the usual protocol on stdout: an "s" status line,
"v" model lines and "c" comment lines. Exit codes: 10 satisfiable,
20 unsatisfiable, 0 unknown, 1 error.
"""
import sys
import logging
import argparse

from pbsat.bench import (
    SUITES,
    SuiteOptions,
    gen_clique_color,
    gen_mod_encoding,
    gen_pigeonhole_cnf,
    gen_pigeonhole_pb,
    gen_tseitin,
    random_regular_graph,
    run_suite,
)
from pbsat.config import DB_POLICIES, ENGINES, HEURISTICS, get_settings
from pbsat.errors import ConfigError, PBSatError
from pbsat.formats import parse_graph, parse_instance, parse_model, verify, write_instance
from pbsat.model import Instance
from pbsat.search import SolveResult, SolveStatus, SolverConfig, diversify, solve, solve_portfolio


EXIT_CODES = {SolveStatus.SAT: 10, SolveStatus.UNSAT: 20, SolveStatus.UNKNOWN: 0}
FAMILIES = ("pigeonhole-cnf", "pigeonhole-pb", "tseitin", "clique-color", "mod-encode")
LITERALS_PER_LINE = 20


class _Parser(argparse.ArgumentParser):
    """Raise on bad arguments instead of exiting with status 2."""

    def error(self, message):
        raise ConfigError(message)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as f:
        return f.read()


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w") as f:
        f.write(text)


def print_result(result: SolveResult, show_stats: bool = False):
    """
    Print a result in the solver output protocol.

    :param result: The result.
    :param show_stats: Print every statistic on its own "c" line.
    """
    print(f"s {result.status.value}")
    literals = result.model_literals()
    for start in range(0, len(literals), LITERALS_PER_LINE):
        print("v " + " ".join(str(lit) for lit in literals[start:start + LITERALS_PER_LINE]))
    if result.status is SolveStatus.SAT:
        print("v 0")

    stats = result.stats
    if result.limit is not None:
        print(f"c limit={result.limit}")
    if show_stats:
        for key, value in stats.as_dict().items():
            print(f"c {key}={round(value, 4) if isinstance(value, float) else value}")
    else:
        print(f"c decisions={stats.decisions} conflicts={stats.conflicts} time={stats.wall_time:.3f}s")


def cmd_solve(args) -> int:
    instance = parse_instance(_read(args.file))
    config = SolverConfig.from_settings(
        heuristic=args.heuristic,
        engine=args.engine,
        relevance_bound=args.relevance_bound,
        length_bound=args.length_bound,
        db_policy=args.db_policy,
        preprocess=args.preprocess or None,
        probe_depth=args.probe_depth,
        seed=args.seed,
        max_decisions=args.max_decisions,
        max_conflicts=args.max_conflicts,
        timeout_s=args.timeout_s,
    )
    if args.portfolio > 1:
        result = solve_portfolio(instance, diversify(config, args.portfolio))
    else:
        result = solve(instance, config)
    print_result(result, args.stats)
    return EXIT_CODES[result.status]


def _int_params(params: list[str], count: int | None, family: str) -> list[int]:
    if count is not None and len(params) != count:
        raise ConfigError(f"{family} takes {count} integer parameter(s), got {len(params)}")
    try:
        return [int(param) for param in params]
    except ValueError:
        raise ConfigError(f"{family} parameters must be integers: {params}") from None


def build_family(args) -> Instance:
    """
    Generate the instance named by the ``gen`` arguments.

    :param args: Parsed arguments of the gen subcommand.
    :return: The instance.
    """
    family = args.family
    if family == "pigeonhole-cnf":
        return gen_pigeonhole_cnf(*_int_params(args.params, 1, family))
    if family == "pigeonhole-pb":
        return gen_pigeonhole_pb(*_int_params(args.params, 1, family))
    if family == "clique-color":
        return gen_clique_color(*_int_params(args.params, 2, family))
    if family == "tseitin":
        if args.params:
            graph = parse_graph(_read(args.params[0]))
        else:
            graph = random_regular_graph(args.nodes, args.degree, args.seed, odd_charge=not args.even)
        return gen_tseitin(graph)

    # mod-encode MODULUS RESIDUE W1 W2 ... over x1, x2, ...
    values = _int_params(args.params, None, family)
    if len(values) < 3:
        raise ConfigError("mod-encode takes MODULUS RESIDUE and at least one weight")
    modulus, residue, weights = values[0], values[1], values[2:]
    terms = [(weight, var) for var, weight in enumerate(weights, start=1)]
    encoding = gen_mod_encoding(terms, residue, modulus, len(weights))
    meta = {"family": f"mod{modulus}-r{residue}", "encoding": "pb", "aux_vars": list(encoding.aux_vars)}
    return Instance(encoding.num_vars, encoding.constraints, meta, encoding.contradiction)


def cmd_gen(args) -> int:
    instance = build_family(args)
    fmt = args.format or ("opb" if instance.meta.get("encoding") == "pb" else "cnf")
    _write(write_instance(instance, fmt), args.output)
    logging.info(f"Generated {instance.meta.get('family')}: {instance.num_vars} variables, "
                 f"{len(instance.constraints)} constraints")
    return 0


def cmd_verify(args) -> int:
    instance = parse_instance(_read(args.file))
    model = parse_model(_read(args.model))
    result = verify(instance, model)
    if result.ok:
        print(f"c model satisfies all {len(instance.constraints)} constraints")
        return 0
    if result.violated is None:
        print("c instance contains an unsatisfiable constraint")
    else:
        print(f"c model violates {result.violated}")
    return 2


def cmd_bench(args) -> int:
    try:
        pb_sizes = tuple(int(size) for size in args.pb_sizes.split(",") if size.strip())
    except ValueError:
        raise ConfigError(f"--pb-sizes must be a comma separated list of integers, got {args.pb_sizes!r}") from None
    config = SolverConfig.from_settings(heuristic=args.heuristic, engine=args.engine)
    options = SuiteOptions(
        max_n=args.max_n,
        pb_sizes=pb_sizes,
        timeout_s=args.timeout_s,
        count=args.count,
        seed=args.seed,
        config=config,
    )
    df = run_suite(args.suite, options)
    print(df.to_string(index=False))
    if args.csv:
        df.to_csv(args.csv, index=False)
        logging.info(f"Wrote {len(df)} rows to {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pbsat", description="Pseudo-Boolean satisfiability solver")
    commands = parser.add_subparsers(dest="command", required=True)

    solve_parser = commands.add_parser("solve", help="decide a DIMACS or OPB instance")
    solve_parser.add_argument("file", help="instance file, '-' for stdin")
    solve_parser.add_argument("--heuristic", choices=HEURISTICS)
    solve_parser.add_argument("--engine", choices=ENGINES)
    solve_parser.add_argument("--relevance-bound", type=int)
    solve_parser.add_argument("--length-bound", type=int)
    solve_parser.add_argument("--db-policy", choices=DB_POLICIES)
    solve_parser.add_argument("--preprocess", action="store_true", help="strengthen by probing before search")
    solve_parser.add_argument("--probe-depth", type=int, choices=(1, 2))
    solve_parser.add_argument("--seed", type=int)
    solve_parser.add_argument("--max-decisions", type=int)
    solve_parser.add_argument("--max-conflicts", type=int)
    solve_parser.add_argument("--timeout-s", type=float)
    solve_parser.add_argument("--stats", action="store_true", help="print every statistic")
    solve_parser.add_argument("--portfolio", type=int, default=1, help="number of diversified threads")
    solve_parser.set_defaults(handler=cmd_solve)

    gen_parser = commands.add_parser("gen", help="write a benchmark instance")
    gen_parser.add_argument("family", choices=FAMILIES)
    gen_parser.add_argument("params", nargs="*", help="family parameters")
    gen_parser.add_argument("--format", choices=("cnf", "opb"))
    gen_parser.add_argument("-o", "--output", help="output file, stdout by default")
    gen_parser.add_argument("--nodes", type=int, default=10, help="tseitin: random 3-regular graph size")
    gen_parser.add_argument("--degree", type=int, default=3)
    gen_parser.add_argument("--seed", type=int, default=0)
    gen_parser.add_argument("--even", action="store_true", help="tseitin: satisfiable zero charge")
    gen_parser.set_defaults(handler=cmd_gen)

    verify_parser = commands.add_parser("verify", help="check a model against an instance")
    verify_parser.add_argument("file")
    verify_parser.add_argument("model", help="signed integers or solver output")
    verify_parser.set_defaults(handler=cmd_verify)

    bench_parser = commands.add_parser("bench", help="run a benchmark suite")
    bench_parser.add_argument("suite", choices=SUITES)
    bench_parser.add_argument("--max-n", type=int, default=8)
    bench_parser.add_argument("--pb-sizes", default="8,20,50")
    bench_parser.add_argument("--timeout-s", type=float, default=60.0)
    bench_parser.add_argument("--count", type=int, default=20)
    bench_parser.add_argument("--seed", type=int, default=0)
    bench_parser.add_argument("--heuristic", choices=HEURISTICS)
    bench_parser.add_argument("--engine", choices=ENGINES)
    bench_parser.add_argument("--csv", help="also write the table to this CSV file")
    bench_parser.set_defaults(handler=cmd_bench)
    return parser


# Main function
def main(argv: list[str] | None = None) -> int:
    try:
        # Set logging configuration
        settings = get_settings()
        logging.basicConfig(
            level=settings.log_level,
            stream=sys.stderr,
            format="c %(levelname)s %(name)s: %(message)s",
        )

        args = build_parser().parse_args(argv)
        return args.handler(args)
    except (PBSatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


# Run the main function
if __name__ == "__main__":
    sys.exit(main())
