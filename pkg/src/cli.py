#%%
import argparse
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import find_dotenv, load_dotenv
from loguru import logger
from tabulate import tabulate

from anonet.compiler import LevelSetError
from anonet.engine import ProtocolViolation
from anonet.graph import GraphSpecError, build_graph
from anonet.verification import OracleDisagreement
from scenario_config import ScenarioError
from sweep_runner import SweepRunner

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROTOCOL = 2
EXIT_ORACLE = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1 like every other input error."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Seed for generated initial values.')
    common.add_argument('--max-rounds', type=int, default=None, help='Round limit for every run.')
    common.add_argument('--out', default=None, help='Artifact directory (default: ANONET_OUT_DIR or out).')
    common.add_argument('--trace', nargs='?', const='full', default=None, choices=['full', 'outputs', 'none'],
                        help='Write a round-by-round trace (default level: full).')

    parser = _Parser(
        prog='anonet', description='Simulate anonymous automata computing functions of node values.')
    verbs = parser.add_subparsers(dest='verb', required=True)

    run = verbs.add_parser('run', parents=[common], help='Run a scenario and check it against its oracle.')
    run.add_argument('scenario')

    sweep = verbs.add_parser('sweep', parents=[common], help='Run a scenario over parameter ranges.')
    sweep.add_argument('scenario')
    sweep.add_argument('ranges', nargs='*', help='Ranges such as n=2-12 seed=0-19 K=5.')
    sweep.add_argument('--jobs', type=int, default=1, help='Worker processes.')

    verify = verbs.add_parser('verify', parents=[common], help='Print the oracle verdict only.')
    verify.add_argument('scenario')

    gen_graph = verbs.add_parser('gen-graph', parents=[common], help='Print the port table of a graph.')
    gen_graph.add_argument('graph', help="Graph description, e.g. 'ring:5' or 'random:10:4:1'.")
    return parser


def parse_ranges(items: List[str]) -> Dict[str, str]:
    ranges = {}
    for item in items:
        if '=' not in item:
            raise ScenarioError(f'range {item!r} is not of the form key=values')
        key, value = item.split('=', 1)
        ranges[key.strip()] = value.strip()
    return ranges


def configure_logging():
    load_dotenv(find_dotenv(usecwd=True))
    logger.remove()
    logger.add(sys.stderr, level=os.getenv('ANONET_LOG_LEVEL', 'INFO'),
               format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}")


def _run(args, runner: SweepRunner) -> int:
    outcome, report = runner.process_scenario(args.scenario, seed=args.seed, trace=args.trace,
                                              max_rounds=args.max_rounds)
    print(tabulate(runner.outputs_frame(outcome), headers='keys', tablefmt='github', showindex=False))
    summary = runner.summary(outcome, report)
    print(tabulate(summary.items(), tablefmt='plain'))
    return EXIT_OK


def _sweep(args, runner: SweepRunner) -> int:
    scenario = runner.load_scenario(args.scenario)
    ranges = parse_ranges(args.ranges)
    if args.seed is not None:
        ranges.setdefault('seed', args.seed)
    if args.max_rounds is not None:
        ranges.setdefault('max_rounds', args.max_rounds)
    results = runner.sweep(scenario, ranges, jobs=args.jobs)
    print(runner.report_table(results))
    print(tabulate(runner.aggregate(results).items(), tablefmt='plain'))
    runner.save_sweep(scenario, results)
    return EXIT_OK


def _verify(args, runner: SweepRunner) -> int:
    scenario = runner.load_scenario(args.scenario)
    print(tabulate(runner.oracle_only(scenario, seed=args.seed).items(), tablefmt='plain'))
    return EXIT_OK


def _gen_graph(args, runner: SweepRunner) -> int:
    graph = build_graph(args.graph)
    table = graph.port_table()
    print(tabulate(table, headers='keys', tablefmt='github', showindex=False))
    print(f'n: {graph.n}  diameter: {graph.diameter()}')
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = Path(args.out) / f"{args.graph.replace(':', '_')}.csv"
        table.to_csv(path, index=False)
        logger.info(f'port table written to {path}')
    return EXIT_OK


VERBS = {'run': _run, 'sweep': _sweep, 'verify': _verify, 'gen-graph': _gen_graph}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        runner = SweepRunner(out_dir=args.out, max_rounds=args.max_rounds)
        return VERBS[args.verb](args, runner)
    except (ScenarioError, GraphSpecError, LevelSetError) as exc:
        print(f'anonet: error: {type(exc).__name__}: {exc}', file=sys.stderr)
        return EXIT_USAGE
    except ProtocolViolation as exc:
        print(f'anonet: error: ProtocolViolation: {exc}', file=sys.stderr)
        return EXIT_PROTOCOL
    except OracleDisagreement as exc:
        print(f'anonet: error: OracleDisagreement: {exc}', file=sys.stderr)
        return EXIT_ORACLE

# %%
if __name__ == '__main__':
    sys.exit(main())
