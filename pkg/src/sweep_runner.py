#%%
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd
from loguru import logger
from tabulate import tabulate

from anonet.engine import ProtocolViolation
from anonet.graph import build_graph
from anonet.verification import check_equivariance, check_replication
from scenario_config import Scenario, ScenarioError
from scenario_verified import VerifiedScenarioRunner

# Rounds compared by the replication and equivariance checks.
CHECK_ROUNDS = 60


# %%
class SweepRunner(VerifiedScenarioRunner):
    """
    A VerifiedScenarioRunner that runs a scenario over the cartesian product
    of parameter ranges and aggregates the verdicts.
    """

    def __init__(self, out_dir: str = None, max_rounds: int = None, coverage_bound: int = None,
                 log_file: str = None):
        """
        Initialize the SweepRunner.
        """
        super().__init__(out_dir=out_dir, max_rounds=max_rounds, coverage_bound=coverage_bound)
        self.log_file = log_file if log_file else os.getenv('ANONET_LOG_FILE')

        # Configure loguru logger
        if self.log_file:
            logger.add(
                self.log_file,
                rotation="100 MB",  # Rotate file when it reaches 100MB
                retention="1 week",  # Keep logs for 1 week
                format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}",
                level=os.getenv('ANONET_LOG_LEVEL', 'INFO')
            )

    def run_row(self, scenario: Scenario, row: Dict[str, Any]) -> Dict[str, Any]:
        """
        Runs one point of the sweep. Failures are recorded in the returned
        record instead of being raised.
        """
        record = {key: (int(value) if isinstance(value, (int, np.integer)) else value)
                  for key, value in row.items()}
        try:
            if scenario.check == 'replication':
                report, n, rounds, quiescent = self._replication_row(scenario, record)
            elif scenario.check == 'equivariance':
                report, n, rounds, quiescent = self._equivariance_row(scenario, record)
            else:
                variant = self.scenario_for_row(scenario, record)
                outcome, report = self.run_verified(variant, save=False)
                n, rounds, quiescent = outcome.setup.graph.n, outcome.result.rounds, outcome.result.quiescent
        # ScenarioError, GraphSpecError and LevelSetError are ValueErrors.
        except (ProtocolViolation, ValueError) as exc:
            logger.error(f'{scenario.name} {record}: {exc}')
            record.update({'n': None, 'rounds': None, 'quiescent': False, 'agree': False,
                           'violation': f'{type(exc).__name__}: {exc}'})
            return record
        record.update({
            'n': n,
            'rounds': rounds,
            'quiescent': quiescent,
            'agree': bool(report.agree) if report is not None else None,
            'violation': report.violations[0] if report is not None and report.violations else '',
        })
        return record

    def _replication_row(self, scenario: Scenario, record: Dict[str, Any]):
        m, k = int(record['m']), int(record['k'])
        if m < 2 or k < 1:
            raise ScenarioError(f'replication needs m >= 2 and k >= 1, got m={m}, k={k}')
        variant = self.scenario_for_row(scenario, record)
        x = self.initial_values(variant, m) if variant.inputs is None else list(variant.inputs)[:m]
        # Both rings must run the same automata, so the caps are fixed by the larger ring.
        protocol, _ = self.build_protocol(variant, h_max=int(variant.h_max or k * m),
                                          m_max=int(variant.m_max or k * m))
        rounds = int(variant.max_rounds or CHECK_ROUNDS)
        report = check_replication(protocol, x, k, rounds=rounds)
        return report, k * m, rounds, None

    def _equivariance_row(self, scenario: Scenario, record: Dict[str, Any]):
        variant = self.scenario_for_row(scenario, record)
        graph = build_graph(variant.graph)
        x = self.initial_values(variant, graph.n)
        permutation = [int(v) for v in np.random.default_rng(variant.seed).permutation(graph.n)]
        protocol, _ = self.build_protocol(variant, h_max=int(variant.h_max or graph.n),
                                          m_max=int(variant.m_max or graph.n))
        rounds = int(variant.max_rounds or CHECK_ROUNDS)
        report = check_equivariance(protocol, graph, x, permutation, rounds=rounds)
        return report, graph.n, rounds, None

    def sweep(self, scenario: Scenario, ranges: Dict[str, Any] = None, jobs: int = 1) -> pd.DataFrame:
        """
        Runs every row of the expanded sweep.

        Args:
            scenario (Scenario): Base scenario.
            ranges (dict, optional): Parameter ranges overriding the scenario's sweep section.
            jobs (int): Worker processes; 1 runs in this process.

        Returns:
            pd.DataFrame: One row per run with its verdict.
        """
        rows = self.expand_sweep_rows(scenario, ranges).to_dict('records')
        logger.info(f'{scenario.name}: sweeping {len(rows)} runs with {jobs} job(s)')
        if jobs > 1:
            payloads = [(str(self.out_dir), self.max_rounds, self.coverage_bound, scenario, row) for row in rows]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                records = list(pool.map(_sweep_worker, payloads))
        else:
            records = [self.run_row(scenario, row) for row in rows]
        return pd.DataFrame(records)

    def aggregate(self, results: pd.DataFrame) -> Dict[str, Any]:
        """Pass/fail counts and the slowest run."""
        rounds = results['rounds'].dropna()
        return {
            'runs': len(results),
            'passed': int((results['agree'] == True).sum()),  # noqa: E712
            'failed': int((results['agree'] != True).sum()),  # noqa: E712
            'max_rounds_to_quiescence': int(rounds.max()) if not rounds.empty else None,
        }

    def report_table(self, results: pd.DataFrame) -> str:
        return tabulate(results, headers='keys', tablefmt='github', showindex=False)

    def save_sweep(self, scenario: Scenario, results: pd.DataFrame, path_to_save: Path = None) -> Path:
        sweep_dir = Path(path_to_save or self.out_dir) / scenario.name
        sweep_dir.mkdir(parents=True, exist_ok=True)
        results.to_csv(sweep_dir / 'sweep.csv', index=False)
        with open(sweep_dir / 'summary.txt', 'w') as f:
            for key, value in self.aggregate(results).items():
                f.write(f"{key}: {value}\n")
        return sweep_dir


_worker_runner = None


def _sweep_worker(payload):
    global _worker_runner
    out_dir, max_rounds, coverage_bound, scenario, row = payload
    if _worker_runner is None:
        _worker_runner = SweepRunner(out_dir=out_dir, max_rounds=max_rounds, coverage_bound=coverage_bound)
    return _worker_runner.run_row(scenario, row)

# %%
if __name__ == '__main__':

    scenarios = Path(__file__).parent.parent / 'scenarios'
    runner = SweepRunner()
    for name in ['averaging_sweep', 'replication_sweep', 'undersized_hops']:
        try:
            scenario = runner.load_scenario(scenarios / f'{name}.scn')
            logger.info(f"Sweeping scenario: {name}")
            results = runner.sweep(scenario)
            print(runner.report_table(results))
            print(runner.aggregate(results))
            runner.save_sweep(scenario, results)
        except Exception as e:
            logger.error(f"Error sweeping {name}: {str(e)}")

# %%
