#%%
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from loguru import logger

from anonet.averaging import AveragingProtocol
from anonet.engine import EMPTY
from anonet.extrema import ExtremaProtocol
from anonet.frequency import FrequencyProtocol
from anonet.verification import (AveragingMonitor, OracleReport, oracle_average, oracle_evaluate,
                                 oracle_extreme, oracle_proportions, tracker_audit)
from scenario_config import Scenario, ScenarioError
from scenario_runner import RunOutcome, RunSetup, ScenarioRunner, format_value


#%%
class VerifiedScenarioRunner(ScenarioRunner):
    """
    A ScenarioRunner that checks every run against its centralized oracle.
    """

    def __init__(self, out_dir: str = None, max_rounds: int = None, coverage_bound: int = None):
        super().__init__(out_dir=out_dir, max_rounds=max_rounds, coverage_bound=coverage_bound)

    def expected_output(self, setup: RunSetup) -> Any:
        """
        Output every node should hold at quiescence.

        Args:
            setup (RunSetup): The resolved scenario.

        Returns:
            The oracle value: an IntervalValue, an extreme, a rational
            frequency, a ProportionVector or a level-set label.
        """
        scenario, x = setup.scenario, setup.x
        if scenario.protocol == 'average':
            return oracle_average(x, scenario.K)
        if scenario.protocol in ('max_track', 'min_track'):
            final = setup.schedule.final() if setup.schedule else x
            return oracle_extreme(final, 'max' if scenario.protocol == 'max_track' else 'min')
        proportions = oracle_proportions(x, scenario.K)
        if scenario.protocol == 'frequency':
            if not 0 <= scenario.target <= scenario.K:
                raise ScenarioError(f'target {scenario.target} outside 0..{scenario.K}')
            return proportions.p(scenario.target)
        if scenario.protocol == 'proportions':
            return proportions
        return oracle_evaluate(setup.spec, proportions)

    def verify(self, outcome: RunOutcome, monitor: Optional[AveragingMonitor] = None) -> OracleReport:
        """
        Compares the final outputs with the oracle and folds in the audits.
        A run passes only on exact agreement at a fixed point.

        Raises:
            ProtocolViolation: Pebbles were lost or created, a fixed point kept
                               a spread above 1, or a pointer chain is broken.
        """
        setup, result = outcome.setup, outcome.result
        expected = self.expected_output(setup)
        outputs = result.outputs
        observed = outputs[0] if len(set(outputs)) == 1 else outputs
        report = OracleReport(expected, observed)
        if not result.quiescent:
            report.add(f'quiescence: no fixed point within {result.rounds} rounds')
        if monitor is not None:
            audit = monitor.finish()
            # An unfinished run may still be spread out.
            audit.raise_for_breach(('conservation', 'spread') if result.quiescent else ('conservation',),
                                   round_index=result.rounds)
        for i, y in enumerate(outputs):
            if y != expected:
                report.add(f'output: node {i} holds {format_value(y)}, oracle {format_value(expected)}')
                break
        if isinstance(setup.protocol, ExtremaProtocol) and result.quiescent:
            final = setup.schedule.final() if setup.schedule else setup.x
            audit = tracker_audit(setup.graph, result.final, final, setup.protocol.kind)
            audit.raise_for_breach(('pointer',), round_index=result.rounds)
            for violation in audit.violations:
                report.add(violation)
        if isinstance(setup.protocol, FrequencyProtocol):
            self._check_witness(outcome, Fraction(expected), report)
        return report

    def _check_witness(self, outcome: RunOutcome, p: Fraction, report: OracleReport):
        """The settled witness m* is the least m with m * p integral, hence at most n."""
        for i, state in enumerate(outcome.result.final.states):
            witness = state.z.witness if state.z is not EMPTY else None
            if witness != p.denominator:
                report.add(f'witness: node {i} settled on m={witness}, least valid m is {p.denominator}')
                return

    def run_verified(self, scenario: Scenario, seed: Optional[int] = None, trace: str = None,
                     max_rounds: int = None, save: bool = True) -> Tuple[RunOutcome, OracleReport]:
        """
        Builds, runs, verifies and (optionally) saves one scenario.

        Returns:
            Tuple[RunOutcome, OracleReport]: The run and its verdict.
        """
        setup = self.build(scenario, seed)
        monitor = AveragingMonitor(setup.x) if isinstance(setup.protocol, AveragingProtocol) else None
        outcome = self.run(setup, trace=trace, max_rounds=max_rounds,
                           observers=[monitor] if monitor else [])
        report = self.verify(outcome, monitor) if scenario.check_oracle else None
        if save:
            self.save_run(outcome, report)
        if report is not None:
            log = logger.info if report.agree else logger.error
            log(f'{scenario.name}: oracle {format_value(report.expected)}, '
                f"{'agree' if report.agree else 'DISAGREE'} after {outcome.result.rounds} rounds")
        return outcome, report

    def oracle_only(self, scenario: Scenario, seed: Optional[int] = None) -> Dict[str, Any]:
        """The oracle verdict without running the distributed protocol."""
        setup = self.build(scenario, seed)
        proportions = oracle_proportions(setup.x, scenario.K)
        return {
            'scenario': scenario.name,
            'n': setup.graph.n,
            'x': ' '.join(str(v) for v in setup.x),
            'proportions': str(proportions),
            'oracle': format_value(self.expected_output(setup)),
        }

    def process_scenario(self, path, seed: Optional[int] = None, trace: str = None,
                         max_rounds: int = None) -> Tuple[RunOutcome, OracleReport]:
        """
        Main entry point: load, run, verify, save. Raises OracleDisagreement
        when the run does not match its oracle.
        """
        scenario = self.load_scenario(path)
        outcome, report = self.run_verified(scenario, seed=seed, trace=trace, max_rounds=max_rounds)
        if report is not None:
            report.raise_for_disagreement(scenario.name)
        return outcome, report

# %%
if __name__ == '__main__':

    scenarios = Path(__file__).parent.parent / 'scenarios'
    runner = VerifiedScenarioRunner()
    for path in sorted(scenarios.glob('*.scn')):
        scenario = runner.load_scenario(path)
        if scenario.sweep:
            continue
        outcome, report = runner.run_verified(scenario)
        print(runner.summary(outcome, report))

# %%
