#%%
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import pandas as pd
from loguru import logger

from anonet.averaging import AveragingProtocol, pebbles_held
from anonet.compiler import LevelSetSpec, compile_level_set
from anonet.engine import InputSchedule, Protocol, RunResult, run_until_quiescent
from anonet.extrema import ExtremaProtocol, state_size_audit
from anonet.frequency import FrequencyProtocol, ProportionProtocol
from anonet.graph import PortLabeledGraph, build_graph
from anonet.levelset import load_level_set
from scenario_config import Scenario, ScenarioConfig, ScenarioError


def format_value(value) -> str:
    """Rationals as 'num/den', everything else through str."""
    if isinstance(value, Fraction):
        return f'{value.numerator}/{value.denominator}'
    return str(value)


@dataclass
class RunSetup:
    """Everything a run needs, resolved from a Scenario."""
    scenario: Scenario
    graph: PortLabeledGraph
    x: List[int]
    protocol: Protocol
    schedule: Optional[InputSchedule]
    h_max: int
    m_max: int
    spec: Optional[LevelSetSpec] = None


@dataclass
class RunOutcome:
    setup: RunSetup
    result: RunResult
    trace: Optional[pd.DataFrame] = None
    audits: Dict[str, Any] = field(default_factory=dict)


class TraceRecorder:
    """
    Round observer collecting one record per round ('outputs') or one per
    node and round ('full').
    """

    def __init__(self, level: str):
        self.level = level
        self.rows: List[Dict[str, Any]] = []

    def __call__(self, config):
        if self.level == 'outputs':
            row = {'round': config.round}
            row.update({f'y{i}': format_value(state.y) for i, state in enumerate(config.states)})
            self.rows.append(row)
        elif self.level == 'full':
            for i, state in enumerate(config.states):
                self.rows.append({'round': config.round, 'node': i, 'y': format_value(state.y),
                                  'z': repr(state.z), 'm': repr(state.m)})

    def frame(self) -> Optional[pd.DataFrame]:
        if self.level == 'none':
            return None
        return pd.DataFrame(self.rows)


#%%
class ScenarioRunner(ScenarioConfig):

    def __init__(self, out_dir: str = None, max_rounds: int = None, coverage_bound: int = None):
        super().__init__(out_dir=out_dir, max_rounds=max_rounds, coverage_bound=coverage_bound)

    def load_spec(self, scenario: Scenario) -> LevelSetSpec:
        source = scenario.spec
        if not str(source).startswith('builtin:'):
            source = scenario.base_dir / source
        spec = load_level_set(source)
        if spec.K != scenario.K:
            raise ScenarioError(f'spec {scenario.spec} is over 0..{spec.K}, scenario alphabet is 0..{scenario.K}')
        return spec

    def build_protocol(self, scenario: Scenario, h_max: int, m_max: int):
        """Returns (protocol, spec) for the scenario's protocol selector."""
        if scenario.protocol == 'average':
            return AveragingProtocol(cap=scenario.K, h_max=h_max), None
        if scenario.protocol == 'max_track':
            return ExtremaProtocol(h_max=h_max, kind='max'), None
        if scenario.protocol == 'min_track':
            return ExtremaProtocol(h_max=h_max, kind='min', cap=scenario.K), None
        if scenario.protocol == 'frequency':
            return FrequencyProtocol(m_max, target=scenario.target, h_max=h_max), None
        if scenario.protocol == 'proportions':
            return ProportionProtocol(scenario.K, m_max, h_max=h_max), None
        spec = self.load_spec(scenario)
        return compile_level_set(spec, h_max=h_max, coverage_bound=self.coverage_bound), spec

    def build(self, scenario: Scenario, seed: Optional[int] = None) -> RunSetup:
        """
        Resolves graph, initial values and protocol. The harness knows n and
        sets H_max and M_max from it unless the scenario fixes them; the
        automata never see n.
        """
        graph = build_graph(scenario.graph)
        n = graph.n
        x = self.initial_values(scenario, n, seed)
        h_max = int(scenario.h_max or n)
        m_max = int(scenario.m_max or n)
        if h_max < n:
            logger.warning(f'H_max={h_max} is below n={n}; extrema may not propagate')
        schedule = None
        if scenario.schedule:
            if scenario.protocol not in ('max_track', 'min_track'):
                raise ScenarioError('input schedules only drive the max_track and min_track protocols')
            schedule = InputSchedule(tuple(x), tuple(scenario.schedule))
            if any(not 0 <= node < n for _, node, _ in schedule.changes):
                raise ScenarioError(f'schedule names a node outside 0..{n - 1}')
        protocol, spec = self.build_protocol(scenario, h_max, m_max)
        return RunSetup(scenario, graph, x, protocol, schedule, h_max, m_max, spec)

    def run(self, setup: RunSetup, trace: str = None, max_rounds: int = None,
            observers: List[Callable] = ()) -> RunOutcome:
        """
        Runs the setup to quiescence or to the round limit.

        Args:
            setup (RunSetup): Resolved scenario.
            trace (str, optional): Overrides the scenario's trace level.
            max_rounds (int, optional): Overrides the scenario's round limit.
            observers: Extra round observers (audits).

        Returns:
            RunOutcome: The result and the recorded trace.
        """
        recorder = TraceRecorder(trace or setup.scenario.trace)
        watchers = [recorder, *observers]

        def observe(config):
            for watcher in watchers:
                watcher(config)

        limit = int(max_rounds or setup.scenario.max_rounds or self.max_rounds)
        result = run_until_quiescent(setup.graph, setup.protocol, setup.x, limit,
                                     schedule=setup.schedule, observer=observe)
        if not result.quiescent:
            logger.warning(f'{setup.scenario.name}: no fixed point within {limit} rounds')
        outcome = RunOutcome(setup, result, recorder.frame())
        if isinstance(setup.protocol, ExtremaProtocol):
            outcome.audits['state_size'] = state_size_audit(setup.graph, setup.scenario.K + 1, setup.h_max)
        return outcome

    def outputs_frame(self, outcome: RunOutcome) -> pd.DataFrame:
        setup, result = outcome.setup, outcome.result
        frame = pd.DataFrame({
            'node': range(setup.graph.n),
            'degree': setup.graph.degrees(),
            'x': setup.x,
            'y': [format_value(y) for y in result.outputs],
        })
        if setup.schedule is not None:
            frame['u'] = setup.schedule.final()
        if isinstance(setup.protocol, AveragingProtocol):
            frame['u'] = pebbles_held(result.final)
        return frame

    def summary(self, outcome: RunOutcome, report=None) -> Dict[str, Any]:
        setup, result = outcome.setup, outcome.result
        summary = {
            'scenario': setup.scenario.name,
            'protocol': setup.protocol.name,
            'graph': setup.scenario.graph,
            'n': setup.graph.n,
            'K': setup.scenario.K,
            'h_max': setup.h_max,
            'm_max': setup.m_max,
            'x': ' '.join(str(v) for v in setup.x),
            'outputs': ' '.join(format_value(y) for y in result.outputs),
            'quiescent': result.quiescent,
            'rounds': result.rounds,
        }
        for name, audit in outcome.audits.items():
            for key, value in (audit.items() if isinstance(audit, dict) else [('', audit)]):
                summary[f'{name}.{key}' if key else name] = value
        if report is not None:
            summary['oracle'] = format_value(report.expected)
            summary['oracle_agree'] = report.agree
            if report.violations:
                summary['first_violation'] = report.violations[0]
        return summary

    def save_run(self, outcome: RunOutcome, report=None, path_to_save: Path = None) -> Path:
        """Save the outputs, the trace and the summary to <out>/<scenario>/.

        Args:
            outcome: The finished run
            report: Oracle report, if one was computed
            path_to_save: Artifact root. Defaults to the configured out directory
        """
        run_dir = Path(path_to_save or self.out_dir) / outcome.setup.scenario.name
        run_dir.mkdir(parents=True, exist_ok=True)

        self.outputs_frame(outcome).to_csv(run_dir / 'outputs.csv', index=False)
        if outcome.trace is not None:
            outcome.trace.to_csv(run_dir / 'trace.csv', index=False)
        with open(run_dir / 'summary.txt', 'w') as f:
            for key, value in self.summary(outcome, report).items():
                f.write(f"{key}: {value}\n")

        logger.info(f'{outcome.setup.scenario.name}: artifacts written to {run_dir}')
        return run_dir

# %%
if __name__ == '__main__':

    runner = ScenarioRunner()
    scenario = runner.load_scenario(Path(__file__).parent.parent / 'scenarios' / 'quantized_consensus.scn')
    outcome = runner.run(runner.build(scenario))
    print(runner.outputs_frame(outcome))
    runner.save_run(outcome)

# %%
