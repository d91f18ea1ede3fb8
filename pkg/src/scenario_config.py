# %%
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import yaml
from dotenv import find_dotenv, load_dotenv
from loguru import logger

from anonet.graph import GraphSpecError, build_graph, resize

PROTOCOLS = ('average', 'max_track', 'min_track', 'frequency', 'proportions', 'compiled')
TRACE_LEVELS = ('none', 'outputs', 'full')


@dataclass(frozen=True)
class Scenario:
    """
    One simulation run as described by a .scn file.

    Attributes:
        name: Directory name for the artifacts.
        graph: Graph description accepted by build_graph.
        K: Largest initial value.
        inputs: Explicit initial values, or None to draw them from `generator`.
        generator: 'uniform' (values 0..K) or 'binary' (values 0..1).
        protocol: One of PROTOCOLS.
        spec: Level-set source for 'compiled' (a .lvl path or 'builtin:<name>').
        target: Counted value for 'frequency'.
        schedule: (round, node, value) input changes for the trackers.
        max_rounds, h_max, m_max: Limits. h_max and m_max default to n.
        check_oracle: Compare the run against its centralized oracle.
        trace: One of TRACE_LEVELS.
        seed: Seed of the input generator.
        sweep: Parameter ranges for the sweep verb, e.g. {'n': '2-12', 'seed': '0-19'}.
        check: 'run', 'replication' or 'equivariance'; what the sweep exercises.
        base_dir: Directory of the scenario file, for relative spec paths.
    """
    name: str
    graph: Any
    K: int
    protocol: str
    inputs: Optional[List[int]] = None
    generator: str = 'uniform'
    spec: Optional[str] = None
    target: int = 1
    schedule: List[tuple] = field(default_factory=list)
    max_rounds: Optional[int] = None
    h_max: Optional[int] = None
    m_max: Optional[int] = None
    check_oracle: bool = True
    trace: str = 'none'
    seed: int = 0
    sweep: Dict[str, Any] = field(default_factory=dict)
    check: str = 'run'
    base_dir: Path = Path('.')


# %%
class ScenarioConfig:
    """
    Loads the environment and scenario files.
    """
    def __init__(self, out_dir: str = None, max_rounds: int = None, coverage_bound: int = None):
        """
        Initialize the configuration.

        Args:
            out_dir (str, optional): Artifact root. If None, loads ANONET_OUT_DIR (default 'out').
            max_rounds (int, optional): Round limit when a scenario sets none.
                                        If None, loads ANONET_MAX_ROUNDS (default 20000).
            coverage_bound (int, optional): Denominator bound of the level-set coverage check.
                                            If None, loads ANONET_COVERAGE_BOUND (default 12).
        """
        env_path = find_dotenv(usecwd=True)
        logger.debug(f'Found .env file at: {env_path or "(none)"}')
        load_dotenv(env_path)
        self.out_dir = Path(out_dir if out_dir else os.getenv('ANONET_OUT_DIR', 'out'))
        self.max_rounds = int(max_rounds if max_rounds else os.getenv('ANONET_MAX_ROUNDS', 20000))
        self.coverage_bound = int(coverage_bound if coverage_bound else os.getenv('ANONET_COVERAGE_BOUND', 12))

    def load_scenario(self, path) -> Scenario:
        """
        Reads a YAML scenario file.

        Args:
            path: Path to the .scn file.

        Returns:
            Scenario: The validated scenario.
        """
        path = Path(path)
        if not path.exists():
            raise ScenarioError(f'scenario file not found: {path}')
        try:
            data = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ScenarioError(f'{path}: {exc}') from exc
        if not isinstance(data, dict):
            raise ScenarioError(f'{path}: expected a mapping of scenario keys')
        data.setdefault('name', path.stem)
        return self.parse_scenario(data, base_dir=path.parent)

    def parse_scenario(self, data: Dict[str, Any], base_dir: Path = Path('.')) -> Scenario:
        known = {'name', 'graph', 'K', 'inputs', 'protocol', 'spec', 'target', 'schedule',
                 'limits', 'check_oracle', 'trace', 'seed', 'sweep', 'check'}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f'unknown scenario keys: {sorted(unknown)}')
        for key in ('graph', 'K', 'protocol'):
            if key not in data:
                raise ScenarioError(f'missing scenario key {key!r}')
        protocol = data['protocol']
        if protocol not in PROTOCOLS:
            raise ScenarioError(f'protocol must be one of {PROTOCOLS}, got {protocol!r}')
        if protocol == 'compiled' and not data.get('spec'):
            raise ScenarioError("protocol 'compiled' needs a 'spec'")

        inputs, generator, seed = data.get('inputs'), 'uniform', int(data.get('seed', 0))
        if isinstance(inputs, dict):
            generator = inputs.get('generator', 'uniform')
            seed = int(inputs.get('seed', seed))
            inputs = None
        if generator not in ('uniform', 'binary'):
            raise ScenarioError(f'unknown input generator {generator!r}')

        limits = data.get('limits') or {}
        for key, value in limits.items():
            if key not in ('max_rounds', 'h_max', 'm_max'):
                raise ScenarioError(f'unknown limit {key!r}')

        trace = data.get('trace', 'none')
        if trace not in TRACE_LEVELS:
            raise ScenarioError(f'trace must be one of {TRACE_LEVELS}, got {trace!r}')
        schedule = [tuple(int(v) for v in change) for change in data.get('schedule') or []]
        if any(len(change) != 3 for change in schedule):
            raise ScenarioError('schedule entries must be [round, node, value]')

        scenario = Scenario(
            name=str(data.get('name', 'scenario')), graph=data['graph'], K=int(data['K']),
            protocol=protocol, inputs=None if inputs is None else [int(v) for v in inputs],
            generator=generator, spec=data.get('spec'), target=int(data.get('target', 1)),
            schedule=schedule, max_rounds=limits.get('max_rounds'), h_max=limits.get('h_max'),
            m_max=limits.get('m_max'), check_oracle=bool(data.get('check_oracle', True)),
            trace=trace, seed=seed, sweep=dict(data.get('sweep') or {}),
            check=data.get('check', 'run'), base_dir=Path(base_dir))
        self.validate_scenario(scenario)
        return scenario

    def validate_scenario(self, scenario: Scenario):
        if scenario.K < 1:
            raise ScenarioError(f'alphabet needs K >= 1, got {scenario.K}')
        if scenario.check not in ('run', 'replication', 'equivariance'):
            raise ScenarioError(f'unknown check {scenario.check!r}')
        for key in ('max_rounds', 'h_max', 'm_max'):
            value = getattr(scenario, key)
            if value is not None and int(value) < 1:
                raise ScenarioError(f'limit {key} must be positive, got {value}')
        if scenario.inputs is not None:
            bad = [v for v in scenario.inputs if not 0 <= v <= scenario.K]
            if bad:
                raise ScenarioError(f'initial values {bad} outside 0..{scenario.K}')
            n = build_graph(scenario.graph).n
            if len(scenario.inputs) != n:
                raise ScenarioError(f'{len(scenario.inputs)} initial values for a graph with {n} nodes')
        for _, node, value in scenario.schedule:
            if not 0 <= value <= scenario.K:
                raise ScenarioError(f'scheduled input {value} for node {node} outside 0..{scenario.K}')

    def initial_values(self, scenario: Scenario, n: int, seed: Optional[int] = None) -> List[int]:
        """Explicit inputs, or a seeded draw of n values."""
        if scenario.inputs is not None:
            return list(scenario.inputs)
        rng = np.random.default_rng(scenario.seed if seed is None else seed)
        high = 1 if scenario.generator == 'binary' else scenario.K
        return [int(v) for v in rng.integers(0, high + 1, size=n)]

    @staticmethod
    def expand_range(value) -> List[Any]:
        """
        Expands '2-12' into [2, ..., 12] and '1,3,5' into [1, 3, 5]; lists and
        scalars pass through.
        """
        if isinstance(value, list):
            return value
        if isinstance(value, int):
            return [value]
        text = str(value).strip()
        if ',' in text:
            return [item for part in text.split(',') for item in ScenarioConfig.expand_range(part)]
        if '-' in text:
            start, end = text.split('-', 1)
            try:
                return list(range(int(start), int(end) + 1))
            except ValueError as exc:
                raise ScenarioError(f'bad range {text!r}') from exc
        try:
            return [int(text)]
        except ValueError:
            return [text]

    def expand_sweep_rows(self, scenario: Scenario, ranges: Dict[str, Any] = None) -> pd.DataFrame:
        """
        Expands every range of the sweep into the cartesian product of runs,
        one row per run.

        Args:
            scenario (Scenario): Base scenario; its 'sweep' section supplies the defaults.
            ranges (dict, optional): Ranges overriding the scenario's.

        Returns:
            pd.DataFrame: One column per swept parameter.
        """
        merged = dict(scenario.sweep)
        merged.update(ranges or {})
        if not merged:
            return pd.DataFrame([{'seed': scenario.seed}])
        allowed = {'n', 'K', 'seed', 'h_max', 'm_max', 'm', 'k', 'max_rounds'}
        unknown = set(merged) - allowed
        if unknown:
            raise ScenarioError(f'cannot sweep {sorted(unknown)}; allowed: {sorted(allowed)}')
        keys = sorted(merged)
        index = pd.MultiIndex.from_product([self.expand_range(merged[key]) for key in keys], names=keys)
        return index.to_frame(index=False)

    def scenario_for_row(self, scenario: Scenario, row: Dict[str, Any]) -> Scenario:
        """Applies one sweep row to the base scenario and validates the result."""
        changes = {}
        for key in ('K', 'h_max', 'm_max', 'max_rounds', 'seed'):
            if key in row:
                changes[key] = int(row[key])
        if 'n' in row:
            try:
                changes['graph'] = resize(scenario.graph, int(row['n']))
            except GraphSpecError as exc:
                raise ScenarioError(f'cannot sweep n: {exc}') from exc
            changes['inputs'] = None
        variant = replace(scenario, **changes)
        self.validate_scenario(variant)
        return variant


class ScenarioError(ValueError):
    """
    A scenario file that cannot be parsed or violates its own limits.
    """

# %%

if __name__ == '__main__':

    config = ScenarioConfig()
    scenario = config.load_scenario(Path(__file__).parent.parent / 'scenarios' / 'averaging_sweep.scn')
    print(scenario)
    print(config.expand_sweep_rows(scenario))

# %%
