from anonet.averaging import AveragingProtocol, IntervalValue
from anonet.compiler import (CompiledProtocol, CoverageError, IntegerComparison, LevelSetError,
                             LevelSetSpec, ProportionVector, RationalInequality, compile_level_set,
                             decide_comparison, encode_local, normalize_inequality, quantize_continuous)
from anonet.engine import (EMPTY, AutomatonState, InputSchedule, ProductProtocol, ProtocolViolation,
                           run_until_quiescent, simulate, step)
from anonet.extrema import ExtremaProtocol
from anonet.frequency import DEFAULT, FrequencyProtocol, ProportionProtocol, frequency_transition, schedule_index
from anonet.graph import GraphSpecError, PortLabeledGraph, apply_isomorphism, build_graph
from anonet.levelset import load_level_set, parse_level_set
from anonet.verification import (OracleDisagreement, OracleReport, check_equivariance, check_replication,
                                 oracle_average, oracle_evaluate, oracle_proportions)

__all__ = ['AveragingProtocol', 'IntervalValue', 'CompiledProtocol', 'CoverageError', 'IntegerComparison',
           'LevelSetError', 'LevelSetSpec', 'ProportionVector', 'RationalInequality', 'compile_level_set',
           'decide_comparison', 'encode_local', 'normalize_inequality', 'quantize_continuous', 'EMPTY',
           'AutomatonState', 'InputSchedule', 'ProductProtocol', 'ProtocolViolation', 'run_until_quiescent',
           'simulate', 'step', 'ExtremaProtocol', 'DEFAULT', 'FrequencyProtocol', 'ProportionProtocol',
           'frequency_transition', 'schedule_index', 'GraphSpecError', 'PortLabeledGraph', 'apply_isomorphism', 'build_graph',
           'load_level_set', 'parse_level_set', 'OracleDisagreement', 'OracleReport', 'check_equivariance',
           'check_replication', 'oracle_average', 'oracle_evaluate', 'oracle_proportions']
