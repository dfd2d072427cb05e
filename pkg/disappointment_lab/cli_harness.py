# for type references to own class
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import settings
from .customFields import BooleanField, ExtendedRealField, VectorField
from .decision_problem import Problem, load_scenario
from .deviation_lab import METHOD_AUTO, METHODS, report_curve
from .errors import ConfigError, DisappointmentLabError
from .models import Mode, PredictorKind
from .predictors import predict
from .prescriptors import convexity_certificate_at_ratio, prescription_gap_bound, prescribe
from .schedules import RegimeSchedule
from .simplex_core import Distribution, EmpiricalDistribution

logger = logging.getLogger(__name__)

CSV = "csv"
JSON = "json"
FORMATS = (CSV, JSON)

CONFIG_FIELDS = (
    'schema_version', 'scenario', 'predictors', 'schedule', 'T_list', 'method', 'n_samples', 'seed', 'mode',
    'decision', 'margin', 'empirical_counts', 'empirical_weights', 'sample_size', 'ratios', 'cap', 'out', 'format'
)

PREDICT_COLUMNS = (
    'schema_version', 'decision', 'decision_index', 'predictor', 'T', 'a_T', 'value', 'worst_case', 'dual_alpha',
    'condition_ok'
)
PRESCRIBE_COLUMNS = (
    'schema_version', 'predictor', 'T', 'a_T', 'decision', 'decision_index', 'value', 'gap_lower', 'gap_upper'
)
DISAPPOINT_COLUMNS = (
    'schema_version', 'T', 'a_T', 'predictor', 'mode', 'decision', 'method', 'probability', 'log_probability',
    'rate', 'std_err', 'n_samples', 'effective_sample_size', 'margin'
)
CONVEXITY_COLUMNS = ('schema_version', 'ratio', 'a_T', 'threshold_ok', 'midpoint_violations')

_real = ExtendedRealField()
_vector = VectorField()
_boolean = BooleanField()
COLUMN_FIELDS = {
    'a_T': _real, 'value': _real, 'dual_alpha': _real, 'gap_lower': _real, 'gap_upper': _real,
    'probability': _real, 'log_probability': _real, 'rate': _real, 'std_err': _real,
    'effective_sample_size': _real, 'margin': _real, 'ratio': _real,
    'worst_case': _vector,
    'condition_ok': _boolean, 'threshold_ok': _boolean,
}


@dataclass(frozen=True)
class PredictorSpec:
    """A predictor to run, optionally with its own schedule instead of the experiment one"""
    kind: PredictorKind
    schedule: Optional[RegimeSchedule] = None

    @classmethod
    def from_input(cls, value) -> PredictorSpec:
        if type(value) is dict:
            unknown = sorted(set(value) - {'kind', 'schedule'})
            if unknown or 'kind' not in value:
                raise ConfigError(f"a predictor entry needs <kind> and at most <schedule>, got {value}",
                                  field='predictors')
            schedule = RegimeSchedule.from_spec(value['schedule']) if value.get('schedule') is not None else None
            return cls(PredictorKind.parse(value['kind']), schedule)
        return cls(PredictorKind.parse(value))


def _positive_int(value, name):
    if type(value) is bool or not isinstance(value, int) or value < 1:
        raise ConfigError(f"field <{name}> must be a positive integer, got <{value}>", field=name)
    return value


def _int_list(values, name):
    if type(values) is not list:
        raise ConfigError(f"field <{name}> must be a list, got <{values}>", field=name)
    return [_positive_int(value, name) for value in values]


def _count_list(values, name):
    if type(values) is not list or any(type(value) is not int or value < 0 for value in values):
        raise ConfigError(f"field <{name}> must be a list of nonnegative integers, got <{values}>", field=name)
    return values


def _real_list(values, name):
    if type(values) is not list:
        raise ConfigError(f"field <{name}> must be a list, got <{values}>", field=name)
    return [float(_real.from_input(value, name)) for value in values]


@dataclass
class ExperimentConfig:
    """
    Everything a CLI run needs, read from a versioned JSON config file and overridden by flags

    Creating a config from a file
    ExperimentConfig.load("configs/demo_disappoint.json")

    Overriding file fields with the values given on the command line
    config.merged({'seed': 7, 'method': 'mc'})
    """
    scenario_path: Optional[str] = None
    predictors: List[PredictorSpec] = field(default_factory=list)
    schedule: Optional[RegimeSchedule] = None
    T_list: List[int] = field(default_factory=list)
    method: str = METHOD_AUTO
    n_samples: int = settings.DEFAULT_N_SAMPLES
    seed: Optional[int] = None
    mode: str = Mode.PREDICTION
    decision: Optional[object] = None
    margin: float = 0.0
    empirical_counts: Optional[List[int]] = None
    empirical_weights: Optional[List[float]] = None
    sample_size: Optional[int] = None
    ratios: Optional[List[float]] = None
    cap: int = settings.DEFAULT_LATTICE_CAP
    output_path: Optional[str] = None
    format: str = CSV

    @classmethod
    def from_document(cls, document: dict) -> ExperimentConfig:
        if type(document) is not dict:
            raise ConfigError("a config file must contain a JSON object")
        unknown = sorted(set(document) - set(CONFIG_FIELDS))
        if unknown:
            raise ConfigError(f"unknown config fields {unknown}", field=unknown[0])
        if document.get('schema_version') != settings.SCHEMA_VERSION:
            raise ConfigError(
                f"unsupported schema_version {document.get('schema_version')}, expected {settings.SCHEMA_VERSION}",
                field='schema_version'
            )
        overrides = {key: value for key, value in document.items() if key != 'schema_version'}
        return cls().merged(overrides)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            document = json.loads(path.read_bytes())
        except OSError as e:
            raise ConfigError(f"unable to read config file <{path}>: {e}", field='config')
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"invalid JSON in config file <{path}>: {e}", field='config')
        return cls.from_document(document)

    def merged(self, overrides: dict) -> ExperimentConfig:
        """
        A copy with the given fields replaced; None values leave the field untouched

        Keyword Arguments
        overrides -- config-file style keys (scenario, out, T_list, ...) with raw JSON values

        Return
        ExperimentConfig -- the validated copy
        """
        changes = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == 'scenario':
                changes['scenario_path'] = str(value)
            elif key == 'out':
                changes['output_path'] = str(value)
            elif key == 'predictors':
                if type(value) is not list:
                    value = [value]
                changes['predictors'] = [PredictorSpec.from_input(entry) for entry in value]
            elif key == 'schedule':
                changes['schedule'] = value if isinstance(value, RegimeSchedule) else RegimeSchedule.from_spec(value)
            elif key == 'T_list':
                changes['T_list'] = _int_list(value, key)
            elif key == 'method':
                if value not in METHODS:
                    raise ConfigError(f"unknown method <{value}>, expected one of {list(METHODS)}", field=key)
                changes['method'] = value
            elif key in ('n_samples', 'cap', 'sample_size'):
                changes[key] = _positive_int(value, key)
            elif key == 'seed':
                if type(value) is bool or not isinstance(value, int):
                    raise ConfigError(f"field <seed> must be an integer, got <{value}>", field=key)
                changes['seed'] = value
            elif key == 'mode':
                if value not in (Mode.PREDICTION, Mode.PRESCRIPTION):
                    raise ConfigError(f"mode must be prediction or prescription, got <{value}>", field=key)
                changes['mode'] = value
            elif key == 'decision':
                changes['decision'] = value
            elif key == 'margin':
                margin = float(_real.from_input(value, key))
                if not 0 <= margin < float('inf'):
                    raise ConfigError(f"margin must be a nonnegative number, got <{value}>", field=key)
                changes['margin'] = margin
            elif key == 'empirical_counts':
                changes[key] = _count_list(value, key)
            elif key in ('empirical_weights', 'ratios'):
                changes[key] = _real_list(value, key)
            elif key == 'format':
                if value not in FORMATS:
                    raise ConfigError(f"format must be one of {list(FORMATS)}, got <{value}>", field=key)
                changes['format'] = value
            else:
                raise ConfigError(f"unknown config field <{key}>", field=key)
        return dataclasses.replace(self, **changes)

    def load_problem(self, logger=logger) -> Problem:
        if self.scenario_path is None:
            raise ConfigError("no scenario given, use --scenario or the <scenario> config field", field='scenario')
        return load_scenario(self.scenario_path, logger=logger)

    def schedule_for(self, spec: PredictorSpec) -> Optional[RegimeSchedule]:
        return spec.schedule if spec.schedule is not None else self.schedule

    def empirical(self, problem: Problem) -> Tuple[Distribution, Optional[int]]:
        """The data the predictors see: explicit counts, explicit weights, or the true distribution"""
        if self.empirical_counts is not None:
            emp = EmpiricalDistribution(self.empirical_counts)
            if self.sample_size is not None and self.sample_size != emp.sample_size:
                raise ConfigError(
                    f"sample_size {self.sample_size} disagrees with the counts summing to {emp.sample_size}",
                    field='sample_size'
                )
        elif self.empirical_weights is not None:
            emp = Distribution(self.empirical_weights)
        elif problem.true_dist is not None:
            emp = problem.true_dist
        else:
            raise ConfigError(
                "no data given, use <empirical_counts>, <empirical_weights> or a scenario with <true_dist>",
                field='empirical_counts'
            )
        if emp.dimension != problem.loss.n_scenarios:
            raise ConfigError(
                f"the data has {emp.dimension} scenarios, the scenario file {problem.loss.n_scenarios}",
                field='empirical_counts'
            )
        sample_size = emp.sample_size if isinstance(emp, EmpiricalDistribution) else self.sample_size
        return emp, sample_size


def _a_T(schedule, T):
    if schedule is None or T is None:
        return None
    return schedule.a(T)


def _require_predictors(config):
    if not config.predictors:
        raise ConfigError("no predictors given, use --predictor or the <predictors> config field",
                          field='predictors')


def cmd_predict(config: ExperimentConfig, logger=logger) -> List[dict]:
    """One row per (decision, predictor), decisions in index order, predictors in config order"""
    _require_predictors(config)
    problem = config.load_problem(logger=logger)
    emp, T = config.empirical(problem)
    logger.info(f"[disappointment_lab cli_harness.py cmd_predict()] predicting with {emp} at T={T}")
    rows = []
    for x in range(problem.loss.n_decisions):
        for spec in config.predictors:
            schedule = config.schedule_for(spec)
            result = predict(problem, spec.kind, x, emp, schedule, sample_size=T)
            rows.append({
                'schema_version': settings.SCHEMA_VERSION,
                'decision': problem.loss.decision_labels[x],
                'decision_index': x,
                'predictor': spec.kind.value,
                'T': T,
                'a_T': _a_T(schedule, T),
                'value': result.value,
                'worst_case': None if result.worst_case is None else result.worst_case.weights.tolist(),
                'dual_alpha': result.dual_alpha,
                'condition_ok': result.condition_ok,
            })
    return rows


def cmd_prescribe(config: ExperimentConfig, logger=logger) -> List[dict]:
    """
    One row per predictor with the prescribed decision

    SVP rows also carry the gap bounds sqrt(2 a_T / T Var) of the prescription at the data, when
    the data lies in the interior of the simplex.
    """
    _require_predictors(config)
    problem = config.load_problem(logger=logger)
    emp, T = config.empirical(problem)
    rows = []
    for spec in config.predictors:
        schedule = config.schedule_for(spec)
        result = prescribe(problem, spec.kind, emp, schedule, sample_size=T)
        gap_lower = gap_upper = None
        if spec.kind is PredictorKind.SVP and emp.is_interior:
            gap_lower, gap_upper = prescription_gap_bound(problem, emp, T, schedule)
        logger.debug(f"[disappointment_lab cli_harness.py cmd_prescribe()] {result}")
        rows.append({
            'schema_version': settings.SCHEMA_VERSION,
            'predictor': spec.kind.value,
            'T': T,
            'a_T': _a_T(schedule, T),
            'decision': problem.loss.decision_labels[result.decision],
            'decision_index': result.decision,
            'value': result.value,
            'gap_lower': gap_lower,
            'gap_upper': gap_upper,
        })
    return rows


def cmd_disappoint(config: ExperimentConfig, logger=logger) -> List[dict]:
    """One row per (T, predictor), in T_list order and then predictor order"""
    _require_predictors(config)
    if not config.T_list:
        raise ConfigError("no sample sizes given, use --T or the <T_list> config field", field='T_list')
    problem = config.load_problem(logger=logger)
    if problem.true_dist is None:
        raise ConfigError("disappointment needs a scenario with <true_dist>", field='true_dist')
    if config.mode == Mode.PREDICTION:
        if config.decision is None:
            raise ConfigError("prediction mode needs a decision, use --decision", field='decision')
        mode = Mode.prediction(problem.decision_index(config.decision))
    else:
        mode = Mode.prescription()
    rows = []
    for T in config.T_list:
        for spec in config.predictors:
            report, = report_curve(
                problem, spec.kind, mode, problem.true_dist, config.schedule_for(spec), [T], method=config.method,
                n_samples=config.n_samples, seed=config.seed, margin=config.margin, cap=config.cap, logger=logger
            )
            rows.append({
                'schema_version': settings.SCHEMA_VERSION,
                'T': T,
                'a_T': report.a_T,
                'predictor': spec.kind.value,
                'mode': mode.kind,
                'decision': problem.loss.decision_labels[mode.decision] if mode.is_prediction else None,
                'method': report.method.name,
                'probability': report.probability,
                'log_probability': report.log_probability,
                'rate': report.rate,
                'std_err': report.method.std_err,
                'n_samples': report.method.n_samples,
                'effective_sample_size': report.method.effective_sample_size,
                'margin': report.margin,
            })
    return rows


def cmd_convexity(config: ExperimentConfig, logger=logger) -> List[dict]:
    """One row per ratio a_T / T of the sweep, in the given order"""
    if not config.ratios:
        raise ConfigError("the convexity sweep needs a non-empty ratio list, use --ratio", field='ratios')
    if any(ratio < 0 for ratio in config.ratios):
        raise ConfigError(f"ratios must be nonnegative, got {config.ratios}", field='ratios')
    problem = config.load_problem(logger=logger)
    emp, T = config.empirical(problem)
    rows = []
    for ratio in config.ratios:
        threshold_ok, violations = convexity_certificate_at_ratio(problem.loss, emp, ratio)
        logger.debug(
            f"[disappointment_lab cli_harness.py cmd_convexity()] ratio={ratio}: threshold_ok={threshold_ok} "
            f"violations={violations}"
        )
        rows.append({
            'schema_version': settings.SCHEMA_VERSION,
            'ratio': ratio,
            'a_T': None if T is None else ratio * T,
            'threshold_ok': threshold_ok,
            'midpoint_violations': violations,
        })
    return rows


COMMANDS = {
    'predict': (cmd_predict, PREDICT_COLUMNS),
    'prescribe': (cmd_prescribe, PRESCRIBE_COLUMNS),
    'disappoint': (cmd_disappoint, DISAPPOINT_COLUMNS),
    'convexity': (cmd_convexity, CONVEXITY_COLUMNS),
}


def _csv_cell(column, value):
    if column in COLUMN_FIELDS:
        return COLUMN_FIELDS[column].to_csv(value)
    return "" if value is None else f"{value}"


def _json_cell(column, value):
    if column in COLUMN_FIELDS:
        return COLUMN_FIELDS[column].to_json(value)
    return value


def render_rows(rows: Sequence[dict], columns: Sequence[str], fmt: str = CSV) -> str:
    """
    Serializes result rows with a fixed column order

    CSV uses the "inf" / "-inf" sentinels and "\\n" line endings; JSON is a list holding one object
    per row with the same keys in the same order.
    """
    if fmt == CSV:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: _csv_cell(column, row.get(column)) for column in columns})
        return buffer.getvalue()
    if fmt == JSON:
        records = [{column: _json_cell(column, row.get(column)) for column in columns} for row in rows]
        return json.dumps(records, indent=2, allow_nan=False) + "\n"
    raise ConfigError(f"format must be one of {list(FORMATS)}, got <{fmt}>", field='format')


def write_output(text: str, output_path: Optional[str]):
    if output_path is None:
        sys.stdout.write(text)
        return
    try:
        with open(output_path, 'w', encoding='utf-8', newline='') as output:
            output.write(text)
    except OSError as e:
        raise ConfigError(f"unable to write <{output_path}>: {e}", field='out')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='disappointment_lab',
        description='Data-driven predictors, prescriptors and their out-of-sample disappointment'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name in COMMANDS:
        command = subparsers.add_parser(name)
        command.add_argument('--config', help='versioned JSON experiment config; flags override its fields')
        command.add_argument('--scenario', help='versioned JSON scenario file')
        command.add_argument('--out', help='output file, standard output when omitted')
        command.add_argument('--format', choices=FORMATS)
        command.add_argument('--seed', type=int, help='seed of the Monte Carlo and importance samplers')
        command.add_argument('--method', choices=METHODS)
        command.add_argument('--cap', type=int, help='largest lattice the exact engine enumerates')
        command.add_argument('--predictor', action='append', choices=[kind.value for kind in PredictorKind],
                             help='predictor to run, repeatable')
        command.add_argument('--schedule', help='schedule as JSON, e.g. \'{"family": "exponential", "r": 0.1}\'')
        command.add_argument('--T', dest='T_list', type=int, nargs='+', help='sample sizes')
        command.add_argument('--mode', choices=(Mode.PREDICTION, Mode.PRESCRIPTION))
        command.add_argument('--decision', help='decision index or label for prediction mode')
        command.add_argument('--n-samples', dest='n_samples', type=int)
        command.add_argument('--margin', type=float, help='additive constant on the predictor')
        command.add_argument('--counts', dest='empirical_counts', type=int, nargs='+', help='empirical counts')
        command.add_argument('--ratio', dest='ratios', type=float, nargs='+', help='a_T / T values to sweep')
        command.add_argument('--verbose', action='store_true', help='log at DEBUG level to standard error')
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config is not None else ExperimentConfig()
    schedule = None
    if args.schedule is not None:
        try:
            schedule = json.loads(args.schedule)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--schedule is not valid JSON: {e}", field='schedule')
    return config.merged({
        'scenario': args.scenario,
        'out': args.out,
        'format': args.format,
        'seed': args.seed,
        'method': args.method,
        'cap': args.cap,
        'predictors': args.predictor,
        'schedule': schedule,
        'T_list': args.T_list,
        'mode': args.mode,
        'decision': args.decision,
        'n_samples': args.n_samples,
        'margin': args.margin,
        'empirical_counts': args.empirical_counts,
        'ratios': args.ratios,
    })


def main(argv: Sequence[str] = None) -> int:
    """
    Runs one subcommand and returns its exit code

    0 on success, 2 for input errors, 1 for runtime errors. Failures print a single JSON error
    record on standard error and write no output file.
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s %(message)s"
    )
    command, columns = COMMANDS[args.command]
    try:
        config = config_from_args(args)
        rows = command(config, logger=logger)
        write_output(render_rows(rows, columns, config.format), config.output_path)
    except DisappointmentLabError as e:
        logger.error(f"[disappointment_lab cli_harness.py main()] {args.command} failed: {e}")
        sys.stderr.write(json.dumps(e.to_record(), default=str) + "\n")
        return e.exit_code
    except Exception as e:
        logger.exception(f"[disappointment_lab cli_harness.py main()] {args.command} crashed")
        sys.stderr.write(json.dumps({"error": "InternalError", "message": f"{e}", "exit_code": 1}) + "\n")
        return 1
    return 0
