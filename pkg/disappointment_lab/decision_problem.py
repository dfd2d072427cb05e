# for type references to own class
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from . import settings
from .errors import (
    DecisionIndexError, DimensionMismatchError, InvalidDistributionError, ScenarioParseError,
    ScenarioValidationError
)
from .simplex_core import Distribution

logger = logging.getLogger(__name__)

SCENARIO_FIELDS = (
    'schema_version', 'scenario_labels', 'decision_labels', 'loss', 'true_dist', 'decision_points',
    'description'
)


class LossMatrix:
    """
    Losses l(x, i) for a finite decision set (rows) and a finite scenario set (columns)

    K_half = max |l(x, i)| is computed once on construction; the finite-sample constant
    K = 2 * K_half derives from it.
    """

    def __init__(self, values, decision_labels: Sequence[str] = None, scenario_labels: Sequence[str] = None,
                 decision_points: Sequence[float] = None):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise ScenarioValidationError(
                f"the loss must be a matrix, got an array with {values.ndim} dimensions", invariant="dimensions"
            )
        n, d = values.shape
        if n < 1:
            raise ScenarioValidationError("the loss needs at least one decision", invariant="n >= 1")
        if d < 2:
            raise ScenarioValidationError(f"the loss needs at least two scenarios, got {d}", invariant="d >= 2")
        if not np.all(np.isfinite(values)):
            bad_row, bad_column = [int(index) for index in np.argwhere(~np.isfinite(values))[0]]
            raise ScenarioValidationError(
                f"loss[{bad_row}][{bad_column}] = {values[bad_row, bad_column]} is not finite", invariant="finite"
            )
        self.decision_labels = tuple(decision_labels) if decision_labels is not None else tuple(
            f"x{index}" for index in range(n)
        )
        self.scenario_labels = tuple(scenario_labels) if scenario_labels is not None else tuple(
            f"s{index}" for index in range(d)
        )
        if len(self.decision_labels) != n or len(self.scenario_labels) != d:
            raise ScenarioValidationError(
                f"{len(self.decision_labels)} decision labels and {len(self.scenario_labels)} scenario labels "
                f"for a {n} x {d} loss", invariant="dimensions"
            )
        if decision_points is not None:
            decision_points = np.array(decision_points, dtype=float)
            if decision_points.shape != (n,) or not np.all(np.isfinite(decision_points)):
                raise ScenarioValidationError(
                    f"decision_points must hold {n} finite numbers", invariant="dimensions"
                )
            decision_points.setflags(write=False)
        self.decision_points = decision_points
        values.setflags(write=False)
        self.values = values
        self.k_half = float(np.max(np.abs(values)))

    @classmethod
    def from_function(cls, loss_fn: Callable[[float, float], float], decision_points: Sequence[float],
                      scenario_points: Sequence[float]) -> LossMatrix:
        """
        Tabulates a loss function on a decision grid and a set of scenario values

        Keyword Arguments
        loss_fn -- l(x, xi)
        decision_points -- the decision grid, one row per point
        scenario_points -- the scenario values, one column per point

        Return
        LossMatrix -- labelled with the grid values
        """
        values = [[loss_fn(x, xi) for xi in scenario_points] for x in decision_points]
        return cls(
            values,
            decision_labels=[f"{x:g}" for x in decision_points],
            scenario_labels=[f"{xi:g}" for xi in scenario_points],
            decision_points=decision_points
        )

    @property
    def n_decisions(self) -> int:
        return self.values.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.values.shape[1]

    def row(self, x: int) -> np.ndarray:
        if type(x) is bool or not isinstance(x, (int, np.integer)) or not 0 <= x < self.n_decisions:
            raise DecisionIndexError(f"decision index {x} is out of range for {self.n_decisions} decisions")
        return self.values[x]

    def shifted(self, offset: float) -> LossMatrix:
        return LossMatrix(
            self.values + offset, self.decision_labels, self.scenario_labels, self.decision_points
        )

    def __str__(self):
        return f"LossMatrix(n=[{self.n_decisions}] d=[{self.n_scenarios}] K_half=[{self.k_half}])"


class Problem:
    """The pair (loss, true distribution) of a data-driven decision problem"""

    def __init__(self, loss: LossMatrix, true_dist: Optional[Distribution] = None):
        if true_dist is not None and true_dist.dimension != loss.n_scenarios:
            raise ScenarioValidationError(
                f"true_dist has {true_dist.dimension} weights for {loss.n_scenarios} scenarios",
                invariant="dimensions"
            )
        self.loss = loss
        self.true_dist = true_dist

    @classmethod
    def from_values(cls, values, true_dist=None, **labels) -> Problem:
        if true_dist is not None and not isinstance(true_dist, Distribution):
            true_dist = Distribution(true_dist)
        return cls(LossMatrix(values, **labels), true_dist)

    def decision_index(self, reference) -> int:
        """Resolves a decision given either by index or by label"""
        if type(reference) is str:
            if reference in self.loss.decision_labels:
                return self.loss.decision_labels.index(reference)
            if reference.isdigit():
                reference = int(reference)
            else:
                raise DecisionIndexError(f"unknown decision label <{reference}>")
        self.loss.row(reference)
        return int(reference)

    def __str__(self):
        return f"Problem(loss=[{self.loss}] true_dist=[{self.true_dist}])"


def _check_distribution(problem: Problem, p: Distribution):
    if p.dimension != problem.loss.n_scenarios:
        raise DimensionMismatchError(
            f"distribution has {p.dimension} weights for {problem.loss.n_scenarios} scenarios"
        )


def cost(problem: Problem, x: int, p: Distribution) -> float:
    """Expected loss c(x, p) = sum_i l(x, i) p(i)"""
    _check_distribution(problem, p)
    return float(np.dot(problem.loss.row(x), p.weights))


def covariance(problem: Problem, x1: int, x2: int, p: Distribution) -> float:
    if x1 == x2:
        return variance(problem, x1, p)
    _check_distribution(problem, p)
    row_1, row_2 = problem.loss.row(x1), problem.loss.row(x2)
    centered_1 = row_1 - np.dot(row_1, p.weights)
    centered_2 = row_2 - np.dot(row_2, p.weights)
    return float(np.dot(centered_1 * centered_2, p.weights))


def variance(problem: Problem, x: int, p: Distribution) -> float:
    """Var_p(l(x, xi)), clamped at 0 from below"""
    _check_distribution(problem, p)
    row = problem.loss.row(x)
    centered = row - np.dot(row, p.weights)
    return max(float(np.dot(centered * centered, p.weights)), 0.0)


def cost_matrix(problem: Problem, weights: np.ndarray) -> np.ndarray:
    """Costs of every decision under every row of an (N, d) weight array, shape (N, n)"""
    weights = np.atleast_2d(weights)
    return weights @ problem.loss.values.T


def variance_matrix(problem: Problem, weights: np.ndarray, costs: np.ndarray = None) -> np.ndarray:
    """Variances of every decision under every row of an (N, d) weight array, shape (N, n)"""
    weights = np.atleast_2d(weights)
    if costs is None:
        costs = cost_matrix(problem, weights)
    centered = problem.loss.values[np.newaxis, :, :] - costs[:, :, np.newaxis]
    return np.maximum(np.einsum('axd,ad->ax', centered * centered, weights), 0.0)


def min_variance_minimizer(problem: Problem, p: Distribution, tol: float = None) -> int:
    """
    The cost minimizer with the lowest variance

    Decisions whose cost is within tol of the minimum count as minimizers; the default tol is
    1e-9 * (1 + |c*|). Ties in variance go to the lowest index.
    """
    _check_distribution(problem, p)
    costs = cost_matrix(problem, p.weights)[0]
    best_cost = float(np.min(costs))
    if tol is None:
        tol = settings.COST_TIE_RELATIVE_TOLERANCE * (1.0 + abs(best_cost))
    variances = variance_matrix(problem, p.weights, costs[np.newaxis, :])[0]
    candidates = np.where(costs <= best_cost + tol, variances, np.inf)
    return int(np.argmin(candidates))


def _parse_error(message, field=None, line=None):
    return ScenarioParseError(message, line=line, field=field)


def _real_list(document, field, expected_length=None):
    values = document[field]
    if type(values) is not list or any(type(value) is bool or not isinstance(value, (int, float))
                                       for value in values):
        raise _parse_error(f"field <{field}> must be a list of numbers", field=field)
    if expected_length is not None and len(values) != expected_length:
        raise ScenarioValidationError(
            f"field <{field}> has {len(values)} entries, expected {expected_length}", invariant="dimensions"
        )
    return [float(value) for value in values]


def parse_scenario(document: dict) -> Problem:
    """
    Validates a decoded scenario document and builds the Problem it describes

    Keyword Arguments
    document -- the decoded JSON object

    Return
    Problem -- with validated invariants
    """
    if type(document) is not dict:
        raise _parse_error("a scenario file must contain a JSON object")
    unknown = sorted(set(document) - set(SCENARIO_FIELDS))
    if unknown:
        raise _parse_error(f"unknown fields {unknown}", field=unknown[0])
    for field in ('schema_version', 'scenario_labels', 'decision_labels', 'loss'):
        if field not in document:
            raise _parse_error(f"missing required field <{field}>", field=field)
    if document['schema_version'] != settings.SCHEMA_VERSION:
        raise _parse_error(
            f"unsupported schema_version {document['schema_version']}, expected {settings.SCHEMA_VERSION}",
            field='schema_version'
        )
    for field in ('scenario_labels', 'decision_labels'):
        labels = document[field]
        if type(labels) is not list or any(type(label) is not str for label in labels):
            raise _parse_error(f"field <{field}> must be a list of strings", field=field)
    scenario_labels = document['scenario_labels']
    decision_labels = document['decision_labels']
    loss = document['loss']
    if type(loss) is not list or any(type(row) is not list for row in loss):
        raise _parse_error("field <loss> must be a list of rows", field='loss')
    if len(loss) != len(decision_labels):
        raise ScenarioValidationError(
            f"loss has {len(loss)} rows for {len(decision_labels)} decisions", invariant="dimensions"
        )
    rows = []
    for index, row in enumerate(loss):
        if len(row) != len(scenario_labels):
            raise ScenarioValidationError(
                f"loss row {index} has {len(row)} entries for {len(scenario_labels)} scenarios",
                invariant="dimensions"
            )
        rows.append(_real_list({'loss': row}, 'loss'))
    decision_points = None
    if document.get('decision_points') is not None:
        decision_points = _real_list(document, 'decision_points', len(decision_labels))
    loss_matrix = LossMatrix(rows, decision_labels, scenario_labels, decision_points)
    true_dist = None
    if document.get('true_dist') is not None:
        weights = _real_list(document, 'true_dist', len(scenario_labels))
        try:
            true_dist = Distribution(weights)
        except InvalidDistributionError as e:
            raise ScenarioValidationError(f"true_dist is not a probability vector: {e}", invariant="simplex")
    return Problem(loss_matrix, true_dist)


def load_scenario(path, logger=logger) -> Problem:
    """
    Reads a versioned JSON scenario file

    The raw bytes go to the JSON decoder, which detects UTF-8/16/32 and byte-order marks on its
    own, so files written on either byte order load identically.
    """
    path = Path(path)
    logger.debug(f"[disappointment_lab decision_problem.py load_scenario()] loading scenario <{path}>")
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise _parse_error(f"unable to read scenario file <{path}>: {e}")
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as e:
        raise _parse_error(f"invalid JSON in <{path}>: {e.msg}", line=e.lineno)
    except UnicodeDecodeError as e:
        raise _parse_error(f"undecodable scenario file <{path}>: {e}")
    problem = parse_scenario(document)
    logger.debug(f"[disappointment_lab decision_problem.py load_scenario()] loaded {problem}")
    return problem


def scenario_document(problem: Problem) -> dict:
    """The JSON document load_scenario reads back into an equivalent Problem"""
    document = {
        'schema_version': settings.SCHEMA_VERSION,
        'scenario_labels': list(problem.loss.scenario_labels),
        'decision_labels': list(problem.loss.decision_labels),
        'loss': problem.loss.values.tolist(),
    }
    if problem.loss.decision_points is not None:
        document['decision_points'] = problem.loss.decision_points.tolist()
    if problem.true_dist is not None:
        document['true_dist'] = problem.true_dist.weights.tolist()
    return document


def loss_span(problem: Problem, x: int) -> Tuple[float, float]:
    row = problem.loss.row(x)
    return float(np.min(row)), float(np.max(row))
