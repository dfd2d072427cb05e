import logging
import math
from typing import Tuple

import numpy as np

from . import settings
from .decision_problem import LossMatrix, Problem, cost_matrix, min_variance_minimizer, variance_matrix
from .errors import DimensionMismatchError, GridTooSmallError, InvariantViolationError, NotInteriorError
from .models import PrescriptionResult, PredictorKind
from .predictors import dro_condition_holds, predictor_values, sample_size_of
from .schedules import RegimeSchedule
from .simplex_core import Distribution

logger = logging.getLogger(__name__)

CONVEXITY_TOLERANCE = 1e-9


def select_decisions(values: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """
    Row-wise argmin of predicted values with the prescription tie-break

    Values within settings.PRESCRIPTION_TIE_TOLERANCE of the row minimum tie; among those the
    smaller variance wins, then the lower index.
    """
    values = np.atleast_2d(values)
    best = np.min(values, axis=1, keepdims=True)
    candidates = values <= best + settings.PRESCRIPTION_TIE_TOLERANCE
    return np.argmin(np.where(candidates, np.atleast_2d(variances), np.inf), axis=1)


def prescribe(problem: Problem, predictor_kind: PredictorKind, emp: Distribution, schedule: RegimeSchedule = None,
              sample_size: int = None) -> PrescriptionResult:
    """
    The decision minimizing the chosen predictor over the whole decision set

    Keyword Arguments
    problem -- the decision problem
    predictor_kind -- which predictor to minimize
    emp -- the data, an EmpiricalDistribution or any Distribution together with sample_size
    schedule -- the guarantee schedule (exponential rate for KL, any family for SVP)
    sample_size -- T when emp does not carry it

    Return
    PrescriptionResult -- the decision and its predicted value
    """
    kind = PredictorKind.parse(predictor_kind)
    T = None
    if kind in (PredictorKind.KL, PredictorKind.SVP):
        T = sample_size_of(emp, sample_size)
    weights = emp.weights[np.newaxis, :]
    if emp.dimension != problem.loss.n_scenarios:
        raise DimensionMismatchError(
            f"distribution has {emp.dimension} weights for {problem.loss.n_scenarios} scenarios"
        )
    values = predictor_values(problem, kind, weights, T, schedule)
    variances = variance_matrix(problem, weights)
    decision = int(select_decisions(values, variances)[0])
    return PrescriptionResult(decision=decision, value=float(values[0, decision]), predictor_kind=kind)


def prescription_gap_bound(problem: Problem, p: Distribution, T: int, schedule: RegimeSchedule) -> Tuple[float, float]:
    """
    Bounds on how far the SVP optimal value sits above the true optimal cost

        sqrt(alpha Var(x_V)) <= c_V* - c* <= sqrt(alpha Var(x*)),   alpha = 2 a_T / T

    where x_V is the SVP prescription under p and x* the minimal-variance cost minimizer.
    """
    if not p.is_interior:
        raise NotInteriorError(f"the prescription gap bound needs an interior distribution, got {p}")
    alpha = 2.0 * schedule.ratio(T)
    weights = p.weights[np.newaxis, :]
    costs = cost_matrix(problem, weights)[0]
    variances = variance_matrix(problem, weights)[0]
    best_cost = float(np.min(costs))
    x_star = min_variance_minimizer(problem, p)
    prescription = prescribe(problem, PredictorKind.SVP, p, schedule, sample_size=T)
    upper = math.sqrt(alpha * variances[x_star])
    lower = math.sqrt(alpha * variances[prescription.decision])
    gap = prescription.value - best_cost
    # x* may sit up to the cost-tie tolerance above the exact minimum
    slack = settings.PRESCRIPTION_TIE_TOLERANCE * (1.0 + abs(best_cost)) + float(costs[x_star]) - best_cost
    if not lower - slack <= gap <= upper + slack:
        raise InvariantViolationError(
            f"SVP prescription gap {gap} escapes the bounds [{lower}, {upper}]", lower=lower, upper=upper, gap=gap
        )
    return lower, upper


def convexity_certificate_at_ratio(loss: LossMatrix, emp: Distribution, ratio: float) -> Tuple[bool, int]:
    """
    Checks x -> c_V(x, emp) for convexity on a one-dimensional decision grid

    threshold_ok reports sqrt(2 ratio) <= min_i emp(i) * min_i min(emp(i), 1 - emp(i)), under which the
    SVP predictor is convex for any convex loss. The sampled check compares every grid point
    (i + k) // 2 against the chord between grid points i and k and counts the points sitting above it
    by more than 1e-9. Decision points order the grid; without them the grid is taken as uniform.
    """
    n = loss.n_decisions
    if n < 3:
        raise GridTooSmallError(f"the convexity check needs at least 3 decisions, got {n}")
    if emp.dimension != loss.n_scenarios:
        raise DimensionMismatchError(f"distribution has {emp.dimension} weights for {loss.n_scenarios} scenarios")
    points = loss.decision_points if loss.decision_points is not None else np.arange(n, dtype=float)
    order = np.argsort(points, kind='stable')
    points = points[order]
    weights = emp.weights[np.newaxis, :]
    problem = Problem(loss)
    costs = cost_matrix(problem, weights)
    values = (costs + np.sqrt(2.0 * ratio * variance_matrix(problem, weights, costs)))[0][order]
    violations = 0
    for width in range(2, n):
        left = np.arange(n - width)
        right = left + width
        middle = (left + right) // 2
        span = points[right] - points[left]
        usable = span > 0
        chord = values[left] + np.where(
            usable, (points[middle] - points[left]) / np.where(usable, span, 1.0), 0.5
        ) * (values[right] - values[left])
        violations += int(np.count_nonzero(values[middle] > chord + CONVEXITY_TOLERANCE))
    return dro_condition_holds(emp, ratio), violations


def convexity_certificate(loss: LossMatrix, emp: Distribution, schedule: RegimeSchedule,
                          sample_size: int = None) -> Tuple[bool, int]:
    """Convexity certificate at the radius a_T / T of the schedule, T being the sample size of emp"""
    ratio = schedule.ratio(sample_size_of(emp, sample_size))
    return convexity_certificate_at_ratio(loss, emp, ratio)
