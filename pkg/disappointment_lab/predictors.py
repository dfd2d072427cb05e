import logging
import math
from typing import Tuple

import numpy as np
from scipy.special import rel_entr

from . import settings
from .decision_problem import Problem, cost, cost_matrix, variance, variance_matrix
from .errors import (
    ConfigError, ConvergenceError, DimensionMismatchError, EllipsoidConditionError, GridDimensionError,
    NegativeRadiusError, NotInteriorError, SingularMatrixError
)
from .models import PredictionResult, PredictorKind
from .schedules import RegimeSchedule
from .simplex_core import Distribution, EmpiricalDistribution, SimplexDelta

logger = logging.getLogger(__name__)


def sample_size_of(emp, sample_size=None) -> int:
    """The sample size T: the explicit value when given, else the one carried by an EmpiricalDistribution"""
    if sample_size is not None:
        return int(sample_size)
    if isinstance(emp, EmpiricalDistribution):
        return emp.sample_size
    raise ConfigError("a sample size is needed when the data is not an EmpiricalDistribution", field='T')


def predict_saa(problem: Problem, x: int, emp: Distribution) -> PredictionResult:
    """Sample average approximation: the cost under the empirical distribution"""
    return PredictionResult(value=cost(problem, x, emp))


def predict_robust(problem: Problem, x: int) -> PredictionResult:
    """Worst scenario loss; the attaining vertex is the lowest-index maximizer"""
    row = problem.loss.row(x)
    worst = int(np.argmax(row))
    return PredictionResult(
        value=float(row[worst]), worst_case=Distribution.vertex(problem.loss.n_scenarios, worst)
    )


def predict_kl_dual(problem: Problem, x: int, p: Distribution, r: float,
                    tol: float = settings.KL_RELATIVE_TOLERANCE, logger=logger) -> PredictionResult:
    """
    Worst-case cost over the relative-entropy ball {q : I(p, q) <= r}, through its dual

        min_{alpha >= gamma} alpha - exp(-r) * exp(sum_i p(i) log(alpha - l(x, i)))

    with gamma the largest loss of the row. Scenarios with p(i) = 0 drop out of the geometric
    mean but still count for gamma, since the ball may move mass onto them.

    Keyword Arguments
    problem -- the decision problem
    x -- decision index
    p -- center of the ball, usually the empirical distribution
    r -- radius, r >= 0
    tol -- relative tolerance on the dual minimizer alpha

    Return
    PredictionResult -- value, the attaining distribution and the dual minimizer
    """
    if r < 0:
        raise NegativeRadiusError(f"the KL radius must be nonnegative, got {r}")
    if tol <= 0:
        raise ConfigError(f"the KL tolerance must be positive, got {tol}", field='tol')
    row = problem.loss.row(x)
    if p.dimension != row.size:
        raise DimensionMismatchError(f"distribution has {p.dimension} weights for {row.size} scenarios")
    if r == 0:
        return PredictionResult(value=cost(problem, x, p), worst_case=p)

    gamma = float(np.max(row))
    worst = int(np.argmax(row))
    support = p.weights > 0
    losses = row[support]
    weights = p.weights[support]
    shrink = math.exp(-r)

    if float(np.max(losses)) == float(np.min(losses)):
        # loss is constant on the support of p: the ball keeps at least exp(-r) of the mass there
        support_loss = float(losses[0])
        if support_loss == gamma:
            return PredictionResult(value=gamma, worst_case=p, dual_alpha=gamma)
        worst_case = shrink * p.weights
        worst_case[worst] += 1.0 - shrink
        return PredictionResult(
            value=shrink * support_loss + (1.0 - shrink) * gamma,
            worst_case=Distribution(worst_case), dual_alpha=gamma
        )

    def scaled_geometric_mean(alpha):
        return shrink * math.exp(float(np.dot(weights, np.log(alpha - losses))))

    def derivative(alpha):
        return 1.0 - scaled_geometric_mean(alpha) * float(np.dot(weights, 1.0 / (alpha - losses)))

    def second_derivative(alpha):
        inverse_gaps = 1.0 / (alpha - losses)
        first, second = float(np.dot(weights, inverse_gaps)), float(np.dot(weights, inverse_gaps ** 2))
        return scaled_geometric_mean(alpha) * (second - first * first)

    span = gamma - float(np.min(row))
    log_prefix = f"[disappointment_lab predictors.py predict_kl_dual()] x={x} r={r}:"
    # f' -> -inf at gamma when gamma is a supported loss, otherwise f' is finite at gamma itself
    if float(np.max(losses)) < gamma:
        lowest = gamma
    else:
        # strictly above gamma even when 1e-12 * span is below one ulp of gamma
        lowest = max(gamma + 1e-12 * span, float(np.nextafter(gamma, np.inf)))
    if derivative(lowest) >= 0:
        alpha = lowest
        logger.debug(f"{log_prefix} dual minimizer sits at the lower end alpha={alpha}")
    else:
        lo, hi = lowest, gamma + span
        iterations = 0
        while derivative(hi) <= 0:
            lo, hi = hi, gamma + 2.0 * (hi - gamma)
            iterations += 1
            if iterations > settings.KL_MAX_ITERATIONS:
                raise ConvergenceError(f"{log_prefix} no sign change of the dual derivative", (lo, hi))
        while hi - lo > tol * (1.0 + abs(lo)):
            mid = 0.5 * (lo + hi)
            if derivative(mid) <= 0:
                lo = mid
            else:
                hi = mid
            iterations += 1
            if iterations > settings.KL_MAX_ITERATIONS:
                raise ConvergenceError(f"{log_prefix} bisection did not reach tolerance {tol}", (lo, hi))
        alpha = 0.5 * (lo + hi)
        for _ in range(3):
            curvature = second_derivative(alpha)
            if curvature <= 0:
                break
            polished = alpha - derivative(alpha) / curvature
            if not lo <= polished <= hi:
                break
            alpha = polished
        logger.debug(f"{log_prefix} dual minimizer alpha={alpha} after {iterations} iterations")

    scale = scaled_geometric_mean(alpha)
    worst_case = np.zeros(row.size)
    worst_case[support] = scale * weights / (alpha - losses)
    leftover = 1.0 - float(np.sum(worst_case))
    if leftover > 0:
        worst_case[worst] += leftover
    return PredictionResult(
        value=alpha - scale, worst_case=Distribution(worst_case), dual_alpha=alpha
    )


def _slice_divergence(p_a, p_b, p_c, q_a, q_b, rest):
    return rel_entr(p_a, q_a) + rel_entr(p_b, q_b) + rel_entr(p_c, np.maximum(rest - q_b, 0.0))


def predict_kl_primal_grid(problem: Problem, x: int, p: Distribution, r: float, grid_step: float) -> float:
    """
    Grid lower bound on the KL worst-case cost, for d <= 3

    The grid holds every q whose coordinates are multiples of 1 / round(1 / grid_step); p itself is
    always a candidate. For d = 3 each slice with a fixed first (middle-loss) coordinate meets the
    ball in an interval, found by bisection, and the linear cost peaks at one of its grid ends.
    """
    row = problem.loss.row(x)
    d = row.size
    if p.dimension != d:
        raise DimensionMismatchError(f"distribution has {p.dimension} weights for {d} scenarios")
    if d > 3:
        raise GridDimensionError(f"the simplex grid oracle supports at most 3 scenarios, got {d}")
    if not 0 < grid_step <= 1:
        raise ConfigError(f"grid_step must lie in (0, 1], got {grid_step}", field='grid_step')
    if r < 0:
        raise NegativeRadiusError(f"the KL radius must be nonnegative, got {r}")
    n = max(1, int(round(1.0 / grid_step)))
    best = cost(problem, x, p)
    if float(np.max(row)) == float(np.min(row)):
        return best

    if d == 2:
        k = np.arange(n + 1)
        grid = np.column_stack([(n - k) / n, k / n])
        divergences = np.sum(rel_entr(p.weights[np.newaxis, :], grid), axis=1)
        feasible = divergences <= r
        if np.any(feasible):
            best = max(best, float(np.max(grid[feasible] @ row)))
        return best

    # inner coordinate b carries the largest loss, c the smallest, a the remaining one
    b, c = int(np.argmax(row)), int(np.argmin(row))
    a = 3 - b - c
    p_a, p_b, p_c = p.weights[a], p.weights[b], p.weights[c]
    k_a = np.arange(n + 1)
    q_a = k_a / n
    rest = (n - k_a) / n
    if p_b + p_c > 0:
        centre = rest * p_b / (p_b + p_c)
    else:
        centre = 0.5 * rest

    def divergence(q_b):
        return _slice_divergence(p_a, p_b, p_c, q_a, q_b, rest)

    slice_ok = divergence(centre) <= r
    left_lo, left_hi = np.zeros_like(centre), centre.copy()
    right_lo, right_hi = centre.copy(), rest.copy()
    left_open = divergence(left_lo) <= r
    right_open = divergence(right_hi) <= r
    for _ in range(100):
        mid = 0.5 * (left_lo + left_hi)
        inside = divergence(mid) <= r
        left_hi = np.where(inside, mid, left_hi)
        left_lo = np.where(inside, left_lo, mid)
        mid = 0.5 * (right_lo + right_hi)
        inside = divergence(mid) <= r
        right_lo = np.where(inside, mid, right_lo)
        right_hi = np.where(inside, right_hi, mid)
    left = np.where(left_open, 0.0, left_hi)
    right = np.where(right_open, rest, right_lo)
    k_max = n - k_a
    k_lo = np.clip(np.ceil(left * n), 0, k_max)
    k_hi = np.clip(np.floor(right * n), 0, k_max)
    for k_b in (k_lo, k_hi):
        q_b = k_b / n
        q_c = (k_max - k_b) / n
        feasible = slice_ok & (k_lo <= k_hi) & (divergence(q_b) <= r)
        if np.any(feasible):
            values = row[a] * q_a + row[b] * q_b + row[c] * q_c
            best = max(best, float(np.max(values[feasible])))
    return best


def dro_condition_holds(p: Distribution, ratio: float) -> bool:
    """
    Whether sqrt(2 ratio) <= min_i p(i) * min_i min(p(i), 1 - p(i)), the radius under which the
    variance penalty equals a worst case over an ellipsoid inside the simplex
    """
    weights = p.weights
    threshold = float(np.min(weights)) * float(np.min(np.minimum(weights, 1.0 - weights)))
    return bool(math.sqrt(2.0 * ratio) <= threshold)


def svp_direction(problem: Problem, x: int, p: Distribution) -> SimplexDelta:
    """
    The direction phi_x(p) = (l * p - c p) / sqrt(Var) along which the SVP worst case moves

    When the variance vanishes, phi follows the convention sqrt(p(1) / (1 - p(1))) (e_1 - p), which
    lies on the same ellipsoid 2 ||phi||_p^2 = 1.
    """
    if not p.is_interior:
        raise NotInteriorError(f"the SVP direction needs an interior distribution, got {p}")
    row = problem.loss.row(x)
    weights = p.weights
    spread = variance(problem, x, p)
    if spread > 0:
        direction = weights * (row - cost(problem, x, p)) / math.sqrt(spread)
    else:
        first = weights[0]
        direction = math.sqrt(first / (1.0 - first)) * (np.eye(weights.size)[0] - weights)
    # remove the rounding drift off the hyperplane e^T phi = 0
    return SimplexDelta(direction - weights * float(np.sum(direction)))


def svp_worst_case(problem: Problem, x: int, p: Distribution, ratio: float) -> Distribution:
    """The distribution p + sqrt(2 ratio) phi_x(p) attaining the SVP value"""
    if ratio < 0:
        raise NegativeRadiusError(f"the SVP radius must be nonnegative, got {ratio}")
    direction = svp_direction(problem, x, p)
    return Distribution(p.weights + math.sqrt(2.0 * ratio) * direction.components)


def predict_svp(problem: Problem, x: int, emp: Distribution, schedule: RegimeSchedule,
                sample_size: int = None) -> PredictionResult:
    """
    Sample variance penalization: c(x, emp) + sqrt(2 a_T / T * Var_emp(l(x, xi)))

    The formula is always evaluated. condition_ok only reports whether it also equals the worst
    case over the ellipsoid {q : ||q - emp||_emp^2 <= a_T / T}. The distribution
    emp + sqrt(2 a_T / T) phi_x(emp), whose cost is the value, is attached whenever the variance is
    positive, emp is interior and that point stays in the simplex.
    """
    ratio = schedule.ratio(sample_size_of(emp, sample_size))
    spread = variance(problem, x, emp)
    value = cost(problem, x, emp) + math.sqrt(2.0 * ratio * spread)
    condition_ok = dro_condition_holds(emp, ratio)
    worst_case = None
    if spread > 0 and emp.is_interior:
        shifted = emp.weights + math.sqrt(2.0 * ratio) * svp_direction(problem, x, emp).components
        if np.all(shifted >= 0):
            worst_case = Distribution(shifted)
    return PredictionResult(value=value, worst_case=worst_case, condition_ok=condition_ok)


def ellipsoid_linear_max(loss_row, p: Distribution, a_matrix, radius: float) -> Tuple[float, Distribution]:
    """
    Maximizes l^T q over {q in simplex : (q - p)^T A (q - p) <= radius} in closed form

    With gamma = l^T A^-1 l - (e^T A^-1 l)^2 / (e^T A^-1 e) the optimum is c(p) + sqrt(radius gamma),
    attained at p + sqrt(radius / gamma) (A^-1 l - (e^T A^-1 l / e^T A^-1 e) A^-1 e). The formula
    needs the ellipsoid to sit inside the simplex:
    sqrt(radius) < sigma(A) min_i min(p(i), 1 - p(i)), sigma(A)^2 being the smallest eigenvalue.

    Keyword Arguments
    loss_row -- the losses l(x, .)
    p -- interior center of the ellipsoid
    a_matrix -- symmetric positive definite d x d matrix
    radius -- nonnegative radius

    Return
    (float, Distribution) -- the maximum and the maximizer
    """
    row = np.asarray(loss_row, dtype=float).ravel()
    a_matrix = np.asarray(a_matrix, dtype=float)
    d = row.size
    if p.dimension != d or a_matrix.shape != (d, d):
        raise DimensionMismatchError(
            f"loss row of size {d}, distribution of size {p.dimension} and matrix of shape {a_matrix.shape}"
        )
    if radius < 0:
        raise NegativeRadiusError(f"the ellipsoid radius must be nonnegative, got {radius}")
    if not p.is_interior:
        raise NotInteriorError(f"the ellipsoid center must be interior, got {p}")
    if not np.allclose(a_matrix, a_matrix.T, rtol=1e-12, atol=1e-14):
        raise SingularMatrixError("the ellipsoid matrix must be symmetric")
    smallest_eigenvalue = float(np.min(np.linalg.eigvalsh(a_matrix)))
    if smallest_eigenvalue <= 0:
        raise SingularMatrixError(f"the ellipsoid matrix is not positive definite (eigenvalue {smallest_eigenvalue})")
    centre_value = float(np.dot(row, p.weights))
    if radius == 0 or float(np.max(row)) == float(np.min(row)):
        return centre_value, p
    weights = p.weights
    bound = math.sqrt(smallest_eigenvalue) * float(np.min(np.minimum(weights, 1.0 - weights)))
    if not math.sqrt(radius) < bound:
        raise EllipsoidConditionError(math.sqrt(radius), bound)
    ones = np.ones(d)
    try:
        inverse_loss = np.linalg.solve(a_matrix, row)
        inverse_ones = np.linalg.solve(a_matrix, ones)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"the ellipsoid matrix cannot be inverted: {e}")
    projection = float(np.dot(ones, inverse_loss)) / float(np.dot(ones, inverse_ones))
    gamma = float(np.dot(row, inverse_loss)) - projection * float(np.dot(ones, inverse_loss))
    if gamma <= 0:
        return centre_value, p
    maximizer = weights + math.sqrt(radius / gamma) * (inverse_loss - projection * inverse_ones)
    return centre_value + math.sqrt(radius * gamma), Distribution(maximizer)


def predict(problem: Problem, kind: PredictorKind, x: int, emp: Distribution, schedule: RegimeSchedule = None,
            sample_size: int = None) -> PredictionResult:
    """
    Evaluates one of the four predictors

    The KL radius comes from the schedule (which must then be an exponential rate), the SVP
    radius a_T / T from the schedule at T = sample size.
    """
    kind = PredictorKind.parse(kind)
    if kind is PredictorKind.SAA:
        return predict_saa(problem, x, emp)
    if kind is PredictorKind.ROBUST:
        return predict_robust(problem, x)
    if schedule is None:
        raise ConfigError(f"the {kind.value} predictor needs a schedule", field='schedule')
    T = sample_size_of(emp, sample_size)
    if kind is PredictorKind.KL:
        return predict_kl_dual(problem, x, emp, schedule.kl_radius(T))
    return predict_svp(problem, x, emp, schedule, sample_size=T)


def predictor_values(problem: Problem, kind: PredictorKind, weights: np.ndarray, T: int,
                     schedule: RegimeSchedule = None) -> np.ndarray:
    """
    Predicted costs of every decision for every row of an (N, d) weight array, shape (N, n)

    This is the batch form the prescriptors and the deviation lab work with.
    """
    kind = PredictorKind.parse(kind)
    weights = np.atleast_2d(np.asarray(weights, dtype=float))
    costs = cost_matrix(problem, weights)
    if kind is PredictorKind.SAA:
        return costs
    if kind is PredictorKind.ROBUST:
        return np.broadcast_to(np.max(problem.loss.values, axis=1), costs.shape).copy()
    if schedule is None:
        raise ConfigError(f"the {kind.value} predictor needs a schedule", field='schedule')
    if kind is PredictorKind.SVP:
        ratio = schedule.ratio(T)
        return costs + np.sqrt(2.0 * ratio * variance_matrix(problem, weights, costs))
    r = schedule.kl_radius(T)
    values = np.empty_like(costs)
    for index, row_weights in enumerate(weights):
        p = Distribution(row_weights)
        for x in range(problem.loss.n_decisions):
            values[index, x] = predict_kl_dual(problem, x, p, r).value
    return values
