import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp, xlogy

from . import settings
from .decision_problem import LossMatrix, Problem, cost_matrix, min_variance_minimizer, variance, variance_matrix
from .errors import ConfigError, ConvergenceError, DimensionMismatchError, SupportError
from .models import DisappointmentReport, EstimationMethod, FiniteSampleCheck, Mode, PredictorKind
from .predictors import predictor_values, svp_direction
from .prescriptors import select_decisions
from .schedules import RegimeSchedule
from .simplex_core import Distribution, lattice_blocks, lattice_size, multinomial_log_probs, sample_counts

logger = logging.getLogger(__name__)

METHOD_AUTO = "auto"
METHODS = (EstimationMethod.EXACT, EstimationMethod.MONTE_CARLO, EstimationMethod.IMPORTANCE, METHOD_AUTO)


class DisappointmentEvent:
    """
    Indicator of disappointment for a batch of count vectors drawn at sample size T

    Prediction mode tests c(x, p) > c_hat(x, emp, T) + margin, prescription mode tests
    c(x_hat, p) > c_hat*(emp, T) + margin with x_hat the prescribed decision. Both comparisons
    carry the settings.DISAPPOINTMENT_GUARD band, so ties never disappoint.
    """

    def __init__(self, problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution, T: int,
                 schedule: RegimeSchedule, margin: float = 0.0):
        if p.dimension != problem.loss.n_scenarios:
            raise DimensionMismatchError(
                f"distribution has {p.dimension} weights for {problem.loss.n_scenarios} scenarios"
            )
        if margin < 0 or not math.isfinite(margin):
            raise ConfigError(f"the margin must be a nonnegative number, got {margin}", field='margin')
        self.predictor_kind = PredictorKind.parse(predictor_kind)
        self.mode = mode
        self.T = int(T)
        self.schedule = schedule
        self.margin = float(margin)
        self.true_costs = cost_matrix(problem, p.weights)[0]
        if mode.is_prediction:
            row = problem.loss.row(mode.decision)
            self.problem = Problem(LossMatrix(row[np.newaxis, :]))
            self.true_costs = self.true_costs[[mode.decision]]
        else:
            self.problem = problem

    def __call__(self, counts: np.ndarray) -> np.ndarray:
        weights = np.asarray(counts, dtype=float) / self.T
        values = predictor_values(self.problem, self.predictor_kind, weights, self.T, self.schedule) + self.margin
        if self.mode.is_prediction:
            decisions = np.zeros(len(weights), dtype=int)
        else:
            decisions = select_decisions(values, variance_matrix(self.problem, weights))
        predicted = values[np.arange(len(weights)), decisions]
        return self.true_costs[decisions] > predicted + settings.DISAPPOINTMENT_GUARD

    def memoized(self, counts: np.ndarray) -> np.ndarray:
        """Same indicator, evaluated once per distinct count vector of the batch"""
        distinct, inverse = np.unique(counts, axis=0, return_inverse=True)
        return self(distinct)[inverse.reshape(-1)]


def _threads(threads):
    return settings.thread_count() if threads is None else int(threads)


def _ordered_map(fn: Callable, blocks: Iterable, threads: int) -> Iterator:
    """map over blocks on a thread pool, yielding results in block order"""
    if threads <= 1:
        yield from map(fn, blocks)
        return
    blocks = iter(blocks)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        while True:
            batch = list(itertools.islice(blocks, 4 * threads))
            if not batch:
                return
            yield from executor.map(fn, batch)


def _block_sizes(n_samples: int) -> List[int]:
    full, rest = divmod(n_samples, settings.MC_BLOCK_SIZE)
    return [settings.MC_BLOCK_SIZE] * full + ([rest] if rest else [])


def _check_n_samples(n_samples):
    if type(n_samples) is bool or not isinstance(n_samples, (int, np.integer)) or n_samples < 1:
        raise ConfigError(f"n_samples must be a positive integer, got <{n_samples}>", field='n_samples')
    return int(n_samples)


def _check_schedule(schedule):
    if not isinstance(schedule, RegimeSchedule):
        raise ConfigError("a schedule is needed to normalize the disappointment rate", field='schedule')
    return schedule


def _log_mass(log_weights: np.ndarray) -> float:
    log_weights = log_weights[np.isfinite(log_weights)]
    if log_weights.size == 0:
        return -math.inf
    return float(logsumexp(log_weights))


def disappointment_exact(problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution, T: int,
                         schedule: RegimeSchedule, margin: float = 0.0, cap: int = settings.DEFAULT_LATTICE_CAP,
                         threads: int = None, logger=logger) -> DisappointmentReport:
    """
    Exact disappointment probability by enumerating every empirical distribution of T samples

    Keyword Arguments
    problem -- the decision problem
    predictor_kind -- the predictor under test
    mode -- Mode.prediction(x) or Mode.prescription()
    p -- the true distribution
    T -- the sample size
    schedule -- the guarantee speed, also the predictor radius
    margin -- additive constant on the predictor
    cap -- refuse lattices with more points than this
    threads -- worker count, defaults to settings.thread_count()

    Return
    DisappointmentReport -- with an exact method and no standard error
    """
    schedule = _check_schedule(schedule)
    event = DisappointmentEvent(problem, predictor_kind, mode, p, T, schedule, margin)
    logger.info(
        f"[disappointment_lab deviation_lab.py disappointment_exact()] enumerating "
        f"{lattice_size(T, p.dimension)} lattice points for T={T}"
    )

    def block_log_mass(counts):
        return _log_mass(multinomial_log_probs(counts, p)[event(counts)])

    blocks = lattice_blocks(T, p.dimension, cap)
    block_masses = list(_ordered_map(block_log_mass, blocks, _threads(threads)))
    log_probability = min(_log_mass(np.array(block_masses)), 0.0)
    probability = math.exp(log_probability) if math.isfinite(log_probability) else 0.0
    return DisappointmentReport.from_probability(
        probability, EstimationMethod.exact(), T, schedule.a(T), mode, event.predictor_kind, margin,
        log_probability=log_probability
    )


def disappointment_mc(problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution, T: int,
                      schedule: RegimeSchedule, n_samples: int, seed: int, margin: float = 0.0,
                      threads: int = None, logger=logger) -> DisappointmentReport:
    """Plain Monte Carlo frequency of disappointment with its binomial standard error"""
    schedule = _check_schedule(schedule)
    n_samples = _check_n_samples(n_samples)
    event = DisappointmentEvent(problem, predictor_kind, mode, p, T, schedule, margin)

    def block_hits(block):
        stream, size = block
        return int(np.count_nonzero(event.memoized(sample_counts(p, T, size, seed, stream))))

    hits = sum(_ordered_map(block_hits, enumerate(_block_sizes(n_samples)), _threads(threads)))
    estimate = hits / n_samples
    std_err = math.sqrt(estimate * (1.0 - estimate) / n_samples)
    logger.info(
        f"[disappointment_lab deviation_lab.py disappointment_mc()] T={T}: {hits} hits in {n_samples} samples"
    )
    return DisappointmentReport.from_probability(
        estimate, EstimationMethod.monte_carlo(n_samples, std_err), T, schedule.a(T), mode, event.predictor_kind,
        margin
    )


def disappointment_importance(problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution, T: int,
                              schedule: RegimeSchedule, shift_q: Distribution, n_samples: int, seed: int,
                              margin: float = 0.0, threads: int = None, logger=logger) -> DisappointmentReport:
    """
    Importance-sampling estimate of the disappointment probability

    Samples are drawn from shift_q and weighted by the likelihood ratio prod_i (p(i) / q(i))^counts_i,
    taken in log space. With shift_q = p the draws and the estimate coincide with disappointment_mc.
    The effective sample size is (sum w)^2 / sum w^2 over the weights of all draws.
    """
    schedule = _check_schedule(schedule)
    n_samples = _check_n_samples(n_samples)
    if shift_q.dimension != p.dimension:
        raise DimensionMismatchError(f"shift has {shift_q.dimension} weights, the distribution {p.dimension}")
    if not shift_q.is_interior:
        raise SupportError(f"the importance shift must be interior, got {shift_q}")
    event = DisappointmentEvent(problem, predictor_kind, mode, p, T, schedule, margin)
    ratio = p.weights / shift_q.weights

    def block_sums(block):
        stream, size = block
        counts = sample_counts(shift_q, T, size, seed, stream)
        likelihood = np.exp(np.sum(xlogy(counts, ratio), axis=1))
        hits = np.where(event.memoized(counts), likelihood, 0.0)
        return float(np.sum(hits)), float(np.sum(hits * hits)), float(np.sum(likelihood)), float(
            np.sum(likelihood * likelihood)
        )

    totals = np.zeros(4)
    for sums in _ordered_map(block_sums, enumerate(_block_sizes(n_samples)), _threads(threads)):
        totals += sums
    weight_sum, weight_square_sum, likelihood_sum, likelihood_square_sum = totals
    estimate = weight_sum / n_samples
    std_err = math.sqrt(max(weight_square_sum / n_samples - estimate * estimate, 0.0) / n_samples)
    effective = likelihood_sum ** 2 / likelihood_square_sum if likelihood_square_sum > 0 else 0.0
    logger.info(
        f"[disappointment_lab deviation_lab.py disappointment_importance()] T={T}: estimate {estimate} "
        f"+- {std_err}, effective sample size {effective:.1f} of {n_samples}"
    )
    return DisappointmentReport.from_probability(
        estimate, EstimationMethod.importance(n_samples, std_err, shift_q, effective), T, schedule.a(T), mode,
        event.predictor_kind, margin
    )


def default_importance_shift(problem: Problem, mode: Mode, p: Distribution, ratio: float) -> Distribution:
    """
    The change of measure used when the lattice is too large

    Mirrors the SVP worst case towards lower costs, q = p - sqrt(2 ratio) phi_x(p), and pulls q back
    towards p until every weight is at least settings.IMPORTANCE_MIN_WEIGHT. Prescription mode uses
    the minimal-variance minimizer x*(p). A p with tiny weights is first mixed with the uniform
    distribution so that q stays interior.
    """
    floor = settings.IMPORTANCE_MIN_WEIGHT
    d = p.dimension
    centre = p.weights
    if np.min(centre) < floor:
        mixing = min(2.0 * d * floor, 1.0)
        centre = (1.0 - mixing) * centre + mixing / d
    centre_dist = Distribution(centre)
    x = mode.decision if mode.is_prediction else min_variance_minimizer(problem, p)
    if variance(problem, x, centre_dist) == 0:
        return centre_dist
    step = -math.sqrt(2.0 * ratio) * svp_direction(problem, x, centre_dist).components
    scale = 1.0
    for _ in range(64):
        shifted = centre + scale * step
        if np.min(shifted) >= floor:
            return Distribution(shifted)
        scale /= 2.0
    return centre_dist


def _resolve_method(method, T, d, cap, logger):
    if method not in METHODS:
        raise ConfigError(f"unknown method <{method}>, expected one of {list(METHODS)}", field='method')
    if method != METHOD_AUTO:
        return method
    if lattice_size(T, d) <= cap:
        return EstimationMethod.EXACT
    logger.info(
        f"[disappointment_lab deviation_lab.py report_curve()] lattice for T={T} exceeds the cap {cap}, "
        f"switching to importance sampling"
    )
    return EstimationMethod.IMPORTANCE


def report_curve(problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution,
                 schedule: RegimeSchedule, T_list: Sequence[int], method: str = METHOD_AUTO,
                 n_samples: int = settings.DEFAULT_N_SAMPLES, seed: int = None, shift_q: Distribution = None,
                 margin: float = 0.0, cap: int = settings.DEFAULT_LATTICE_CAP, threads: int = None,
                 logger=logger) -> List[DisappointmentReport]:
    """
    One DisappointmentReport per sample size, in the order of T_list

    Keyword Arguments
    method -- exact, mc, importance or auto (exact while the lattice fits the cap, else importance)
    n_samples -- samples per T for the stochastic methods
    seed -- mandatory for the stochastic methods
    shift_q -- importance shift, default_importance_shift at each T when None

    Return
    list -- DisappointmentReport objects
    """
    schedule = _check_schedule(schedule)
    reports = []
    for T in T_list:
        resolved = _resolve_method(method, T, p.dimension, cap, logger)
        if resolved != EstimationMethod.EXACT and seed is None:
            raise ConfigError(f"method {resolved} needs a seed", field='seed')
        if resolved == EstimationMethod.EXACT:
            report = disappointment_exact(
                problem, predictor_kind, mode, p, T, schedule, margin=margin, cap=cap, threads=threads, logger=logger
            )
        elif resolved == EstimationMethod.MONTE_CARLO:
            report = disappointment_mc(
                problem, predictor_kind, mode, p, T, schedule, n_samples, seed, margin=margin, threads=threads,
                logger=logger
            )
        else:
            shift = shift_q if shift_q is not None else default_importance_shift(problem, mode, p, schedule.ratio(T))
            report = disappointment_importance(
                problem, predictor_kind, mode, p, T, schedule, shift, n_samples, seed, margin=margin,
                threads=threads, logger=logger
            )
        if report.method.std_err is not None and (
                report.probability == 0
                or report.method.std_err > settings.IMPORTANCE_MAX_RELATIVE_ERROR * report.probability):
            logger.warning(
                f"[disappointment_lab deviation_lab.py report_curve()] T={T}: relative error of the "
                f"{report.method.name} estimate exceeds {settings.IMPORTANCE_MAX_RELATIVE_ERROR:.0%} "
                f"({report.probability} +- {report.method.std_err})"
            )
        reports.append(report)
    return reports


def rate_curve(problem: Problem, predictor_kind: PredictorKind, mode: Mode, p: Distribution,
               schedule: RegimeSchedule, T_list: Sequence[int], logger=logger, **options) -> List[Tuple[int, float]]:
    """(T, log(p_T) / a_T) pairs in T order; options are those of report_curve"""
    reports = report_curve(problem, predictor_kind, mode, p, schedule, T_list, logger=logger, **options)
    return [(report.T, report.rate) for report in reports]


def theoretical_rate_saa(problem: Problem, x: int, p: Distribution, level: float = None) -> float:
    """
    Lower-tail Cramer rate of the sample mean of l(x, xi) under p

        sup_{lambda <= 0} lambda m - log sum_i p(i) exp(lambda l(x, i))

    at level m, by default the mean c(x, p) where it vanishes. Levels at or above the mean give 0,
    the support minimum gives -log P(l = min) and anything below it +inf. The maximizing lambda is
    found by bisection on the derivative m - (tilted mean).

    Keyword Arguments
    problem -- the decision problem
    x -- the decision
    p -- the distribution of the scenarios
    level -- the threshold m

    Return
    float -- the rate, possibly math.inf
    """
    if p.dimension != problem.loss.n_scenarios:
        raise DimensionMismatchError(f"distribution has {p.dimension} weights for {problem.loss.n_scenarios} scenarios")
    support = p.support
    losses = problem.loss.row(x)[support]
    weights = p.weights[support]
    mean = float(np.dot(losses, weights))
    level = mean if level is None else float(level)
    lowest = float(np.min(losses))
    if level >= mean:
        return 0.0
    if level < lowest:
        return math.inf
    if level == lowest:
        return -math.log(float(np.sum(weights[losses == lowest])))
    # shifting by the minimum keeps every exponent nonpositive for lambda <= 0
    shifted = losses - lowest
    target = level - lowest

    def tilted_mean(lam):
        tilted = np.exp(lam * shifted - logsumexp(lam * shifted, b=weights)) * weights
        return float(np.dot(tilted, shifted))

    upper = 0.0
    lower = -1.0
    iterations = 0
    while tilted_mean(lower) >= target:
        upper, lower = lower, 2.0 * lower
        iterations += 1
        if iterations > settings.RATE_MAX_ITERATIONS:
            raise ConvergenceError(f"no bracket for the Cramer rate at level {level}", bracket=(lower, upper))
    while upper - lower > settings.RATE_TOLERANCE * (1.0 + abs(lower)):
        middle = 0.5 * (lower + upper)
        if tilted_mean(middle) >= target:
            upper = middle
        else:
            lower = middle
        iterations += 1
        if iterations > settings.RATE_MAX_ITERATIONS:
            raise ConvergenceError(f"Cramer rate bisection stalled at level {level}", bracket=(lower, upper))
    lam = 0.5 * (lower + upper)
    return max(float(lam * target - logsumexp(lam * shifted, b=weights)), 0.0)


def finite_sample_guarantee(problem: Problem, x: int, p: Distribution, T: int, schedule: RegimeSchedule,
                            cap: int = settings.DEFAULT_LATTICE_CAP, threads: int = None,
                            logger=logger) -> FiniteSampleCheck:
    """
    Exact probabilities of the two finite-sample SVP events

        c(x, p) <= c_V + (7K / 3)(a_T / T)
        c(x, p) >= c_V - sqrt(8 (a_T / T) Var_p) - (7K / 3)(a_T / T)

    with c_V the SVP prediction at x and K = 2 K_half, next to the level 1 - 2 exp(-a_T) both
    are guaranteed to reach.
    """
    ratio = _check_schedule(schedule).ratio(T)
    a_T = schedule.a(T)
    single = Problem(LossMatrix(problem.loss.row(x)[np.newaxis, :]))
    true_cost = cost_matrix(single, p.weights)[0, 0]
    slack = 7.0 * (2.0 * problem.loss.k_half) / 3.0 * ratio
    spread = math.sqrt(8.0 * ratio * variance(single, 0, p))
    guard = settings.DISAPPOINTMENT_GUARD

    def block_log_masses(counts):
        log_weights = multinomial_log_probs(counts, p)
        predicted = predictor_values(single, PredictorKind.SVP, counts / T, T, schedule)[:, 0]
        upper_event = true_cost <= predicted + slack + guard
        lower_event = true_cost >= predicted - spread - slack - guard
        return _log_mass(log_weights[upper_event]), _log_mass(log_weights[lower_event])

    masses = list(_ordered_map(block_log_masses, lattice_blocks(T, p.dimension, cap), _threads(threads)))
    upper_mass = math.exp(min(_log_mass(np.array([mass[0] for mass in masses])), 0.0))
    lower_mass = math.exp(min(_log_mass(np.array([mass[1] for mass in masses])), 0.0))
    check = FiniteSampleCheck(upper_mass, lower_mass, 1.0 - 2.0 * math.exp(-a_T))
    logger.debug(f"[disappointment_lab deviation_lab.py finite_sample_guarantee()] x={x} T={T}: {check}")
    return check
