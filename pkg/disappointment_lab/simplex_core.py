# for type references to own class
from __future__ import annotations

import itertools
import logging
import math
from fractions import Fraction
from typing import Iterator, Tuple

import numpy as np
from scipy.special import gammaln, rel_entr, xlogy

from . import settings
from .errors import (
    DimensionMismatchError, InvalidDistributionError, LatticeTooLargeError, NotInteriorError
)

logger = logging.getLogger(__name__)


class Distribution:
    """
    A point of the probability simplex over d scenarios

    Weights are validated and renormalized on construction: a sum that is off by less than
    settings.NORMALIZATION_REJECT is treated as float dust and divided out, anything further
    away is rejected. The weight vector is read-only afterwards.
    """

    def __init__(self, weights):
        weights = np.array(weights, dtype=float).ravel()
        if weights.size == 0:
            raise InvalidDistributionError("a distribution needs at least one weight")
        if not np.all(np.isfinite(weights)):
            raise InvalidDistributionError(f"weights must be finite, got {weights.tolist()}")
        if np.any(weights < -settings.NORMALIZATION_TOLERANCE):
            raise InvalidDistributionError(f"weights must be nonnegative, got {weights.tolist()}")
        weights = np.maximum(weights, 0.0)
        total = float(weights.sum())
        if abs(total - 1.0) > settings.NORMALIZATION_REJECT:
            raise InvalidDistributionError(f"weights sum to {total}, not 1")
        self._set_weights(weights / total)

    def _set_weights(self, weights):
        weights.setflags(write=False)
        self._weights = weights

    @classmethod
    def uniform(cls, dimension: int) -> Distribution:
        return cls(np.full(dimension, 1.0 / dimension))

    @classmethod
    def vertex(cls, dimension: int, index: int) -> Distribution:
        weights = np.zeros(dimension)
        weights[index] = 1.0
        return cls(weights)

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def dimension(self) -> int:
        return self._weights.size

    @property
    def support(self) -> np.ndarray:
        return self._weights > 0

    @property
    def is_interior(self) -> bool:
        return bool(np.all(self._weights > 0))

    def __len__(self):
        return self.dimension

    def __str__(self):
        return f"Distribution([{', '.join(f'{weight:.6g}' for weight in self._weights)}])"

    __repr__ = __str__


class EmpiricalDistribution(Distribution):
    """
    The empirical distribution of T samples, stored through its integer counts

    Weights are counts / T exactly, no renormalization is applied on top.
    """

    def __init__(self, counts):
        counts = tuple(int(count) for count in counts)
        if len(counts) == 0:
            raise InvalidDistributionError("an empirical distribution needs at least one count")
        if any(count < 0 for count in counts):
            raise InvalidDistributionError(f"counts must be nonnegative, got {counts}")
        sample_size = sum(counts)
        if sample_size < 1:
            raise InvalidDistributionError("an empirical distribution needs a sample size of at least 1")
        self.counts = counts
        self.sample_size = sample_size
        self._set_weights(np.array(counts, dtype=float) / sample_size)

    def fractions(self) -> Tuple[Fraction, ...]:
        """The weights as exact rationals counts / T"""
        return tuple(Fraction(count, self.sample_size) for count in self.counts)

    @property
    def key(self) -> Tuple[int, ...]:
        return self.counts

    def __str__(self):
        return f"EmpiricalDistribution(counts={list(self.counts)}, T={self.sample_size})"

    __repr__ = __str__


class SimplexDelta:
    """A difference of two distributions: a vector whose components sum to 0"""

    def __init__(self, components):
        components = np.array(components, dtype=float).ravel()
        if not np.all(np.isfinite(components)):
            raise InvalidDistributionError(f"delta components must be finite, got {components.tolist()}")
        scale = max(1.0, float(np.abs(components).sum()))
        if abs(float(components.sum())) > settings.NORMALIZATION_TOLERANCE * scale:
            raise InvalidDistributionError(
                f"delta components must sum to 0, got a sum of {float(components.sum())}"
            )
        components.setflags(write=False)
        self.components = components

    @classmethod
    def between(cls, q: Distribution, p: Distribution) -> SimplexDelta:
        """The difference q - p"""
        _check_same_dimension(q, p)
        return cls(q.weights - p.weights)

    def __mul__(self, scalar):
        return SimplexDelta(self.components * float(scalar))

    __rmul__ = __mul__

    def __str__(self):
        return f"SimplexDelta([{', '.join(f'{component:.6g}' for component in self.components)}])"

    __repr__ = __str__


def _check_same_dimension(p, q):
    if len(p) != len(q):
        raise DimensionMismatchError(f"dimension mismatch: {len(p)} versus {len(q)}")


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """
    Relative entropy I(p, q) = sum_i p(i) log(p(i) / q(i))

    Uses 0 log(0 / q) = 0 and p log(p / 0) = +inf, so the result is math.inf exactly when the
    support of p is not contained in the support of q.
    """
    _check_same_dimension(p, q)
    value = float(np.sum(rel_entr(p.weights, q.weights)))
    if math.isinf(value):
        return math.inf
    return max(value, 0.0)


def ellipsoid_norm_sq(delta: SimplexDelta, p: Distribution) -> float:
    """Local ellipsoid norm 1/2 sum_i delta(i)^2 / p(i) at an interior p"""
    if not isinstance(delta, SimplexDelta):
        delta = SimplexDelta(delta)
    _check_same_dimension(delta.components, p)
    if not p.is_interior:
        raise NotInteriorError(f"the ellipsoid norm needs an interior distribution, got {p}")
    return 0.5 * float(np.sum(delta.components ** 2 / p.weights))


def lattice_size(T: int, d: int) -> int:
    """Number of empirical distributions reachable with T samples over d scenarios"""
    return math.comb(T + d - 1, d - 1)


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _check_lattice(T, d, cap):
    if T < 1:
        raise InvalidDistributionError(f"the sample size must be at least 1, got {T}")
    if d < 2:
        raise DimensionMismatchError(f"the lattice needs at least 2 scenarios, got {d}")
    size = lattice_size(T, d)
    if size > cap:
        raise LatticeTooLargeError(size, cap)
    return size


def iter_lattice_counts(T: int, d: int, cap: int = settings.DEFAULT_LATTICE_CAP) -> Iterator[Tuple[int, ...]]:
    """Count vectors of the lattice in enumeration order, without wrapping them"""
    _check_lattice(T, d, cap)
    return _compositions(T, d)


def enumerate_lattice(T: int, d: int, cap: int = settings.DEFAULT_LATTICE_CAP,
                      start: int = 0, stop: int = None) -> Iterator[EmpiricalDistribution]:
    """
    Streams every composition of T into d nonnegative parts exactly once

    The order is fixed: count vectors ascend lexicographically, so the first scenario varies
    slowest. For T=2, d=2 this yields (0,2), (1,1), (2,0). start and stop select a range of that
    order, which is how the lattice is split between workers.

    Keyword Arguments
    T -- the sample size
    d -- the number of scenarios
    cap -- refuse lattices with more points than this
    start -- first rank to yield
    stop -- rank to stop before, None for the end of the lattice

    Return
    iterator -- EmpiricalDistribution objects
    """
    counts = iter_lattice_counts(T, d, cap)
    return (EmpiricalDistribution(composition) for composition in itertools.islice(counts, start, stop))


def lattice_blocks(T: int, d: int, cap: int = settings.DEFAULT_LATTICE_CAP,
                   block_size: int = settings.LATTICE_BLOCK_SIZE) -> Iterator[np.ndarray]:
    """The lattice in enumeration order, cut into (N, d) integer arrays of block_size rows"""
    counts = iter_lattice_counts(T, d, cap)
    while True:
        block = list(itertools.islice(counts, block_size))
        if not block:
            return
        yield np.array(block, dtype=np.int64)


def lattice_array(T: int, d: int, cap: int = settings.DEFAULT_LATTICE_CAP,
                  start: int = 0, stop: int = None) -> np.ndarray:
    counts = iter_lattice_counts(T, d, cap)
    return np.array(list(itertools.islice(counts, start, stop)), dtype=np.int64).reshape(-1, d)


def multinomial_log_probs(counts: np.ndarray, p: Distribution) -> np.ndarray:
    """
    Vectorized multinomial log-probabilities for the rows of an (N, d) count array

    A positive count on a zero-weight scenario gives -inf, which is a value and not an error.
    """
    counts = np.atleast_2d(np.asarray(counts))
    if counts.shape[1] != p.dimension:
        raise DimensionMismatchError(f"dimension mismatch: {counts.shape[1]} versus {p.dimension}")
    sample_sizes = counts.sum(axis=1)
    # log-gamma keeps T! finite far beyond T = 170
    log_coefficients = gammaln(sample_sizes + 1) - np.sum(gammaln(counts + 1), axis=1)
    return log_coefficients + np.sum(xlogy(counts, p.weights), axis=1)


def multinomial_log_prob(e: EmpiricalDistribution, p: Distribution) -> float:
    """log of T! / prod(c_i!) * prod(p(i)^c_i), the probability of drawing the counts of e under p"""
    _check_same_dimension(e, p)
    return float(multinomial_log_probs(np.array([e.counts]), p)[0])


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Counter-based generator keyed by (seed, stream)

    Each Monte Carlo block draws from its own stream so that blocks can run in any order and
    still reproduce the same numbers.
    """
    sequence = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(sequence))


def sample_counts(p: Distribution, T: int, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """n independent multinomial(T, p) count vectors as an (n, d) array"""
    if T < 1:
        raise InvalidDistributionError(f"the sample size must be at least 1, got {T}")
    return rng_for(seed, stream).multinomial(T, p.weights, size=n).astype(np.int64)


def sample_empirical(p: Distribution, T: int, seed: int, stream: int = 0) -> EmpiricalDistribution:
    """The empirical distribution of T i.i.d. draws from p, deterministic given seed and stream"""
    return EmpiricalDistribution(sample_counts(p, T, 1, seed, stream)[0])
