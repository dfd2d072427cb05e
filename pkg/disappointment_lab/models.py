# for type references to own class
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .simplex_core import Distribution


class PredictorKind(enum.Enum):
    SAA = "saa"
    ROBUST = "robust"
    KL = "kl"
    SVP = "svp"

    @classmethod
    def parse(cls, name) -> PredictorKind:
        if isinstance(name, PredictorKind):
            return name
        try:
            return cls(f"{name}".strip().lower())
        except ValueError:
            raise ConfigError(
                f"unknown predictor <{name}>, expected one of {[kind.value for kind in cls]}", field='predictor'
            )


@dataclass(frozen=True)
class PredictionResult:
    value: float
    worst_case: Optional[Distribution] = None
    dual_alpha: Optional[float] = None
    condition_ok: Optional[bool] = None

    def __str__(self):
        return (
            f"value=[{self.value}] worst_case=[{self.worst_case}] dual_alpha=[{self.dual_alpha}] "
            f"condition_ok=[{self.condition_ok}]"
        )


@dataclass(frozen=True)
class PrescriptionResult:
    decision: int
    value: float
    predictor_kind: PredictorKind
    gap_lower: Optional[float] = None
    gap_upper: Optional[float] = None

    def __str__(self):
        return (
            f"predictor=[{self.predictor_kind.value}] decision=[{self.decision}] value=[{self.value}] "
            f"gap=[{self.gap_lower}, {self.gap_upper}]"
        )


@dataclass(frozen=True)
class Mode:
    """Prediction mode tests one fixed decision, prescription mode tests the prescribed one"""
    kind: str
    decision: Optional[int] = None

    PREDICTION = "prediction"
    PRESCRIPTION = "prescription"

    @classmethod
    def prediction(cls, decision: int) -> Mode:
        return cls(cls.PREDICTION, decision)

    @classmethod
    def prescription(cls) -> Mode:
        return cls(cls.PRESCRIPTION, None)

    @property
    def is_prediction(self) -> bool:
        return self.kind == self.PREDICTION

    def __str__(self):
        return f"prediction({self.decision})" if self.is_prediction else "prescription"


@dataclass(frozen=True)
class EstimationMethod:
    name: str
    n_samples: Optional[int] = None
    std_err: Optional[float] = None
    shift: Optional[Distribution] = None
    effective_sample_size: Optional[float] = None

    EXACT = "exact"
    MONTE_CARLO = "mc"
    IMPORTANCE = "importance"

    @classmethod
    def exact(cls) -> EstimationMethod:
        return cls(cls.EXACT)

    @classmethod
    def monte_carlo(cls, n_samples, std_err) -> EstimationMethod:
        return cls(cls.MONTE_CARLO, n_samples, std_err)

    @classmethod
    def importance(cls, n_samples, std_err, shift, effective_sample_size) -> EstimationMethod:
        return cls(cls.IMPORTANCE, n_samples, std_err, shift, effective_sample_size)

    def __str__(self):
        if self.name == self.EXACT:
            return "exact"
        return f"{self.name}(n={self.n_samples}, std_err={self.std_err})"


@dataclass(frozen=True)
class DisappointmentReport:
    probability: float
    log_probability: float
    rate: float
    method: EstimationMethod
    T: int
    a_T: float
    mode: Mode
    predictor_kind: PredictorKind
    margin: float = 0.0

    @classmethod
    def from_probability(cls, probability, method, T, a_T, mode, predictor_kind, margin=0.0,
                         log_probability=None) -> DisappointmentReport:
        """
        Fills in the log-probability and the normalized rate log(p_T) / a_T

        A zero probability gets log-probability and rate -inf.
        """
        probability = min(max(float(probability), 0.0), 1.0)
        if log_probability is None:
            log_probability = math.log(probability) if probability > 0 else -math.inf
        rate = log_probability / a_T if math.isfinite(log_probability) else -math.inf
        return cls(probability, log_probability, rate, method, T, a_T, mode, predictor_kind, margin)

    def __str__(self):
        return (
            f"[DisappointmentReport {self.predictor_kind.value} {self.mode} T=[{self.T}] a_T=[{self.a_T}] "
            f"probability=[{self.probability}] rate=[{self.rate}] method=[{self.method}]]"
        )


@dataclass(frozen=True)
class FiniteSampleCheck:
    """Exact probabilities of the two finite-sample SVP events next to their guaranteed level"""
    upper_event: float
    lower_event: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.upper_event >= self.bound and self.lower_event >= self.bound

    def __str__(self):
        return f"upper_event=[{self.upper_event}] lower_event=[{self.lower_event}] bound=[{self.bound}]"
