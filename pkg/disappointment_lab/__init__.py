from .decision_problem import (
    LossMatrix, Problem, cost, covariance, load_scenario, min_variance_minimizer, parse_scenario, variance
)
from .deviation_lab import (
    default_importance_shift, disappointment_exact, disappointment_importance, disappointment_mc,
    finite_sample_guarantee, rate_curve, report_curve, theoretical_rate_saa
)
from .errors import ComputationError, DisappointmentLabError, InputError
from .models import (
    DisappointmentReport, EstimationMethod, FiniteSampleCheck, Mode, PredictionResult, PredictorKind,
    PrescriptionResult
)
from .predictors import (
    dro_condition_holds, ellipsoid_linear_max, predict, predict_kl_dual, predict_kl_primal_grid, predict_robust,
    predict_saa, predict_svp, svp_direction, svp_worst_case
)
from .prescriptors import convexity_certificate, convexity_certificate_at_ratio, prescribe, prescription_gap_bound
from .schedules import CustomTable, ExponentialRate, Logarithmic, PowerLaw, RegimeSchedule, Superlinear
from .simplex_core import (
    Distribution, EmpiricalDistribution, SimplexDelta, ellipsoid_norm_sq, enumerate_lattice, kl_divergence,
    lattice_size, multinomial_log_prob, sample_empirical
)
