"""Return-time statistics for dynamical systems on tori."""

from types import ModuleType as _ModuleType

from .approx import BumpPair, build_bump, cr_norm_estimate, measure_decorrelation, shell_measure_bound, shell_measure_exact
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import merge_reports, run_experiment, write_outputs
from .returns import (
    DelaySchedule,
    KappaSchedule,
    ReturnBatch,
    ReturnSequence,
    count_process,
    delayed_return_sequence,
    fiberwise_return_sequence,
    first_return,
    kappa_delayed_sequence,
    kappa_schedule_from_visits,
    rectangle_return_compose,
    return_sequence,
)
from .rng import RngStream, stream_for
from .stats import (
    EmpiricalLaw,
    LawReport,
    NoVerdictError,
    d_metric,
    factorial_moment_check,
    hitting_return_pair,
    kac_check,
    ks_exponential,
    short_return_mass,
)
from .systems import (
    CAT_MATRIX,
    GOLDEN,
    AutomorphismPowers,
    Ball,
    Box,
    Doubling,
    FullSpace,
    IntegerStep,
    LabeledUnion,
    Product,
    Rotation,
    SkewProduct,
    SkewShift,
    ToralAuto,
    TranslationFlow,
    TrigPoly,
    diophantine_check,
    iterate,
    rectangle,
    sample_in_target,
    target_measure,
)

__all__ = sorted(n for n, v in globals().items() if not n.startswith("_") and not isinstance(v, _ModuleType))
