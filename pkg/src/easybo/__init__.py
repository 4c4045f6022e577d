"""Asynchronous batch Bayesian optimization with hallucination penalization."""

from .acq_optimizer import InnerOptConfig, maximize_acq
from .acquisition import (
    AcqKind,
    AcquisitionSpec,
    acq_easybo,
    acq_ei,
    acq_lcb,
    acq_pbo,
    acq_phcbo,
    acq_ucb,
    penalty_hc,
    sample_weight,
)
from .benchmarks import FomSpec, Problem, builtin_problems, fom_evaluate, get_problem
from .gp import BoxDomain, Dataset, GpModel, KernelHyperparams, NumericalFailure, fit, hallucinate, kernel_se, posterior
from .harness import ExperimentConfig, SummaryStats, compare_report, run_experiment
from .scheduler import RunRecord, SchedulerOptions, run_async, run_sequential, run_sync_batch

__version__ = "0.1.0"
