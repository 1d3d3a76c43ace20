"""Wasserstein measure coresets built by stochastic semi-discrete optimal transport."""

from .measures import (
    DataError,
    PointSet,
    Sampler,
    EmpiricalSampler,
    StreamSampler,
    SyntheticSampler,
    PushforwardSampler,
    SyntheticSpec,
    StreamExhausted,
    load_csv,
    make_sampler,
    pushforward,
    banana_map,
)
from .semidiscrete import (
    SiteSet,
    DualState,
    CellAssignment,
    assign,
    dual_objective,
    dual_gradient_v,
    solve_dual,
    estimate_wp,
    stochastic_wp,
)
from .sinkhorn import sinkhorn_plan, sinkhorn_divergence
from .solvers import (
    SolverConfig,
    SolverTrace,
    CoresetResult,
    init_sites,
    w1_step,
    w2_step,
    build_coreset,
)
from .exact_ot import TransportPlan, exact_wp
from .metrics import KernelSpec, mmd, coreset_condition_check
from .baselines import herding_baseline, herding_indices, uniform_baseline, uniform_indices
from .tasks import (
    TaskReport,
    lloyd,
    kmeans_task,
    svm_task,
    laplace_posterior,
    logreg_posterior_task,
    gaussian_kl,
)

__version__ = "0.1.0"

__all__ = [
    "DataError", "PointSet", "Sampler", "EmpiricalSampler", "StreamSampler", "SyntheticSampler",
    "PushforwardSampler", "SyntheticSpec", "StreamExhausted", "load_csv", "make_sampler", "pushforward",
    "banana_map", "SiteSet", "DualState", "CellAssignment", "assign", "dual_objective", "dual_gradient_v",
    "solve_dual", "estimate_wp", "stochastic_wp", "sinkhorn_plan", "sinkhorn_divergence", "SolverConfig",
    "SolverTrace", "CoresetResult", "init_sites", "w1_step", "w2_step", "build_coreset", "TransportPlan",
    "exact_wp", "KernelSpec", "mmd", "coreset_condition_check", "herding_baseline", "herding_indices",
    "uniform_baseline", "uniform_indices", "TaskReport", "lloyd", "kmeans_task", "svm_task",
    "laplace_posterior", "logreg_posterior_task", "gaussian_kl",
]
