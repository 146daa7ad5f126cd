"""Mean-field interacting nonlinear Hawkes processes: simulation, limits and fluctuations."""

from .config import ExperimentConfig, load_config
from .cox import CoxApproximation, build_cox, compare_cox_vs_hawkes
from .fluctuation import (
    FluctuationPaths,
    LimitFluctuationSample,
    compute_fluctuations,
    sample_limit,
    sample_limit_batch,
    sample_limit_multiclass,
)
from .harness import TestReport, emit_regime_panels, run_verification_suite
from .limit import LimitSolution, solve_limit, solve_limit_multiclass
from .model import (
    EventPaths,
    GridFunction,
    ModelSpec,
    MultiClassSpec,
    TimeGrid,
    builtin_model,
    fixed_points,
)
from .seeding import SeedPolicy
from .simulate import (
    SimResult,
    simulate_coupled_poisson,
    simulate_ensemble,
    simulate_hawkes,
    simulate_hawkes_multiclass,
)
from .stats import two_sample_ks
from .volterra import (
    apply_phi,
    apply_psi,
    apply_xi,
    build_kappa,
    build_resolvent,
    solve_volterra,
)

__version__ = "0.1.0"
