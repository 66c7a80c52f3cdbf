"""Numerical machinery for backward equations with uniformly continuous
drivers on finite or truncated-infinite time intervals.

Layers, bottom up: adaptive quadrature, weight and modulus certificates,
time grids, deterministic final-value equations, Lipschitz regularization
of drivers, and least-squares Monte-Carlo backward induction with its
approximation-schedule and uniqueness diagnostics.  ``builtins`` names the
catalog objects the CLI exposes.
"""

from .bsde import (
    BSDESolution,
    CauchyGap,
    ConvergenceRecord,
    DiagnosticReport,
    PathEnsemble,
    RegressionSpec,
    equation_defect,
    simulate_paths,
    solve_lipschitz,
    solve_ucg,
    uniqueness_diagnostic,
)
from .config import ExperimentConfig
from .dbde import (
    ComparisonReport,
    DBDEPath,
    DBDEProblem,
    PicardSequence,
    picard_recursion,
    solve_fixed_point,
    solve_separable,
    uniqueness_bound_recursion,
    verify_comparison,
)
from .errors import (
    CauchyStalledWarning,
    CertificateViolated,
    ConfigInvalid,
    DegenerateGrid,
    DivergentIntegral,
    DominancePreconditionFailed,
    GridMismatch,
    ModulusNotPositive,
    NTooSmall,
    NoConvergence,
    NonUniqueWarning,
    NoPicardConvergence,
    QuadratureFailure,
    RegressionSingular,
    SearchBudgetExceeded,
    StrictPositivityViolated,
    UcbsdeError,
)
from .grids import TimeGrid
from .quadrature import backward_cumulative, cell_integrals, integrate
from .regularize import (
    ApproxGenerator,
    Generator,
    LinearGrowthFn,
    LipschitzReport,
    SearchSpec,
    approx_generator,
    inf_convolution,
    sup_convolution,
    sup_convolution_batch,
    sup_convolution_modulus,
    verify_lipschitz_of_approx,
)
from .weights import (
    Horizon,
    IntegrabilityReport,
    ModulusFn,
    OsgoodReport,
    WeightFn,
    bound_a_n,
    bound_b_n,
    check_integrability,
    osgood_diagnostic,
    shared_growth_constant,
)

__version__ = "0.1.0"

__all__ = [
    "ApproxGenerator",
    "BSDESolution",
    "CauchyGap",
    "CauchyStalledWarning",
    "CertificateViolated",
    "ComparisonReport",
    "ConfigInvalid",
    "ConvergenceRecord",
    "DBDEPath",
    "DBDEProblem",
    "DegenerateGrid",
    "DiagnosticReport",
    "DivergentIntegral",
    "DominancePreconditionFailed",
    "ExperimentConfig",
    "Generator",
    "GridMismatch",
    "Horizon",
    "IntegrabilityReport",
    "LinearGrowthFn",
    "LipschitzReport",
    "ModulusFn",
    "ModulusNotPositive",
    "NTooSmall",
    "NoConvergence",
    "NonUniqueWarning",
    "NoPicardConvergence",
    "OsgoodReport",
    "PathEnsemble",
    "PicardSequence",
    "QuadratureFailure",
    "RegressionSingular",
    "RegressionSpec",
    "SearchBudgetExceeded",
    "SearchSpec",
    "StrictPositivityViolated",
    "TimeGrid",
    "UcbsdeError",
    "WeightFn",
    "approx_generator",
    "backward_cumulative",
    "bound_a_n",
    "bound_b_n",
    "cell_integrals",
    "check_integrability",
    "equation_defect",
    "inf_convolution",
    "integrate",
    "osgood_diagnostic",
    "picard_recursion",
    "shared_growth_constant",
    "simulate_paths",
    "solve_fixed_point",
    "solve_lipschitz",
    "solve_separable",
    "solve_ucg",
    "sup_convolution",
    "sup_convolution_batch",
    "sup_convolution_modulus",
    "uniqueness_bound_recursion",
    "uniqueness_diagnostic",
    "verify_comparison",
    "verify_lipschitz_of_approx",
]
