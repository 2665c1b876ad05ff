"""Total-variation removal of Gamma speckle with automatic parameter selection."""
from .discrepancy import (
    DiscrepancyTarget,
    StepCoefficients,
    discrepancy_target,
    global_discrepancy,
    global_discrepancy_derivative,
    local_discrepancy_field,
    local_newton_update,
    newton_update_tau,
    smooth_tau,
    step_coefficients,
)
from .fidelity import FeasibleBox, FidelityModel, fidelity_gradient, fidelity_value, hessian_lipschitz_bound, project_box
from .grid import box_mean_filter, divergence, gradient, shrink, tv_norm
from .noise import (
    IDENTICAL,
    GammaNoise,
    apply_multiplicative_noise,
    empirical_discrepancy_mean,
    exact_discrepancy,
    expected_discrepancy,
    psnr,
    sample_gamma_field,
)
from .pgm import read_image, write_image
from .solvers import (
    RunResult,
    RunTrace,
    SolverConfig,
    SolverState,
    dp_ladm_run,
    kkt_residuals,
    ldp_ladm_run,
    plad_iterate,
    plad_run,
    relative_error,
    run,
    step_bound,
)

__version__ = "0.1.0"
