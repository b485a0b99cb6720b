"""Phase retrieval from magnitude measurements.

Recovery of a signal x from b = |A x| by leading-eigenvalue ascent over the
lifted feasible set (after column standardization of the frame) and by
factored rank-r alternating direction iterations, together with spectral
initialization, brute-force oracles for small instances, and a reproducible
experiment harness.
"""

from .frames import (
    Frame,
    MeasurementSet,
    StandardizationResult,
    ConvergenceError,
    BudgetError,
    gaussian_frame,
    bernoulli_frame,
    special_frame,
    two_basin_frame,
    trace_varying_frame,
    fourier_frame,
    measure,
    qr_standardize,
    equal_norm_standardize,
    check_rank_star,
    save_frame_txt,
    load_frame_txt,
    save_measurement_json,
    load_measurement_json,
)
from .operators import DenseMap, FourierMap, fourier_operator, as_linear_map
from .lifted import (
    GramCache,
    apply_lift,
    apply_lift_adjoint,
    project_affine,
    psd_clamp,
    psd_sigma_boost,
    matched_beta,
    lifted_adm,
    feasibility_pocs,
    basin_check,
    lifted_success,
    LiftedReport,
)
from .factored import (
    z_update,
    run_rank1_adm,
    run_projected_adm,
    run_rankr_adm,
    SpectralInitConfig,
    spectral_init,
    sign_recovery,
    recovery_error,
    outer_product_error,
    truncated_moment_stats,
    alternating_phase_fit,
    fixed_point_gap,
)
from .oracle import (
    SolutionSet,
    InjectivityResult,
    enumerate_solutions,
    check_injectivity,
    enumerate_feasible,
    grid_argmin_certificate,
)

__version__ = "0.1.0"
