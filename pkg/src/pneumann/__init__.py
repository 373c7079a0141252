"""Radial solver for supercritical Neumann p-Laplacian problems on the
unit ball.

The pipeline: shift the nonlinearity so it is monotone, truncate it to
subcritical growth, minimize the energy over the Nehari set intersected
with the cone of nondecreasing profiles, certify the result (ray maxima,
nonconstancy, phase-plane bounds), and cross-check against an independent
shooting-method oracle.  A sweep driver reproduces the large-exponent
limit profile G.
"""

from .errors import (
    ConvergedToConstant,
    MaxIterations,
    NoBracket,
    NonConvergence,
    NoSignChange,
    OutOfRange,
    PneumannError,
    ValidationError,
)
from .grid import (
    RadialFunction,
    RadialGrid,
    build_grid,
    derivative,
    gradient_lp,
    integrate,
    lq_norm,
    project_cone,
    sup_norm,
    w1p_norm,
)
from .nonlinearity import (
    NonlinearitySpec,
    TruncatedNonlinearity,
    TruncationParams,
    a_priori_constants,
    cone_window,
    default_ell,
    ell_range,
    pure_power,
    shift,
    truncate,
    truncate_pure_power,
)
from .operators import (
    EnergyReport,
    InnerSolverConfig,
    energy,
    energy_report,
    residual,
    residual_norm,
    solve_T,
    tilde_T,
)
from .minimax import (
    DescentConfig,
    NehariPoint,
    SolveResult,
    euler_flow,
    mp_geometry_sample,
    nehari_descent,
    nehari_h,
    nonconstancy_certificate,
    ray_max_check,
)
from .shooting import (
    PhaseDiagnostics,
    ShootState,
    SweepRow,
    find_nonconstant,
    limit_sweep,
    phase_diagnostics,
    shoot,
    solve_G,
)

__version__ = "0.1.0"
