"""Harmonic mean curvature flow of star-shaped surfaces of revolution.

Explicit finite-difference evolution of the generating curve r = f(x,t)
under the speed G/H (+ eps*H regularization), with dual tip charts,
runtime monitors for every provably monotone or bounded quantity, and a
batch CLI for presets, sweeps and plots.
"""

from .geometry import (
    CurvatureField,
    MeanConvexityError,
    ProfileError,
    ProfileGrid,
    TipChart,
    TipChartError,
    ValidationReport,
    build_tip_chart,
    derivatives,
    gauss_bonnet_integral,
    mean_curvature_sq_integral,
    principal_curvatures,
    read_profile,
    support_inner,
    surface_area,
    validate_initial,
    write_profile,
)
from .speeds import (
    FlowParams,
    SpeedUndefinedError,
    attach_speed,
    kappa,
    kappa_eps,
    levelset_speed_F1,
    levelset_speed_F1_tracedet,
    modified_speed,
    shape_operator_eigenvalues,
)
from .engine import (
    EvolveResult,
    StepCollapseError,
    evolve,
    rhs_interior,
    rhs_tip,
    stable_dt,
    step,
)
from .diagnostics import (
    DiagRecord,
    assert_bounds,
    assert_monotone,
    hmin_persistence,
    read_series,
    record,
    roundness_trend,
    sphere_oracle,
    write_series,
    write_summary,
)

__version__ = "0.1.0"
