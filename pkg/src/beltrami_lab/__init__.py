"""Numerical Beltrami equation: transforms, Neumann solver, first variation and the Bers metric."""
from __future__ import annotations

__version__ = "0.1.0"

from .beltrami import (
    BeltramiCoefficient,
    SolveReport,
    beltrami_residual,
    canonical_solution,
    elliptic_ratio,
    remark_fixture_slope,
    solve_inhomogeneous,
)
from .bers import (
    GluedCoefficient,
    MetricComponents,
    bers_metric,
    glue,
    hyperbolic_defect,
    simultaneous_uniformize,
)
from .exceptions import (
    BeltramiError,
    DegenerateNormalizationError,
    InvariantError,
    NonConvergenceError,
)
from .grid import (
    ComplexField,
    DiskRegion,
    GridSpec,
    SobolevSpec,
    read_field,
    sobolev_norm,
    wirtinger_dz,
    wirtinger_dzbar,
    write_field,
)
from .transforms import TransformPlan, beurling, beurling_operator_norm_probe, cauchy
from .variation import (
    cauchy_riemann_defect,
    development_residual,
    finite_difference_derivative,
    stability_check,
    theta,
)

__all__ = [name for name in dir() if not name.startswith("_")]
