"""Periodic Lorentz gas laboratory.

Simulates the billiard collision map among periodic circular scatterers,
streams the self-intersection count V_n, and measures/fits the constants of
its asymptotics (mean ~ c0 n log n, variance ~ c n^2) together with their
analytic ingredients.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateMatrix,
    DomainError,
    GrazingAnomaly,
    HorizonExceeded,
    InsufficientData,
    MethodDisagreement,
    OverlapError,
    QuadratureNonConvergence,
)
from .geometry import (
    BilliardTable,
    Corridor,
    Disk,
    FiniteHorizonReport,
    corridor_check,
    default_table,
    load_table,
    table_from_json,
    validate_disjoint,
)
from .dynamics import (
    CollisionState,
    FlightRecord,
    Trajectory,
    audit_invariants,
    next_collision,
    sample_stationary,
    sample_uniform_q,
    trajectory,
)
from .selfintersect import VisitCounter, brute_force_V, v_series
from .walks import LazyLatticeWalk
from .estimators import (
    ConstantFit,
    DiffusionMatrix,
    EnsembleSummary,
    ReturnCurve,
    estimate_sigma2_empirical,
    estimate_sigma2_greenkubo,
    fit_constants,
    return_probability,
    run_ensemble,
)
from .constants import (
    ConstantsReport,
    check_J_methods,
    integral_I,
    integral_J,
    integral_simplex_check,
    li2,
    perimeter_factor,
    theoretical_constants,
)
from .reference import ReferenceBilliard, RetraceReport, retrace
