"""Measured approximation rates for oscillating functions on the circle.

The package approximates band-limited oscillating functions by periodic
piecewise polynomials with node smoothness constraints, and measures the
sharp rates and constants of that approximation: projection residuals in
wavenumber-scaled norms, certified negative-order brackets, operator norms
of I - P, and the one-dimensional estimates (trace, moment matching,
energy splits, duality) that drive them.
"""

from .estimates import (
    AccuracyError,
    DualityReport,
    EnergySplitReport,
    HypothesisError,
    IdentityReport,
    TraceReport,
    decomposition_check,
    derivative_energy_sum,
    duality_check,
    energy_split_report,
    moment_match_poly,
    trace_constant_report,
)
from .funcspace import (
    DERIVATIVE_SUM,
    SPECTRAL,
    NormBracket,
    NormFlavorError,
    PiecewisePoly,
    SmoothnessError,
    SobolevParams,
    TrigPoly,
    TruncationError,
    fourier_of_spline,
    inner_hk,
    norm_hk,
    osc_moments,
    wave_pairings,
)
from .mesh import (
    CircleMesh,
    CoordinateMap,
    MeshError,
    MeshScale,
    RegularityReport,
    build_counterexample_mesh,
    build_uniform_circle_scale,
    check_regularity,
    mesh_from_json,
    uniform_mesh,
)
from .oscillator import (
    ApproxOscillationCert,
    BandError,
    LeakProfileError,
    OscillationCert,
    approx_oscillating,
    random_oscillating,
    validate_oscillation,
)
from .polyspace import DegenerateSpaceError, SpaceReport, SplineSpace
from .projector import (
    OperatorNormReport,
    ProjectionResult,
    operator_norm,
    project,
    residual_error,
)
from .rates import (
    RateFit,
    SpanError,
    SweepConfig,
    SweepRow,
    SweepTable,
    Verdict,
    fit_rate,
    judge,
    run_sweep,
    select_points,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
