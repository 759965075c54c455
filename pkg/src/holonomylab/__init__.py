"""Numerical laboratory for parallel transport and holonomy of metric connections.

Compute parallel transports along loops in a coordinate chart, estimate the
holonomy Lie algebra at a basepoint, classify it against a catalog of closed
connected rotation subgroups up to conjugation, and verify that the holonomy
class of a convergent family of metrics can only become more special in the
limit.
"""

from .families import FAMILY_NAMES, builtin_family
from .geometry import (
    ChartDomain,
    ConnectionField,
    MetricFamily,
    MetricField,
    c0_connection_distance,
    c1_metric_distance,
    christoffel,
    compatibility_residual,
    curvature,
    levi_civita,
)
from .harness import (
    CSV_HEADER,
    ExperimentManifest,
    ManifestError,
    SemicontinuityReport,
    Tolerances,
    load_manifest,
    render_report,
    run_semicontinuity,
)
from .holonomy import (
    AlgebraEstimate,
    ClassificationResult,
    HolonomySample,
    classify,
    estimate_algebra,
    orthonormal_frame,
    sample_holonomy,
    small_loop_generators,
)
from .matrices import (
    DomainError,
    SqrtFrame,
    frobenius,
    operator_norm,
    principal_log,
    representing_endomorphism,
    so_residual,
    sym_sqrt,
)
from .subgroups import (
    AntisymmetryReport,
    ConjugacyClass,
    OrderVerdict,
    SubgroupSpec,
    antisymmetry_check,
    catalog,
    conjugacy_search,
    leq,
    standard_complex_structure,
)
from .transport import (
    LoopPath,
    LoopSpec,
    TransportResult,
    circle_loop,
    fourier_loop,
    loop_catalog,
    parallel_transport,
    reparametrize_smooth,
    square_loop,
    transport_convergence_table,
)

__version__ = "0.1.0"
