"""Numerical analysis of planar vector fields on the exterior of a disk.

Modules
-------
field      evaluation, Jacobians, spectral region scans
registry   named example fields with analytic oracle facts
flow       trajectory integration and escape classification
foliation  leaf tracing, level-set topology, half-Reeb detection
curves     circles and star-shaped closed curves
tangency   tangency counts, curve index, internal-tangency sweep
index_infinity  index at infinity via boundary flux ladders
infinity   attractor/repellor classification at infinity
verify     arc identities/inequalities and injectivity scans
cli        scenario runner with deterministic JSON reports
"""

__version__ = "0.1.0"

from .field import (  # noqa: F401
    RegionSpectrumReport,
    ScanGrid,
    Spectrum2,
    VectorField,
    evaluate,
    jacobian,
    scan_region,
    spectrum,
)
from .registry import REGISTRY, get_field, list_fields  # noqa: F401
from .flow import (  # noqa: F401
    EscapeLadder,
    FlowControls,
    LimitVerdict,
    Trajectory,
    classify_limit,
    integrate,
    integrate_batch,
    semi_trajectory_uniqueness_probe,
)
from .curves import ClosedCurve, circle, star_curve  # noqa: F401
from .foliation import (  # noqa: F401
    GridSpec,
    HalfReebReport,
    LeafArc,
    LeafTraceControls,
    LevelSetScan,
    Window,
    detect_half_reeb,
    level_components,
    trace_leaf,
    vertical_convexity_probe,
)
from .tangency import (  # noqa: F401
    TangencyPoint,
    TangencyReport,
    curve_index,
    eta_sweep,
    find_tangencies,
    tangency_report,
)
from .index_infinity import (  # noqa: F401
    ExtensionBlend,
    IndexControls,
    IndexEstimate,
    build_extension,
    compute_index,
    extension_independence_probe,
)
from .infinity import (  # noqa: F401
    InfinityControls,
    InfinityVerdict,
    TransversalLadder,
    choose_translation,
    classify_infinity,
    find_transversal_ladder,
)
from .verify import (  # noqa: F401
    ArcIntegralReport,
    InjectivityScanReport,
    RayCheckReport,
    flux_inequality_check,
    green_identity_check,
    injectivity_scan,
    sample_monotone_arcs,
    vertical_ray_check,
)
