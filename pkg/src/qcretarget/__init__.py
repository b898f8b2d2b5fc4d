"""Content-aware image retargeting through quasiconformal mesh warps.

A prescribed per-face dilatation field encodes where distortion should go;
a constrained sparse elliptic solve reconstructs the matching foldover-free
warp; the image is pulled back through the warp's exact piecewise-affine
inverse.
"""

from .beltrami import (
    BeltramiField,
    CoefficientField,
    DistortionInfo,
    FaceLinearParts,
    beltrami_of_map,
    coefficients_from_mu,
    distortion_info,
    face_linear_parts,
    jacobian_of_map,
)
from .errors import (
    ConstraintRankWarning,
    CoverageError,
    DegenerateFaceError,
    ExtremalRequiredError,
    FoldoverError,
    InputError,
    LabelError,
    RetargetError,
    SolverError,
)
from .geometry import (
    BoundaryTag,
    LabelSet,
    Mesh,
    Point2,
    RegionModel,
    build_region_model,
    build_regular_mesh,
    compute_stripes,
    faces_for_polygon,
    faces_for_polyline,
    object_span,
)
from .pipeline import (
    JobSpec,
    RetargetResult,
    parse_labels,
    retarget,
    run_retarget,
    self_check,
)
from .prescribe import (
    ExtremalParams,
    RetargetConfig,
    extremal_params,
    prescribe_even,
    prescribe_extremal,
    prescribe_strong,
    prescribe_weak,
    scaling_mu,
)
from .resample import (
    PiecewiseAffineMap,
    RasterImage,
    build_inverse_map,
    resample,
)
from .solver import (
    ConstraintSet,
    RecoveredParams,
    SparseSystem,
    WarpField,
    apply_boundary_conditions,
    assemble_laplacian,
    augment_chessboard_constraints,
    augment_deformation_constraints,
    constraints_from_regions,
    divergence,
    laplacian_matrix,
    solve,
)

__version__ = "0.1.0"
