"""Anisotropic geometry toolkit.

Norms and their polars, Wulff shapes, anisotropic distance transforms on
voxel grids, discrete anisotropic curvature on meshes, and a verification
harness for the exact volume identities and erosion/bubbling laws they
satisfy.
"""

from .errors import (
    AnisoError,
    ConfigError,
    ConvergenceError,
    GeometryError,
    InsufficientDataError,
    InvalidArgumentError,
    InvalidMeshError,
    MarginError,
    NonUniqueMaximizerError,
    SingularPointError,
    UnsupportedOperationError,
)
from .norms import (
    ConvexityCertificate,
    DualNorm,
    EllipseNorm,
    EuclideanNorm,
    L1Norm,
    LinfNorm,
    Norm,
    SmoothedMaxNorm,
    WeightedLpNorm,
    convexity_certificate,
    parse_norm,
    sphere_sup,
    unit_sphere_samples,
)
from .wulff import (
    Polytope,
    WulffShape,
    boundary_mesh,
    crystalline_polytope,
    icosphere,
    monte_carlo_volume,
    polygon_svg,
    wulff_perimeter,
    wulff_volume,
)
from .mesh import (
    CurvatureField,
    TriSurface,
    VectorField,
    affine_field,
    aniso_area,
    aniso_normal,
    constant_field,
    curvature,
    enclosed_volume,
    first_variation,
    good_set_mask,
    identity_field,
    lambda_of,
    lp_deviation,
)
from .grid import (
    Difference,
    DistanceField,
    Intersection,
    Translate,
    Union,
    VoxelSet,
    chamfer_factor,
    components,
    cut_locus_mask,
    dilate,
    distance_from_set,
    distance_transform,
    erode,
    rasterize,
    reach_along,
    reach_along_batch,
    stencil_offsets,
)
from .shapes import (
    GeneratedShape,
    ShapeSpec,
    gen,
    norm_sequence,
    parse_shape,
    perturbation_pattern,
)
from .verify import (
    PowerLawFit,
    VerificationReport,
    calibrate_c,
    check_disintegration,
    check_erosion_laws,
    check_minkowski_law,
    check_wulff_identity,
    fit_power_law,
    run_bubbling,
)

__version__ = "0.1.0"
