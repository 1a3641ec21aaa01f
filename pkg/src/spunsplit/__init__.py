"""Exact multiflow decomposition on series-parallel digraphs."""

from .core import (
    Arc,
    Digraph,
    GraphError,
    NotSeriesParallelError,
    Rational,
    SpTree,
    SpTreeNode,
    rat,
    recognize_sp,
)
from .instance import (
    Commodity,
    DemandShareVector,
    Instance,
    Multiflow,
    all_demand_shares,
    check_conservation,
    check_share_recurrences,
    demand_shares,
    total_flow,
)
from .align import (
    AlignmentError,
    AlignmentMap,
    InfeasibleCut,
    align_instance,
    feasible_integer_multiflow,
    find_mandatory_node,
    integer_decomposition,
    is_aligned,
    map_flow_back,
    multiflow_from_transshipment,
    solve_transshipment,
    to_transshipment,
)
from .cuts import CutCertificate, EnumerationCapError, check_cut
from .almost import (
    AlmostUnsplittableFlow,
    SwapError,
    flow_carrying_path,
    make_almost_unsplittable,
    reduce_shared_fractional,
    swap,
)
from .decompose import (
    BoundReport,
    ConvexDecomposition,
    UnsplittableRouting,
    VerificationReport,
    decompose_unsplittable,
    decomposition_hash,
    lambda_coefficients,
    lambda_coefficients_p_eq_r,
    mu_coefficients,
    refine_convex,
    refine_linear,
    verify_decomposition,
)
from .oracle import (
    ImpossibilityCertificate,
    OracleCapError,
    enumerate_paths,
    exhaustive_feasibility,
    matrix_decomposability_probe,
)

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "Digraph",
    "GraphError",
    "NotSeriesParallelError",
    "Rational",
    "SpTree",
    "SpTreeNode",
    "rat",
    "recognize_sp",
    "Commodity",
    "DemandShareVector",
    "Instance",
    "Multiflow",
    "all_demand_shares",
    "check_conservation",
    "check_share_recurrences",
    "demand_shares",
    "total_flow",
    "AlignmentError",
    "AlignmentMap",
    "InfeasibleCut",
    "align_instance",
    "feasible_integer_multiflow",
    "find_mandatory_node",
    "integer_decomposition",
    "is_aligned",
    "map_flow_back",
    "multiflow_from_transshipment",
    "solve_transshipment",
    "to_transshipment",
    "CutCertificate",
    "EnumerationCapError",
    "check_cut",
    "AlmostUnsplittableFlow",
    "SwapError",
    "flow_carrying_path",
    "make_almost_unsplittable",
    "reduce_shared_fractional",
    "swap",
    "BoundReport",
    "ConvexDecomposition",
    "UnsplittableRouting",
    "VerificationReport",
    "decompose_unsplittable",
    "decomposition_hash",
    "lambda_coefficients",
    "lambda_coefficients_p_eq_r",
    "mu_coefficients",
    "refine_convex",
    "refine_linear",
    "verify_decomposition",
    "ImpossibilityCertificate",
    "OracleCapError",
    "enumerate_paths",
    "exhaustive_feasibility",
    "matrix_decomposability_probe",
]
