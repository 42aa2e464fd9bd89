"""Co-clustering of region hierarchies across image collections.

Builds a merging tree per image, couples the images through boundary
variables with resolution-band constraints, and solves the joint labelling
as an integer program — yielding partitions whose cluster ids agree across
images at every resolution level.
"""

from .adjacency import BoundaryVariable, BoundaryVariableSet, ContourElement, RegionGraph, build_graph, enumerate_variables
from .constraints import LinearConstraint, band_bounds, band_constraints, freeze_constraints, intra_constraints, triangle_constraints
from .descriptors import DescriptorConfig, assemble_affinity, bhattacharyya_coefficient, inter_element_similarity, intra_similarity, region_histograms
from .errors import CoclusterError, ConfigError, FormatError, InfeasibleError, InputError
from .estimators import HierarchyCoClustering, MultiresolutionCoClustering, VideoCoClustering
from .hierarchy import Hierarchy, TreeCut, build_bpt, cut_to_encoding, encoding_to_cut, load_hierarchy, save_hierarchy
from .metrics import ConsistencyCurve, boundary_mask, boundary_pr, consistency_curve, jaccard, sequence_consistency, sequence_curve
from .pipeline import (
    Bundle,
    CoClusterSolution,
    LevelResult,
    ProblemSetup,
    VideoResult,
    build_setup,
    cocluster,
    default_schedule,
    extract_clusters,
    load_bundle,
    multiresolution,
    save_bundle,
    solve_level,
    video_segment,
)
from .raster import Image, LabelMap, load_image, load_label_map, read_label_array, save_image, save_label_map, write_label_array
from .solver import LpProblem, Solution, brute_force, lp_loads, lp_read, lp_write, solve_binary, solve_relaxation

__version__ = "0.1.0"

__all__ = [
    "BoundaryVariable",
    "BoundaryVariableSet",
    "Bundle",
    "CoClusterSolution",
    "CoclusterError",
    "ConfigError",
    "ConsistencyCurve",
    "ContourElement",
    "DescriptorConfig",
    "FormatError",
    "Hierarchy",
    "HierarchyCoClustering",
    "Image",
    "InfeasibleError",
    "InputError",
    "LabelMap",
    "LevelResult",
    "LinearConstraint",
    "LpProblem",
    "MultiresolutionCoClustering",
    "ProblemSetup",
    "RegionGraph",
    "Solution",
    "TreeCut",
    "VideoCoClustering",
    "VideoResult",
    "assemble_affinity",
    "band_bounds",
    "band_constraints",
    "bhattacharyya_coefficient",
    "boundary_mask",
    "boundary_pr",
    "brute_force",
    "build_bpt",
    "build_graph",
    "build_setup",
    "cocluster",
    "consistency_curve",
    "cut_to_encoding",
    "default_schedule",
    "encoding_to_cut",
    "enumerate_variables",
    "extract_clusters",
    "freeze_constraints",
    "inter_element_similarity",
    "intra_constraints",
    "intra_similarity",
    "jaccard",
    "load_bundle",
    "load_hierarchy",
    "load_image",
    "load_label_map",
    "lp_loads",
    "lp_read",
    "lp_write",
    "multiresolution",
    "read_label_array",
    "region_histograms",
    "save_bundle",
    "save_hierarchy",
    "save_image",
    "save_label_map",
    "sequence_consistency",
    "sequence_curve",
    "solve_binary",
    "solve_level",
    "solve_relaxation",
    "triangle_constraints",
    "video_segment",
    "write_label_array",
]
