"""Triangle-based translation averaging (TriP)."""
__version__ = "0.1.0"

from .viewgraph import ViewingGraph, build_viewing_graph, enumerate_triangles  # noqa: E402
from .prefilter import (PrefilterParams, closure_residual, prefilter_triangles,  # noqa: E402
                        side_ratios)
from .losses import LossSpec, loss_weight  # noqa: E402
from .scalesync import (annealed_synchronize, build_constraint_graph,  # noqa: E402
                        incident_residual_scores, spanning_tree_init, synchronize_scales)
from .edgeestimate import aggregate_edge_lengths, select_triangle_prefix  # noqa: E402
from .locrecover import recover_locations  # noqa: E402
from .synthgen import SceneConfig, generate_scene, render_measurements  # noqa: E402
from .evaluation import compute_error_report, robust_similarity_align  # noqa: E402
from .pipeline import PipelineConfig, run_trip  # noqa: E402
from .theorychecks import (exact_recovery_experiment, johnson_green_levels,  # noqa: E402
                           verify_theory)

__all__ = [
    "ViewingGraph", "build_viewing_graph", "enumerate_triangles",
    "PrefilterParams", "side_ratios", "closure_residual", "prefilter_triangles",
    "LossSpec", "loss_weight",
    "build_constraint_graph", "spanning_tree_init", "synchronize_scales",
    "annealed_synchronize", "incident_residual_scores",
    "select_triangle_prefix", "aggregate_edge_lengths",
    "recover_locations",
    "SceneConfig", "generate_scene", "render_measurements",
    "robust_similarity_align", "compute_error_report",
    "PipelineConfig", "run_trip",
    "johnson_green_levels", "exact_recovery_experiment", "verify_theory",
]
