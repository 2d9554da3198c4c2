"""Power-ordered arborescences over flat embeddings."""
from .builder import (
    InsertionPlan,
    PowerArborescence,
    build_arborescence,
    extract_subtrees,
    make_plan,
    root_power_at_step,
    score_candidate,
)
from .core import (
    Arborescence,
    BuildConfig,
    EmbeddingSet,
    EvalReport,
    PowerAssignment,
    RelationSet,
    distance,
    validate_embedding,
)
from .evaluation import edge_accuracy, sweep_p
from .nnindex import BallTree, build_index
from .power import PCAPower, fit_pca, pca_power, zipf_power

__version__ = "0.1.0"

__all__ = [
    "Arborescence",
    "BallTree",
    "BuildConfig",
    "EmbeddingSet",
    "EvalReport",
    "InsertionPlan",
    "PCAPower",
    "PowerArborescence",
    "PowerAssignment",
    "RelationSet",
    "build_arborescence",
    "build_index",
    "distance",
    "edge_accuracy",
    "extract_subtrees",
    "fit_pca",
    "make_plan",
    "pca_power",
    "root_power_at_step",
    "score_candidate",
    "sweep_p",
    "validate_embedding",
    "zipf_power",
]
