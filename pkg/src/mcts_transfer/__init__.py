"""Transfer Bayesian optimisation by Monte-Carlo tree search over a learned
partition of the search space, plus a small benchmark harness."""

from .bench import build_problem, generate_source_data, make_family, make_sphere, make_sphere_pair, make_standard
from .core import SearchDomain, TaskDataset, load_dataset, write_dataset
from .optimizer import OptimizerConfig, RunTrace, run_method
from .similarity import SimilarityConfig
from .tree import PartitionTree, TreeConfig, prelearn

__all__ = [
    "OptimizerConfig", "PartitionTree", "RunTrace", "SearchDomain", "SimilarityConfig", "TaskDataset",
    "TreeConfig", "build_problem", "generate_source_data", "load_dataset", "make_family", "make_sphere",
    "make_sphere_pair", "make_standard", "prelearn", "run_method", "write_dataset",
]
__version__ = "0.1.0"
