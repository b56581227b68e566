"""PDE-residual network training with second-order autodiff and ring-parallel workers."""

from .autodiff import ComputeGraph, GraphError, NonFiniteError, finite_difference_check
from .estimator import PinnRegressor
from .metrics import (
    BoundInputs,
    LossReport,
    assemble_loss,
    classify_regime,
    gap_bound,
    generalization_bound,
    pointsec,
    relative_l2_error,
    rho,
)
from .model import MlpParams, flatten, forward, forward_values, glorot_init, param_count, unflatten
from .optim import AdamState, adam_step
from .parallel import efficiency_speedup, ring_allreduce, shard, train_distributed
from .problems import ProblemSpec, ReferenceGrid, make_problem
from .sampling import TrainingSet, build_training_set, lhs, worker_seed
from .training import RunRecord, train_single

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BoundInputs",
    "ComputeGraph",
    "GraphError",
    "LossReport",
    "MlpParams",
    "NonFiniteError",
    "PinnRegressor",
    "ProblemSpec",
    "ReferenceGrid",
    "RunRecord",
    "TrainingSet",
    "adam_step",
    "assemble_loss",
    "build_training_set",
    "classify_regime",
    "efficiency_speedup",
    "finite_difference_check",
    "flatten",
    "forward",
    "forward_values",
    "gap_bound",
    "generalization_bound",
    "glorot_init",
    "lhs",
    "make_problem",
    "param_count",
    "pointsec",
    "relative_l2_error",
    "rho",
    "ring_allreduce",
    "shard",
    "train_distributed",
    "train_single",
    "unflatten",
    "worker_seed",
]
