"""Full-batch training loop over a static loss+gradient graph.

The loss graph (residuals, boundary terms, total) and its parameter
gradient are built once per run; every iteration then writes the current
flat parameter vector into the variable leaves, re-evaluates the graph in
one sweep, and feeds the assembled gradient to ADAM.  A collective object
abstracts the gradient averaging so the same loop body serves the serial
trainer (identity collective) and every rank of the ring trainer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .metrics import LossNodes, build_loss_nodes, relative_gap, relative_l2_error
from .model import MlpParams, flatten, glorot_init, unflatten
from .optim import AdamState, adam_step
from .problems import ProblemSpec
from .sampling import TrainingSet, build_test_set, build_training_set

__all__ = [
    "ReplicaDivergence",
    "RunRecord",
    "TrainingDiverged",
    "TrainingProgram",
    "train_single",
]

TIMING_CHUNK = 500
TIMING_WARMUP_CHUNKS = 3
GUARD_TOLERANCE = 1e-6


class TrainingDiverged(RuntimeError):
    """Training hit a non-finite loss or gradient."""


class ReplicaDivergence(RuntimeError):
    """Parameter replicas drifted apart across ranks."""


@dataclass
class RunRecord:
    """Everything one training run reports: errors, losses, timings, config echo."""

    problem: str
    mode: str
    size: int
    n_f: int
    n_g: int
    n_h: int
    m_obs: int
    seed: int
    iterations: int
    lr: float
    width: int
    depth: int
    error: float = float("nan")
    best_error: float = float("nan")
    best_iter: int = 0
    loss_train: float = float("nan")
    loss_test: float = float("nan")
    gap_rel: float = float("nan")
    time_total_s: float = float("nan")
    t500_mean: float = float("nan")
    t500_std: float = float("nan")
    pointsec: float = float("nan")
    regime: str = ""
    failed: bool = False
    history_iters: list[int] = field(default_factory=list)
    history_train: list[float] = field(default_factory=list)
    history_test: list[float] = field(default_factory=list)
    history_error: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    extras: dict[str, float] = field(default_factory=dict)
    final_params: MlpParams | None = None


class _SerialCollective:
    """Degenerate ring: one rank, averaging is the identity."""

    size = 1
    rank = 0

    @staticmethod
    def allreduce(vec: np.ndarray) -> np.ndarray:
        return vec


class TrainingProgram:
    """Loss graph plus appended parameter-gradient nodes, reusable across iterations."""

    def __init__(self, params: MlpParams, tset: TrainingSet, omega=None, activation: str = "tanh"):
        self.loss = build_loss_nodes(params, tset, omega=omega, activation=activation)
        self.graph = self.loss.graph
        self.net = self.loss.net
        self.grad_ids = self.graph.grad(self.loss.total, self.net.grad_targets())
        self._grad_buf = np.empty(self.net.flat_size)

    def set_flat(self, vec: np.ndarray) -> None:
        self.net.set_flat(vec)

    def run(self) -> None:
        self.graph.recompute()

    def loss_value(self) -> float:
        return self.loss.total_value()

    def grad_vector(self) -> np.ndarray:
        return np.concatenate([self.graph.value(g).ravel() for g in self.grad_ids], out=self._grad_buf)


def _t500_stats(chunks: list[float]) -> tuple[float, float]:
    kept = chunks[TIMING_WARMUP_CHUNKS:]
    if not kept:
        return float("nan"), float("nan")
    return float(np.mean(kept)), float(np.std(kept))


def _train_loop(
    collective,
    problem: ProblemSpec,
    params: MlpParams,
    tset: TrainingSet,
    test_set: TrainingSet,
    record: RunRecord,
    lr: float,
    iterations: int,
    omega=None,
    activation: str = "tanh",
    record_every: int = 100,
) -> RunRecord:
    """Run the shared loop body; fills and returns ``record``."""
    program = TrainingProgram(params, tset, omega=omega, activation=activation)
    evaluator: LossNodes = build_loss_nodes(params, test_set, omega=omega, activation=activation)
    try:
        exact_test = problem.exact(evaluator.interior_points)
    except ValueError:
        exact_test = None

    flat = flatten(params)
    adam = AdamState.zeros(flat.size, lr=lr)
    size = collective.size

    def record_point(it: int, loss: float) -> None:
        """Log train/test losses and the test error for the current replica state.

        ``it`` counts applied updates.  The loss pair is averaged across
        ranks; the parameter vector is averaged too, as the replica-drift
        guard.
        """
        evaluator.net.set_flat(flat)
        evaluator.graph.recompute()
        pair = np.array([loss, evaluator.total_value()])
        pair = collective.allreduce(pair)
        pair /= size
        theta_mean = collective.allreduce(flat.copy())
        theta_mean /= size
        drift = float(np.max(np.abs(flat - theta_mean)))
        if drift > GUARD_TOLERANCE:
            raise ReplicaDivergence(f"replicas differ by {drift:.3e} max-norm at iteration {it}")
        if exact_test is not None:
            err = relative_l2_error(evaluator.graph.value(evaluator.u_interior), exact_test)
        else:
            err = float("nan")
        record.history_iters.append(it)
        record.history_train.append(float(pair[0]))
        record.history_test.append(float(pair[1]))
        record.history_error.append(err)

    chunks: list[float] = []
    t_start = time.perf_counter()
    chunk_start = t_start
    program.set_flat(flat)
    for it in range(iterations):  # it = updates applied so far
        program.run()
        loss = program.loss_value()
        grad = program.grad_vector()
        if not np.isfinite(loss) or not np.isfinite(grad).all():
            raise TrainingDiverged(f"non-finite loss/gradient after {it} updates")
        if it % record_every == 0:
            record_point(it, loss)
        grad = collective.allreduce(grad)
        grad /= size
        flat, adam = adam_step(flat, grad, adam)
        program.set_flat(flat)
        if (it + 1) % TIMING_CHUNK == 0:
            now = time.perf_counter()
            chunks.append(now - chunk_start)
            chunk_start = now

    program.run()
    final_loss = program.loss_value()
    if not np.isfinite(final_loss):
        raise TrainingDiverged(f"non-finite loss after {iterations} updates")
    record_point(iterations, final_loss)

    record.time_total_s = time.perf_counter() - t_start
    record.t500_mean, record.t500_std = _t500_stats(chunks)
    if np.isfinite(record.t500_mean):
        record.pointsec = TIMING_CHUNK * record.n_f / record.t500_mean

    train_hist = np.array(record.history_train)
    best = int(np.argmin(train_hist))
    record.best_iter = record.history_iters[best]
    record.loss_train = record.history_train[best]
    record.loss_test = record.history_test[best]
    record.gap_rel = relative_gap(record.loss_train, record.loss_test)
    record.error = record.history_error[-1]
    finite_err = [e for e in record.history_error if np.isfinite(e)]
    record.best_error = min(finite_err) if finite_err else float("nan")

    rebuilt = unflatten(params.dims, flat, extras_names=list(params.extras))
    record.extras = dict(rebuilt.extras)
    record.final_params = rebuilt
    return record


def train_single(
    problem: ProblemSpec,
    n_f: int,
    dims,
    seed: int,
    iterations: int,
    lr: float = 1e-4,
    n_g: int | None = None,
    n_h: int | None = None,
    m_obs: int | None = None,
    omega=None,
    activation: str = "tanh",
    record_every: int = 100,
    tset: TrainingSet | None = None,
    test_set: TrainingSet | None = None,
    config: dict | None = None,
) -> RunRecord:
    """Train one replica on one training set (no parallelism).

    ``tset``/``test_set`` may be supplied directly (the scaling studies do);
    otherwise they are sampled here from ``seed``.
    """
    if tset is None:
        tset = build_training_set(problem, n_f, n_g, n_h, m_obs, seed)
    if test_set is None:
        test_set = build_test_set(problem, tset, seed)
    params = glorot_init(dims, extras=problem.extras, seed=seed)
    record = RunRecord(
        problem=problem.kind,
        mode="none",
        size=1,
        n_f=tset.n_f,
        n_g=tset.n_g,
        n_h=tset.n_h,
        m_obs=tset.m_obs,
        seed=seed,
        iterations=iterations,
        lr=lr,
        width=max(dims[1:-1]) if len(dims) > 2 else dims[-1],
        depth=len(dims) - 2,
        config=dict(config or {}),
    )
    return _train_loop(
        _SerialCollective(),
        problem,
        params,
        tset,
        test_set,
        record,
        lr=lr,
        iterations=iterations,
        omega=omega,
        activation=activation,
        record_every=record_every,
    )
