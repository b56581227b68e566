"""Multi-rank data-parallel training over an in-process message ring.

Ranks are plain threads, each confined to its own graph and parameter
replica; the only inter-rank channel is a ring of ordered blocking queues.
Gradients are averaged with a segmented ring all-reduce (scatter-reduce then
all-gather), so every rank sends and receives exactly ``2 * (size - 1)``
messages per call -- the counters on :class:`WorkerCtx` make that auditable.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import forward_values, glorot_init
from .optim import AdamState
from .problems import ProblemSpec
from .sampling import TrainingSet, build_test_set, build_training_set, worker_seed
from .training import RunRecord, _train_loop
from .metrics import relative_l2_error

__all__ = [
    "RingMsg",
    "WorkerCtx",
    "allreduce_once",
    "broadcast_params",
    "efficiency_speedup",
    "make_ring",
    "ring_allreduce",
    "segment_bounds",
    "shard",
    "train_distributed",
]

LINK_TIMEOUT_S = 300.0


class RingMsg(NamedTuple):
    """One hop on the ring: phase tag, step index, segment index, payload chunk."""

    phase: str
    step: int
    segment: int
    payload: np.ndarray


@dataclass
class WorkerCtx:
    """Per-rank state: ring endpoints, replicas, and message counters."""

    rank: int
    size: int
    to_next: queue.Queue
    from_prev: queue.Queue
    sends: int = 0
    recvs: int = 0
    params: object = None
    adam: AdamState | None = None
    tset: TrainingSet | None = None
    test_set: TrainingSet | None = None

    def send(self, msg: RingMsg) -> None:
        self.to_next.put(RingMsg(msg.phase, msg.step, msg.segment, np.array(msg.payload)))
        self.sends += 1

    def recv(self, phase: str, step: int, segment: int) -> np.ndarray:
        try:
            msg = self.from_prev.get(timeout=LINK_TIMEOUT_S)
        except queue.Empty as exc:
            raise RuntimeError(f"rank {self.rank}: ring link broken (no message)") from exc
        self.recvs += 1
        if (msg.phase, msg.step, msg.segment) != (phase, step, segment):
            raise RuntimeError(
                f"rank {self.rank}: ring protocol violation, expected {(phase, step, segment)} "
                f"got {(msg.phase, msg.step, msg.segment)}"
            )
        return msg.payload

    def allreduce(self, vec: np.ndarray) -> np.ndarray:
        return ring_allreduce(self, vec)


def make_ring(size: int) -> list[WorkerCtx]:
    """Build `size` contexts joined by directed queues rank r -> r+1 (mod size)."""
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    links = [queue.Queue() for _ in range(size)]
    return [WorkerCtx(rank=r, size=size, to_next=links[r], from_prev=links[(r - 1) % size]) for r in range(size)]


def segment_bounds(length: int, size: int) -> list[tuple[int, int]]:
    """Partition [0, length) into `size` contiguous segments, sizes differing by <= 1.

    The first ``length % size`` segments carry the extra element.
    """
    base, rem = divmod(length, size)
    bounds = []
    start = 0
    for s in range(size):
        stop = start + base + (1 if s < rem else 0)
        bounds.append((start, stop))
        start = stop
    return bounds


def ring_allreduce(ctx: WorkerCtx, vec: np.ndarray) -> np.ndarray:
    """Sum `vec` across all ranks; every rank must call this in lockstep.

    scatter-reduce (size-1 steps, each rank accumulating one incoming
    segment) followed by all-gather (size-1 steps circulating the completed
    segments).  The buffer is updated in place and returned.
    """
    vec = np.asarray(vec, dtype=np.float64)
    size, rank = ctx.size, ctx.rank
    if size == 1:
        return vec
    bounds = segment_bounds(vec.size, size)
    for step in range(size - 1):
        si = (rank - step) % size
        ri = (rank - step - 1) % size
        ctx.send(RingMsg("scatter-reduce", step, si, vec[slice(*bounds[si])]))
        incoming = ctx.recv("scatter-reduce", step, ri)
        vec[slice(*bounds[ri])] += incoming
    for step in range(size - 1):
        si = (rank - step + 1) % size
        ri = (rank - step) % size
        ctx.send(RingMsg("allgather", step, si, vec[slice(*bounds[si])]))
        vec[slice(*bounds[ri])] = ctx.recv("allgather", step, ri)
    return vec


def allreduce_once(buffers: Sequence[np.ndarray]) -> tuple[list[np.ndarray], list[WorkerCtx]]:
    """Drive one all-reduce across fresh threads; returns results and contexts."""
    size = len(buffers)
    ctxs = make_ring(size)
    results: list = [None] * size
    errors: list = [None] * size

    def run(r: int) -> None:
        try:
            results[r] = ring_allreduce(ctxs[r], np.array(buffers[r], dtype=np.float64))
        except Exception as exc:  # noqa: BLE001 - surfaced after join
            errors[r] = exc

    threads = [threading.Thread(target=run, args=(r,)) for r in range(size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in errors:
        if exc is not None:
            raise exc
    return results, ctxs


def broadcast_params(ctxs: Sequence[WorkerCtx]) -> None:
    """Make every replica bitwise equal to rank 0's parameters and ADAM state."""
    root = ctxs[0]
    if root.params is None:
        raise ValueError("rank 0 has no parameters to broadcast")
    for ctx in ctxs[1:]:
        ctx.params = root.params.copy()
        ctx.adam = root.adam.copy() if root.adam is not None else None


def _split_rows(full: TrainingSet, size: int) -> list[TrainingSet]:
    """Strong-mode split: contiguous row blocks of f (and u); g/h replicated."""
    shards = []
    for comp in ("f", "u"):
        if comp in full.points and len(full.points[comp]) % size:
            raise ValueError(
                f"strong split needs size to divide component {comp!r}: "
                f"{len(full.points[comp])} points over {size} ranks"
            )
    for r in range(size):
        ts = TrainingSet(full.problem)
        for comp in full.components():
            pts = full.points[comp]
            if comp in ("f", "u"):
                block = len(pts) // size
                rows = slice(r * block, (r + 1) * block)
                ts.points[comp] = pts[rows].copy()
                ts.weights[comp] = np.full((block, 1), 1.0 / block)
                if comp == "u":
                    ts.observations = full.observations[rows].copy()
            else:
                ts.points[comp] = pts.copy()
                ts.weights[comp] = full.weights[comp].copy()
        shards.append(ts)
    return shards


def shard(
    problem: ProblemSpec,
    mode: str,
    size: int,
    seed: int,
    n_f: int,
    n_g: int | None = None,
    n_h: int | None = None,
    m_obs: int | None = None,
    full_set: TrainingSet | None = None,
    full_test: TrainingSet | None = None,
) -> tuple[list[TrainingSet], list[TrainingSet]]:
    """Per-rank training and test sets.

    weak: every rank samples its own ``n_f`` interior points (and
    observations) with ``worker_seed(seed, rank)``; boundary/initial grids
    are deterministic and therefore shared.  strong: a fixed set of ``n_f``
    total points (or the given ``full_set``) is split into equal contiguous
    blocks.
    """
    if mode == "weak":
        sets, tests = [], []
        for r in range(size):
            s = worker_seed(seed, r)
            ts = build_training_set(problem, n_f, n_g, n_h, m_obs, s)
            sets.append(ts)
            tests.append(build_test_set(problem, ts, s))
        return sets, tests
    if mode == "strong":
        full = full_set if full_set is not None else build_training_set(problem, n_f, n_g, n_h, m_obs, seed)
        ftest = full_test if full_test is not None else build_test_set(problem, full, seed)
        return _split_rows(full, size), _split_rows(ftest, size)
    raise ValueError(f"mode must be 'weak' or 'strong', got {mode!r}")


def train_distributed(
    problem: ProblemSpec,
    mode: str,
    size: int,
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
    config: dict | None = None,
) -> list[RunRecord]:
    """Synchronous data-parallel training; returns one record per rank.

    Every rank holds a replica, computes its local loss gradient, joins the
    ring all-reduce, divides by ``size``, and applies the identical ADAM
    update; replicas are checked against drift at every recording point.
    The final ``error`` on every record is global: rank 0's parameters
    evaluated on the union of the per-rank test interiors.
    """
    shards, test_shards = shard(problem, mode, size, seed, n_f, n_g, n_h, m_obs)
    ctxs = make_ring(size)
    ctxs[0].params = glorot_init(dims, extras=problem.extras, seed=seed)
    broadcast_params(ctxs)
    global_nf = sum(ts.n_f for ts in shards)

    records = []
    for r in range(size):
        records.append(
            RunRecord(
                problem=problem.kind,
                mode=mode,
                size=size,
                n_f=global_nf,
                n_g=shards[r].n_g,
                n_h=shards[r].n_h,
                m_obs=sum(ts.m_obs for ts in shards),
                seed=seed,
                iterations=iterations,
                lr=lr,
                width=max(dims[1:-1]) if len(dims) > 2 else dims[-1],
                depth=len(dims) - 2,
                config=dict(config or {}),
            )
        )

    failures: list = [None] * size

    def rank_main(r: int) -> None:
        try:
            _train_loop(
                ctxs[r],
                problem,
                ctxs[r].params,
                shards[r],
                test_shards[r],
                records[r],
                lr=lr,
                iterations=iterations,
                omega=omega,
                activation=activation,
                record_every=record_every,
            )
        except Exception as exc:  # noqa: BLE001 - surfaced after join
            failures[r] = exc

    threads = [threading.Thread(target=rank_main, args=(r,), name=f"rank-{r}") for r in range(size)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in failures:
        if exc is not None:
            raise exc

    final = records[0].final_params
    union = np.vstack([ts.points["f"] for ts in test_shards])
    try:
        exact = problem.exact(union)
    except ValueError:
        exact = None
    if exact is not None:
        pred = forward_values(final, union, activation=activation)
        global_error = relative_l2_error(pred, exact)
        for rec in records:
            rec.error = global_error
    return records


def efficiency_speedup(t_1: float, t_size: float, size: int) -> tuple[float, float]:
    """Efficiency t1/t_size and speed-up size * t1/t_size."""
    if t_1 <= 0 or t_size <= 0:
        raise ValueError(f"times must be positive, got t_1={t_1} t_size={t_size}")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    eff = t_1 / t_size
    return float(eff), float(size * eff)
