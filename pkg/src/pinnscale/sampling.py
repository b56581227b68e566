"""Training-point generation: Latin hypercube interiors, uniform boundary grids.

All randomness flows through the counter-based Philox generator, so every
set is bit-reproducible from its seed.  Rank-varying sets in data-parallel
runs use ``worker_seed(seed, rank) = seed + 1000 * rank``; the held-out test
set uses ``seed + 500000``; observation clouds for the inverse variant use
``seed + 250000``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .problems import ProblemSpec, exact_laplace

__all__ = [
    "OBS_SEED_OFFSET",
    "TEST_SEED_OFFSET",
    "TrainingSet",
    "build_test_set",
    "build_training_set",
    "dump_training_set",
    "lhs",
    "worker_seed",
]

TEST_SEED_OFFSET = 500_000
OBS_SEED_OFFSET = 250_000


@dataclass
class TrainingSet:
    """Per-component points, quadrature weights, and observations.

    Components: ``f`` interior collocation, ``g`` boundary, ``h`` initial
    condition, ``u`` observation points.  Default weights are 1/N_v per
    component (Monte-Carlo rule), stored as (N_v, 1) columns.
    """

    problem: ProblemSpec
    points: dict[str, np.ndarray] = field(default_factory=dict)
    weights: dict[str, np.ndarray] = field(default_factory=dict)
    observations: np.ndarray | None = None

    @property
    def n_f(self) -> int:
        return len(self.points.get("f", ()))

    @property
    def n_g(self) -> int:
        return len(self.points.get("g", ()))

    @property
    def n_h(self) -> int:
        return len(self.points.get("h", ()))

    @property
    def m_obs(self) -> int:
        return len(self.points.get("u", ()))

    @property
    def n_hat(self) -> int:
        return self.n_f + self.n_g + self.n_h

    @property
    def n_total(self) -> int:
        return self.n_hat + self.m_obs

    def components(self) -> list[str]:
        return [v for v in ("f", "g", "h", "u") if v in self.points and len(self.points[v])]


def worker_seed(seed: int, rank: int) -> int:
    """Per-rank seed: seed + 1000 * rank."""
    if rank < 0:
        raise ValueError(f"rank must be >= 0, got {rank}")
    return int(seed) + 1000 * int(rank)


def lhs(n: int, box, seed: int) -> np.ndarray:
    """Latin hypercube sample of n points in an axis-aligned box.

    Each dimension is cut into n equal strata; a seeded permutation assigns
    one point per stratum and the position inside a stratum is uniform.
    Draw order (fixed -- changing it changes every downstream set): for each
    dimension in turn, one permutation then one uniform block.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    box = np.atleast_2d(np.asarray(box, dtype=np.float64))
    if box.shape[1] != 2:
        raise ValueError(f"box must be (d, 2) bounds, got shape {box.shape}")
    widths = box[:, 1] - box[:, 0]
    if np.any(widths <= 0):
        raise ValueError(f"degenerate box with non-positive width: {box.tolist()}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    pts = np.empty((n, box.shape[0]))
    for d in range(box.shape[0]):
        strata = rng.permutation(n)
        offsets = rng.uniform(size=n)
        pts[:, d] = box[d, 0] + (strata + offsets) / n * widths[d]
    return pts


def _uniform_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _mc_weights(n: int) -> np.ndarray:
    return np.full((n, 1), 1.0 / n)


def build_training_set(
    problem: ProblemSpec,
    n_f: int,
    n_g: int | None = None,
    n_h: int | None = None,
    m_obs: int | None = None,
    seed: int = 0,
) -> TrainingSet:
    """Sample one training set for the given problem.

    Interiors (and observation points) come from :func:`lhs`; boundary and
    initial-condition sets are deterministic uniform grids.  Counts must be
    consistent with the problem kind; ``None`` picks the kind's default.
    """
    kind = problem.kind
    if kind.startswith("laplace1d"):
        n_g = 2 if n_g is None else n_g
        n_h = 0 if n_h is None else n_h
        m_obs = (0 if not problem.inverse else 64) if m_obs is None else m_obs
        if n_g != 2:
            raise ValueError(f"{kind} uses the two fixed endpoints; n_g must be 2, got {n_g}")
        if n_h != 0:
            raise ValueError(f"{kind} has no initial condition; n_h must be 0, got {n_h}")
        if problem.inverse:
            if m_obs < 1:
                raise ValueError(f"{kind} needs observations; m_obs must be >= 1, got {m_obs}")
        elif m_obs != 0:
            raise ValueError(f"{kind} is data-free; m_obs must be 0, got {m_obs}")
    elif kind == "schrodinger1d":
        n_g = 200 if n_g is None else n_g
        n_h = 200 if n_h is None else n_h
        m_obs = 0 if m_obs is None else m_obs
        if n_g < 1 or n_h < 1:
            raise ValueError(f"{kind} needs boundary and initial points, got n_g={n_g} n_h={n_h}")
        if m_obs != 0:
            raise ValueError(f"{kind} is data-free; m_obs must be 0, got {m_obs}")
    else:
        raise ValueError(f"unknown problem kind {kind!r}")
    if n_f < 1:
        raise ValueError(f"n_f must be >= 1, got {n_f}")

    tset = TrainingSet(problem)
    tset.points["f"] = lhs(n_f, problem.domain, seed)
    tset.weights["f"] = _mc_weights(n_f)

    if kind.startswith("laplace1d"):
        tset.points["g"] = np.array([[problem.domain[0, 0]], [problem.domain[0, 1]]])
        tset.weights["g"] = _mc_weights(2)
        if problem.inverse:
            xs = lhs(m_obs, problem.domain, seed + OBS_SEED_OFFSET)
            tset.points["u"] = xs
            tset.weights["u"] = _mc_weights(m_obs)
            tset.observations = exact_laplace(xs)
    else:
        t_grid = _uniform_grid(problem.domain[1, 0], problem.domain[1, 1], n_g)
        tset.points["g"] = np.column_stack([np.full(n_g, problem.domain[0, 0]), t_grid])
        tset.weights["g"] = _mc_weights(n_g)
        x_grid = _uniform_grid(problem.domain[0, 0], problem.domain[0, 1], n_h)
        tset.points["h"] = np.column_stack([x_grid, np.zeros(n_h)])
        tset.weights["h"] = _mc_weights(n_h)
    return tset


def build_test_set(problem: ProblemSpec, train: TrainingSet, seed: int) -> TrainingSet:
    """Same-cardinality held-out set, drawn at ``seed + 500000``."""
    return build_training_set(
        problem,
        n_f=train.n_f,
        n_g=train.n_g or None,
        n_h=train.n_h or None,
        m_obs=train.m_obs or None,
        seed=seed + TEST_SEED_OFFSET,
    )


def dump_training_set(tset: TrainingSet, path) -> None:
    """Write the set as CSV rows: component, coord0, coord1, weight, obs..."""
    m = tset.problem.m
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["component", "coord0", "coord1", "weight"] + [f"obs{j}" for j in range(m)])
            for comp in tset.components():
                pts = tset.points[comp]
                w = tset.weights[comp]
                for i in range(len(pts)):
                    coord1 = pts[i, 1] if pts.shape[1] > 1 else ""
                    obs = [""] * m
                    if comp == "u" and tset.observations is not None:
                        obs = [repr(v) for v in tset.observations[i]]
                    writer.writerow([comp, repr(pts[i, 0]), coord1 if coord1 == "" else repr(coord1), repr(w[i, 0])] + obs)
    except OSError as exc:
        raise OSError(f"cannot write training set {path}: {exc}") from exc
