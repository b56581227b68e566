"""Loss assembly, error/density metrics, generalization bounds, regimes.

The weighted loss is ``sum_v omega_v * L_v`` with
``L_v = sum_i w_v^i |xi_v(tau_v^i)|^2``; vector residuals contribute their
squared Euclidean norm per point.  The physics part (f, g, h) and the data
part (u) are tracked separately so the train/test errors split as
``loss = eps_D^2 + omega_u * eps_u^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ComputeGraph
from .model import BoundMlp, MlpParams
from .problems import ProblemSpec, boundary_residuals, _laplace_residual_node, _schrodinger_residual_nodes
from .sampling import TrainingSet

__all__ = [
    "BoundInputs",
    "LossNodes",
    "LossReport",
    "assemble_loss",
    "build_loss_nodes",
    "classify_regime",
    "gap_bound",
    "generalization_bound",
    "pointsec",
    "relative_l2_error",
    "rho",
]

GAP_FLOOR = 1e-30

DEFAULT_GAP_THRESHOLD = 1e-2
DEFAULT_ERROR_THRESHOLD = 0.3
DEFAULT_PERMANENT_FACTOR = 2.0


@dataclass
class LossReport:
    """One loss evaluation: per-component values plus the D/u error split."""

    components: dict[str, float]
    total: float
    eps_d: float
    eps_u: float
    eps_d_val: float | None = None
    eps_u_val: float | None = None
    total_val: float | None = None
    gap_rel: float | None = None
    best_iter: int | None = None


@dataclass
class LossNodes:
    """Graph handles for one assembled loss (used by the training loop)."""

    graph: ComputeGraph
    net: BoundMlp
    components: dict[str, int]
    total: int
    omega: dict[str, float]
    u_interior: int  # prediction node at the interior points
    interior_points: np.ndarray
    residuals: dict[str, list[int]] = field(default_factory=dict)

    def component_values(self) -> dict[str, float]:
        return {v: float(self.graph.value(nid)[0, 0]) for v, nid in self.components.items()}

    def total_value(self) -> float:
        return float(self.graph.value(self.total)[0, 0])

    def error_split(self) -> tuple[float, float]:
        """(eps_D, eps_u): sqrt of the physics part and of the data part."""
        comps = self.component_values()
        d_sq = sum(self.omega[v] * comps[v] for v in comps if v != "u")
        u_sq = comps.get("u", 0.0)
        return float(np.sqrt(d_sq)), float(np.sqrt(u_sq))


def _row_square_norm(graph: ComputeGraph, node: int) -> int:
    """Per-point squared Euclidean norm of an (n, k) residual as (n, 1)."""
    sq = graph.square(node)
    k = graph.value(node).shape[1]
    if k == 1:
        return sq
    return graph.matmul(sq, graph.ones(k, 1))


def build_loss_nodes(
    params: MlpParams,
    tset: TrainingSet,
    omega: dict[str, float] | None = None,
    graph: ComputeGraph | None = None,
    net: BoundMlp | None = None,
    activation: str = "tanh",
) -> LossNodes:
    """Assemble the weighted loss graph for one training set.

    Residual and boundary terms share one bound network, so a later
    ``graph.grad(total, net.grad_targets())`` is the full parameter gradient.
    """
    problem = tset.problem
    omega = dict(omega or {})
    present = tset.components()
    for v, w in omega.items():
        if v not in present and w > 0:
            raise ValueError(f"component {v!r} is empty but carries weight {w}")
    for v in present:
        omega.setdefault(v, 1.0)
        if omega[v] <= 0:
            raise ValueError(f"component weight omega[{v!r}] must be positive, got {omega[v]}")
    graph = graph if graph is not None else ComputeGraph()
    net = net if net is not None else BoundMlp(graph, params, activation=activation)

    residual_nodes: dict[str, list[int]] = {}
    interior = tset.points["f"]
    if problem.kind.startswith("laplace1d"):
        x_var = graph.variable(interior)
        residual_nodes["f"] = [_laplace_residual_node(graph, net, x_var, inverse=problem.inverse)]
        u_interior = net.apply(graph.constant(interior))
        residual_nodes["g"] = [boundary_residuals(params, problem, tset, graph, net=net)[0]]
        if "u" in tset.points and len(tset.points["u"]):
            if tset.observations is None:
                raise ValueError("training set has observation points but no observed values")
            pred = net.apply(graph.constant(tset.points["u"]))
            residual_nodes["u"] = [graph.sub(pred, graph.constant(tset.observations))]
    else:
        x_var = graph.variable(interior)
        residual_nodes["f"] = list(_schrodinger_residual_nodes(graph, net, x_var))
        u_interior = net.apply(graph.constant(interior))
        bnodes = boundary_residuals(params, problem, tset, graph, net=net)
        residual_nodes["g"] = bnodes[:3]
        residual_nodes["h"] = [bnodes[3]]

    comp_ids: dict[str, int] = {}
    total = None
    for v in ("f", "g", "h", "u"):
        nodes = residual_nodes.get(v)
        if not nodes:
            continue
        sq = _row_square_norm(graph, nodes[0])
        for extra in nodes[1:]:
            sq = graph.add(sq, _row_square_norm(graph, extra))
        weighted = graph.mul(sq, graph.constant(tset.weights[v]))
        comp = graph.reduce_sum(weighted)
        comp_ids[v] = comp
        term = graph.mul(comp, graph.filled((1, 1), float(omega[v])))
        total = term if total is None else graph.add(total, term)
    return LossNodes(graph, net, comp_ids, total, omega, u_interior, np.array(interior), residual_nodes)


def assemble_loss(
    params: MlpParams,
    tset: TrainingSet,
    omega: dict[str, float] | None = None,
    graph: ComputeGraph | None = None,
    activation: str = "tanh",
) -> LossReport:
    """Evaluate the weighted loss once and report the component breakdown."""
    nodes = build_loss_nodes(params, tset, omega=omega, graph=graph, activation=activation)
    comps = nodes.component_values()
    eps_d, eps_u = nodes.error_split()
    return LossReport(components=comps, total=nodes.total_value(), eps_d=eps_d, eps_u=eps_u)


def relative_l2_error(pred, exact) -> float:
    """||pred - exact||_2 / ||exact||_2 over all entries."""
    pred = np.asarray(pred, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    if pred.shape != exact.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs exact {exact.shape}")
    denom = np.linalg.norm(exact)
    if denom == 0:
        raise ValueError("exact values have zero norm; relative error undefined")
    return float(np.linalg.norm(pred - exact) / denom)


def rho(n_f: int, volume: float, d_in: int) -> float:
    """Collocation density (N_f / volume)^(1/d_in): points per unit per dimension."""
    if n_f <= 0 or volume <= 0 or d_in <= 0:
        raise ValueError(f"rho needs positive inputs, got n_f={n_f} volume={volume} d_in={d_in}")
    return float((n_f / volume) ** (1.0 / d_in))


def pointsec(k: int, n_f: int, t_k: float) -> float:
    """Training points processed per second: k * N_f / t_k."""
    if t_k <= 0:
        raise ValueError(f"time must be positive, got {t_k}")
    return float(k) * float(n_f) / float(t_k)


@dataclass
class BoundInputs:
    """Constants and rates feeding the generalization-error bound."""

    c_pde: float = 1.0
    c_quad_y: float = 1.0
    c_quad_x: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    omega_u: float = 0.0
    mu_hat: float = 0.0
    n_hat: int = 0
    m_obs: int = 0

    def __post_init__(self) -> None:
        for name in ("c_pde", "c_quad_y", "c_quad_x", "omega_u", "mu_hat"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"rates must be positive, got alpha={self.alpha} beta={self.beta}")


def generalization_bound(b: BoundInputs, eps_td: float, eps_tu: float = 0.0) -> float:
    """Upper bound on the generalization error from training errors and counts.

    ``c_pde/(1+omega_u) * (eps_td + sqrt(c_quad_y) * n_hat^(-alpha/2))
      + omega_u/(1+omega_u) * (eps_tu + sqrt(c_quad_x) * m^(-beta/2) + mu_hat)``
    """
    if b.c_pde > 0 and b.n_hat <= 0:
        raise ValueError("n_hat must be positive when the physics term is active")
    if b.omega_u > 0 and b.m_obs <= 0:
        raise ValueError("m_obs must be positive when omega_u > 0")
    first = 0.0
    if b.c_pde > 0:
        first = b.c_pde / (1.0 + b.omega_u) * (eps_td + np.sqrt(b.c_quad_y) * b.n_hat ** (-b.alpha / 2.0))
    second = 0.0
    if b.omega_u > 0:
        second = (
            b.omega_u
            / (1.0 + b.omega_u)
            * (eps_tu + np.sqrt(b.c_quad_x) * b.m_obs ** (-b.beta / 2.0) + b.mu_hat)
        )
    return float(first + second)


def gap_bound(c_quad: float, rate: float, count: int) -> float:
    """Train-test gap bound 2 sqrt(c_quad) * count^(-rate/2)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if c_quad < 0:
        raise ValueError(f"c_quad must be >= 0, got {c_quad}")
    return float(2.0 * np.sqrt(c_quad) * count ** (-rate / 2.0))


def relative_gap(loss_train: float, loss_test: float) -> float:
    """|L_test - L_train| / L_train with a 1e-30 floor on the denominator."""
    return abs(loss_test - loss_train) / max(abs(loss_train), GAP_FLOOR)


def classify_regime(
    records,
    gap_threshold: float = DEFAULT_GAP_THRESHOLD,
    error_threshold: float = DEFAULT_ERROR_THRESHOLD,
    permanent_factor: float = DEFAULT_PERMANENT_FACTOR,
) -> dict[int, str]:
    """Label each collocation count as pre-asymptotic / transition / permanent.

    ``records`` is any iterable of objects carrying ``n_f``, ``error`` and
    ``gap_rel``.  A count is pre-asymptotic when its median error exceeds
    ``error_threshold``; permanent when the median gap is below
    ``gap_threshold`` and the median error is within ``permanent_factor`` of
    the median error at the largest count; transition otherwise.
    """
    groups: dict[int, list] = {}
    for rec in records:
        if not np.isfinite(rec.error):
            continue
        groups.setdefault(int(rec.n_f), []).append(rec)
    if not groups:
        raise ValueError("empty sweep: no finite-error runs to classify")
    for n, recs in groups.items():
        if len(recs) < 2:
            raise ValueError(f"need >= 2 runs per N to classify, N={n} has {len(recs)}")
    med_err = {n: float(np.median([r.error for r in recs])) for n, recs in groups.items()}
    med_gap = {n: float(np.median([r.gap_rel for r in recs])) for n, recs in groups.items()}
    anchor = med_err[max(groups)]
    labels = {}
    for n in sorted(groups):
        if med_err[n] > error_threshold:
            labels[n] = "pre-asymptotic"
        elif med_gap[n] < gap_threshold and med_err[n] <= permanent_factor * anchor:
            labels[n] = "permanent"
        else:
            labels[n] = "transition"
    return labels
