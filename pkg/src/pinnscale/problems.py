"""Problem definitions: domains, exact solutions, and PDE residual builders.

Two one-dimensional cases are implemented.  The Poisson-type case
``-lambda u_xx = pi^2 sin(pi x)`` on [-1, 7] with zero boundary values has
the closed form ``u = sin(pi x)``; the ``-inverse`` variant treats ``lambda``
as a trainable scalar recovered from point observations of the exact
solution (ground truth ``lambda = 1``).  The cubic Schrodinger case
``i u_t + 0.5 u_xx + |u|^2 u = 0`` on [-5, 5] x [0, pi/2] carries periodic
boundary conditions and the ``2 sech(x)`` initial profile; its two real
output channels are the real and imaginary parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ComputeGraph, GraphError, as_matrix
from .model import BoundMlp, MlpParams

__all__ = [
    "KINDS",
    "ProblemSpec",
    "ReferenceGrid",
    "boundary_residuals",
    "exact_laplace",
    "ic_schrodinger",
    "laplace_forcing",
    "make_problem",
    "residual_laplace",
    "residual_schrodinger",
]

KINDS = ("laplace1d", "laplace1d-inverse", "schrodinger1d")


@dataclass
class ReferenceGrid:
    """Dense space-time solution grid used as the Schrodinger error reference.

    ``x`` is uniform on [x0, x1) (periodic direction), ``t`` uniform on
    [t0, t1]; ``field[j, i]`` is the complex solution at (x[i], t[j]).
    """

    x: np.ndarray
    t: np.ndarray
    field: np.ndarray

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Bilinear lookup at (x, t) rows; periodic in x, clamped in t.

        Returns an (n, 2) array of real and imaginary parts.
        """
        pts = as_matrix(points)
        if pts.shape[1] != 2:
            raise ValueError(f"reference lookup expects (x, t) rows, got shape {pts.shape}")
        n_x, n_t = self.x.size, self.t.size
        dx = self.x[1] - self.x[0]
        dt = self.t[1] - self.t[0]
        fx = (pts[:, 0] - self.x[0]) / dx
        ix = np.floor(fx).astype(int)
        wx = fx - ix
        i0 = np.mod(ix, n_x)
        i1 = np.mod(ix + 1, n_x)
        ft = np.clip((pts[:, 1] - self.t[0]) / dt, 0.0, n_t - 1.0)
        jt = np.minimum(np.floor(ft).astype(int), n_t - 2)
        wt = ft - jt
        f = self.field
        vals = (
            f[jt, i0] * (1 - wx) * (1 - wt)
            + f[jt, i1] * wx * (1 - wt)
            + f[jt + 1, i0] * (1 - wx) * wt
            + f[jt + 1, i1] * wx * wt
        )
        return np.column_stack([vals.real, vals.imag])


@dataclass
class ProblemSpec:
    """One PDE case: domain box, dimensions, trainable extras, exact handle."""

    kind: str
    domain: np.ndarray  # (d_in, 2) bounds
    d_in: int
    m: int
    extras: dict[str, float]
    reference: ReferenceGrid | None = None

    @property
    def volume(self) -> float:
        widths = self.domain[:, 1] - self.domain[:, 0]
        return float(np.prod(widths))

    @property
    def inverse(self) -> bool:
        return self.kind.endswith("-inverse")

    def exact(self, X) -> np.ndarray:
        """Exact solution at the given points, shape (n, m)."""
        X = as_matrix(X)
        if self.kind.startswith("laplace1d"):
            return exact_laplace(X)
        if self.reference is None:
            raise ValueError(
                "schrodinger1d has no closed form; attach a ReferenceGrid "
                "(see harness.schrodinger_reference) before asking for exact values"
            )
        return self.reference.interp(X)


def make_problem(kind: str, reference: ReferenceGrid | None = None) -> ProblemSpec:
    if kind == "laplace1d":
        return ProblemSpec(kind, np.array([[-1.0, 7.0]]), 1, 1, {})
    if kind == "laplace1d-inverse":
        return ProblemSpec(kind, np.array([[-1.0, 7.0]]), 1, 1, {"lambda": 0.0})
    if kind == "schrodinger1d":
        domain = np.array([[-5.0, 5.0], [0.0, np.pi / 2]])
        return ProblemSpec(kind, domain, 2, 2, {}, reference=reference)
    raise ValueError(f"unknown problem kind {kind!r}; expected one of {KINDS}")


def exact_laplace(X) -> np.ndarray:
    """u(x) = sin(pi x), as a column."""
    X = as_matrix(X)
    return np.sin(np.pi * X[:, :1])


def laplace_forcing(X) -> np.ndarray:
    """f(x) = pi^2 sin(pi x)."""
    X = as_matrix(X)
    return np.pi**2 * np.sin(np.pi * X[:, :1])


def ic_schrodinger(x) -> np.ndarray:
    """Initial profile (2 sech(x), 0) with sech = 2 / (exp(x) + exp(-x))."""
    x = np.asarray(x, dtype=np.float64).ravel()
    sech = 2.0 / (np.exp(x) + np.exp(-x))
    return np.column_stack([2.0 * sech, np.zeros_like(x)])


def _column(graph: ComputeGraph, node: int, j: int, width: int) -> int:
    """Extract column j of an (n, width) node as an (n, 1) node."""
    if width == 1 and j == 0:
        return node
    sel = np.zeros((width, 1))
    sel[j, 0] = 1.0
    return graph.matmul(node, graph.constant(sel))


def _scalar_column(graph: ComputeGraph, scalar: int, rows: int) -> int:
    """Broadcast a (1, 1) node to an (n, 1) column."""
    return graph.matmul(graph.ones(rows, 1), scalar)


def _second_x_derivative(graph: ComputeGraph, u_col: int, x_var: int, x_index: int = 0):
    """Return (u_x, u_xx) columns of a single-column output w.r.t. one input coordinate."""
    width = graph.value(x_var).shape[1]
    du = graph.grad(u_col, [x_var])[0]
    u_x = _column(graph, du, x_index, width)
    du_x = graph.grad(u_x, [x_var])[0]
    u_xx = _column(graph, du_x, x_index, width)
    return u_x, u_xx


def _laplace_residual_node(graph: ComputeGraph, net: BoundMlp, x_var: int, inverse: bool) -> int:
    u = net.apply(x_var)
    _, u_xx = _second_x_derivative(graph, u, x_var)
    if inverse:
        if "lambda" not in net.extras_ids:
            raise GraphError("inverse variant needs a trainable 'lambda' extra in the parameters")
        lam_col = _scalar_column(graph, net.extras_ids["lambda"], graph.value(x_var).shape[0])
        diffusion = graph.neg(graph.mul(lam_col, u_xx))
    else:
        diffusion = graph.neg(u_xx)
    f = graph.constant(laplace_forcing(graph.value(x_var)))
    return graph.sub(diffusion, f)


def residual_laplace(
    params: MlpParams,
    X,
    graph: ComputeGraph,
    kind: str = "laplace1d",
    net: BoundMlp | None = None,
) -> int:
    """Interior defect -lambda u_xx - pi^2 sin(pi x) as an (n, 1) node.

    ``lambda`` is fixed to 1 for the forward problem and read from the
    trainable extras for the ``-inverse`` variant.
    """
    if kind not in ("laplace1d", "laplace1d-inverse"):
        raise ValueError(f"residual_laplace got kind {kind!r}")
    X = as_matrix(X)
    if X.shape[1] != 1:
        raise GraphError(f"laplace points must be a single column, got shape {X.shape}")
    if net is None:
        net = BoundMlp(graph, params)
    x_var = graph.variable(X)
    return _laplace_residual_node(graph, net, x_var, inverse=kind.endswith("-inverse"))


def _schrodinger_residual_nodes(graph: ComputeGraph, net: BoundMlp, x_var: int) -> tuple[int, int]:
    n = graph.value(x_var).shape[0]
    u = net.apply(x_var)
    u0 = _column(graph, u, 0, 2)
    u1 = _column(graph, u, 1, 2)
    du0 = graph.grad(u0, [x_var])[0]
    du1 = graph.grad(u1, [x_var])[0]
    u0_t = _column(graph, du0, 1, 2)
    u1_t = _column(graph, du1, 1, 2)
    u0_x = _column(graph, du0, 0, 2)
    u1_x = _column(graph, du1, 0, 2)
    u0_xx = _column(graph, graph.grad(u0_x, [x_var])[0], 0, 2)
    u1_xx = _column(graph, graph.grad(u1_x, [x_var])[0], 0, 2)
    half = graph.filled((n, 1), 0.5)
    absq = graph.add(graph.square(u0), graph.square(u1))
    xi1 = graph.add(graph.add(graph.neg(u1_t), graph.mul(half, u0_xx)), graph.mul(absq, u0))
    xi2 = graph.add(graph.add(u0_t, graph.mul(half, u1_xx)), graph.mul(absq, u1))
    return xi1, xi2


def residual_schrodinger(
    params: MlpParams,
    X,
    graph: ComputeGraph,
    net: BoundMlp | None = None,
) -> tuple[int, int]:
    """Real/imaginary residual split of i u_t + 0.5 u_xx + |u|^2 u.

    Network output columns are (real, imag); returns the two (n, 1) defect
    nodes ``(-u1_t + 0.5 u0_xx + |u|^2 u0, u0_t + 0.5 u1_xx + |u|^2 u1)``.
    """
    X = as_matrix(X)
    if X.shape[1] != 2:
        raise GraphError(f"schrodinger points must be (x, t) rows, got shape {X.shape}")
    if params.dims[-1] != 2:
        raise GraphError(f"schrodinger needs a 2-channel output, got width {params.dims[-1]}")
    if net is None:
        net = BoundMlp(graph, params)
    x_var = graph.variable(X)
    return _schrodinger_residual_nodes(graph, net, x_var)


def boundary_residuals(
    params: MlpParams,
    problem: ProblemSpec,
    tset,
    graph: ComputeGraph,
    net: BoundMlp | None = None,
) -> list[int]:
    """Boundary / initial defects as graph nodes.

    Laplace: one (2, 1) node of values at the endpoints (targets are zero).
    Schrodinger: periodic value gap u(-5,t) - u(5,t), the two x-derivative
    gaps, and the initial-condition gap against (2 sech(x), 0).
    """
    if net is None:
        net = BoundMlp(graph, params)
    if problem.kind.startswith("laplace1d"):
        pts = tset.points.get("g")
        if pts is None or len(pts) == 0:
            raise ValueError("boundary set 'g' is empty")
        return [net.apply(graph.constant(pts))]

    out = []
    left = tset.points.get("g")
    if left is None or len(left) == 0:
        raise ValueError("boundary set 'g' is empty")
    right = left.copy()
    right[:, 0] = problem.domain[0, 1]
    xl = graph.variable(left)
    xr = graph.variable(right)
    ul = net.apply(xl)
    ur = net.apply(xr)
    out.append(graph.sub(ul, ur))
    for j in range(2):
        dl = graph.grad(_column(graph, ul, j, 2), [xl])[0]
        dr = graph.grad(_column(graph, ur, j, 2), [xr])[0]
        out.append(graph.sub(_column(graph, dl, 0, 2), _column(graph, dr, 0, 2)))
    ic = tset.points.get("h")
    if ic is None or len(ic) == 0:
        raise ValueError("initial-condition set 'h' is empty")
    u_ic = net.apply(graph.constant(ic))
    target = graph.constant(ic_schrodinger(ic[:, 0]))
    out.append(graph.sub(u_ic, target))
    return out
