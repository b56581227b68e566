"""Tensor-valued computation graph with repeatable reverse-mode differentiation.

Every value in the graph is a dense float64 matrix whose rows are batch
samples.  The graph is append-only: :meth:`ComputeGraph.grad` never touches
existing nodes, it only appends the adjoint computation as ordinary nodes.
Because of that, gradients are themselves differentiable -- second
derivatives of a network output with respect to its inputs, and gradients of
losses built from those second derivatives, all come from repeated calls to
``grad``.

The second consequence of append-only construction is that a finished graph
doubles as a static program: write new values into the variable leaves with
:meth:`ComputeGraph.set_value` and call :meth:`ComputeGraph.recompute` to
refresh every stored value in one topological sweep.  The training loop is
built entirely on this.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "ComputeGraph",
    "GraphError",
    "Node",
    "NonFiniteError",
    "finite_difference_check",
]


class GraphError(ValueError):
    """Bad graph construction: unknown ids, shape mismatches, invalid ops."""


class NonFiniteError(ArithmeticError):
    """An operation produced NaN or infinity."""


def as_matrix(value) -> np.ndarray:
    """Coerce scalars / 1-D arrays to a contiguous float64 matrix.

    Scalars become (1, 1); 1-D arrays become single columns.
    """
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise GraphError(f"graph values must be at most 2-D, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


class Node:
    """One graph entry: an op tag, parent ids, and the stored value."""

    __slots__ = ("id", "kind", "parents", "value", "attrs")

    def __init__(self, nid: int, kind: str, parents: tuple[int, ...], value: np.ndarray, attrs=()):
        self.id = nid
        self.kind = kind
        self.parents = parents
        self.value = value
        self.attrs = attrs

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Node({self.id}, {self.kind}, parents={self.parents}, shape={self.value.shape})"


class ComputeGraph:
    """Append-only graph of matrix-valued nodes.

    Parent ids are always strictly smaller than the node id, so iterating the
    node list forward is a topological evaluation order.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._variables: set[int] = set()
        self._evals: list[Callable[[], None] | None] = []
        self._program: list[Callable[[], None]] | None = None
        self._const_cache: dict[tuple[int, int, float], int] = {}

    # ------------------------------------------------------------------ basics

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def variables(self) -> frozenset[int]:
        return frozenset(self._variables)

    def node(self, nid: int) -> Node:
        if not isinstance(nid, (int, np.integer)) or nid < 0 or nid >= len(self.nodes):
            raise GraphError(f"unknown node id {nid!r}")
        return self.nodes[nid]

    def value(self, nid: int) -> np.ndarray:
        return self.node(nid).value

    def _append(self, kind, parents, value, attrs=(), evalfn=None) -> int:
        if not np.isfinite(value).all():
            raise NonFiniteError(f"op '{kind}' produced non-finite values")
        nid = len(self.nodes)
        self.nodes.append(Node(nid, kind, tuple(parents), value, attrs))
        self._evals.append(evalfn)
        self._program = None
        return nid

    # ------------------------------------------------------------------ leaves

    def constant(self, value) -> int:
        return self._append("constant", (), as_matrix(value))

    def variable(self, value) -> int:
        nid = self._append("variable", (), as_matrix(value))
        self._variables.add(nid)
        return nid

    def ones(self, rows: int, cols: int = 1) -> int:
        return self.filled((rows, cols), 1.0)

    def filled(self, shape: tuple[int, int], fill: float) -> int:
        """Cached constant filled with one value (shared across adjoint sweeps)."""
        key = (shape[0], shape[1], float(fill))
        nid = self._const_cache.get(key)
        if nid is None:
            nid = self.constant(np.full(shape, float(fill)))
            self._const_cache[key] = nid
        return nid

    def set_value(self, nid: int, value) -> None:
        """Overwrite a variable leaf in place; shapes must match."""
        node = self.node(nid)
        if nid not in self._variables:
            raise GraphError(f"node {nid} is not a variable; only variables can be re-set")
        arr = as_matrix(value)
        if arr.shape != node.value.shape:
            raise GraphError(f"set_value shape mismatch: {arr.shape} vs {node.value.shape}")
        if not np.isfinite(arr).all():
            raise NonFiniteError("set_value received non-finite values")
        np.copyto(node.value, arr)

    def recompute(self) -> None:
        """Re-evaluate every non-leaf node from the current leaf values.

        Unlike construction, this does not validate finiteness node by node;
        overflow surfaces at whatever consumes the values (e.g. the training
        loop's loss/gradient checks).
        """
        program = self._program
        if program is None:
            program = [f for f in self._evals if f is not None]
            self._program = program
        with np.errstate(all="ignore"):
            for fn in program:
                fn()

    # ------------------------------------------------------------------ ops

    def _binary(self, kind: str, a: int, b: int, ufunc) -> int:
        na, nb = self.node(a), self.node(b)
        if na.value.shape != nb.value.shape:
            raise GraphError(f"{kind}: shape mismatch {na.value.shape} vs {nb.value.shape}")
        with np.errstate(all="ignore"):  # non-finite results raise in _append instead
            value = ufunc(na.value, nb.value)

        def evalfn(out=value, x=na, y=nb, op=ufunc):
            op(x.value, y.value, out=out)

        return self._append(kind, (a, b), value, evalfn=evalfn)

    def _unary(self, kind: str, a: int, ufunc) -> int:
        na = self.node(a)
        with np.errstate(all="ignore"):
            value = ufunc(na.value)

        def evalfn(out=value, x=na, op=ufunc):
            op(x.value, out=out)

        return self._append(kind, (a,), value, evalfn=evalfn)

    def add(self, a: int, b: int) -> int:
        return self._binary("add", a, b, np.add)

    def sub(self, a: int, b: int) -> int:
        return self._binary("sub", a, b, np.subtract)

    def mul(self, a: int, b: int) -> int:
        return self._binary("mul", a, b, np.multiply)

    def div(self, a: int, b: int) -> int:
        return self._binary("div", a, b, np.divide)

    def neg(self, a: int) -> int:
        return self._unary("neg", a, np.negative)

    def sin(self, a: int) -> int:
        return self._unary("sin", a, np.sin)

    def cos(self, a: int) -> int:
        return self._unary("cos", a, np.cos)

    def exp(self, a: int) -> int:
        return self._unary("exp", a, np.exp)

    def tanh(self, a: int) -> int:
        return self._unary("tanh", a, np.tanh)

    def square(self, a: int) -> int:
        return self._unary("square", a, np.square)

    def powi(self, a: int, k: int) -> int:
        if not isinstance(k, (int, np.integer)):
            raise GraphError(f"powi exponent must be an integer, got {k!r}")
        k = int(k)
        if k == 1:
            return a
        na = self.node(a)
        with np.errstate(all="ignore"):
            value = np.power(na.value, k)

        def evalfn(out=value, x=na, exp=k):
            np.power(x.value, exp, out=out)

        return self._append("powi", (a,), value, attrs=(k,), evalfn=evalfn)

    def matmul(self, a: int, b: int, transpose_a: bool = False, transpose_b: bool = False) -> int:
        na, nb = self.node(a), self.node(b)
        sa = na.value.shape[::-1] if transpose_a else na.value.shape
        sb = nb.value.shape[::-1] if transpose_b else nb.value.shape
        if sa[1] != sb[0]:
            raise GraphError(f"matmul: inner dimensions {sa} x {sb} do not match")
        left = na.value.T if transpose_a else na.value
        right = nb.value.T if transpose_b else nb.value
        value = np.matmul(left, right)

        def evalfn(out=value, x=na, y=nb, ta=transpose_a, tb=transpose_b):
            np.matmul(x.value.T if ta else x.value, y.value.T if tb else y.value, out=out)

        return self._append("matmul", (a, b), value, attrs=(transpose_a, transpose_b), evalfn=evalfn)

    def add_bias(self, a: int, b: int) -> int:
        """Row-broadcast add: (n, m) + (1, m)."""
        na, nb = self.node(a), self.node(b)
        if nb.value.shape != (1, na.value.shape[1]):
            raise GraphError(
                f"add_bias: bias must be (1, {na.value.shape[1]}), got {nb.value.shape}"
            )
        value = np.add(na.value, nb.value)

        def evalfn(out=value, x=na, y=nb):
            np.add(x.value, y.value, out=out)

        return self._append("add_bias", (a, b), value, evalfn=evalfn)

    def reduce_sum(self, a: int, axis: int | None = None) -> int:
        if axis not in (None, 0):
            raise GraphError(f"reduce_sum supports axis None or 0, got {axis!r}")
        na = self.node(a)
        if axis == 0:
            value = np.sum(na.value, axis=0, keepdims=True)

            def evalfn(out=value, x=na):
                np.sum(x.value, axis=0, keepdims=True, out=out)

        else:
            value = np.array([[np.sum(na.value)]])

            def evalfn(out=value, x=na):
                out[0, 0] = np.sum(x.value)

        return self._append("reduce_sum", (a,), value, attrs=(axis,), evalfn=evalfn)

    # ------------------------------------------------------------------ grad

    def grad(self, output: int, wrt: Sequence[int]) -> list[int]:
        """Append nodes holding d(output)/d(w) for each w in ``wrt``.

        ``output`` must be a scalar node or a single batch column whose rows
        depend only on the matching rows of each variable (independent
        samples).  Under that condition the sweep is seeded with ones, which
        differentiates the sum over batch rows; row independence makes the
        result the per-sample derivative.  The returned nodes are ordinary
        graph nodes and can be differentiated again.
        """
        out_node = self.node(output)
        wrt = list(wrt)
        for w in wrt:
            self.node(w)
            if w not in self._variables:
                raise GraphError(f"grad target {w} is not a registered variable")
        if out_node.value.shape[1] != 1:
            raise GraphError(
                f"grad output must be a scalar or single batch column, got shape {out_node.value.shape}"
            )

        wrt_set = set(wrt)
        in_cone = bytearray(output + 1)
        for nid in range(output + 1):
            if nid in wrt_set or any(in_cone[p] for p in self.nodes[nid].parents):
                in_cone[nid] = 1

        def zero_like(w: int) -> int:
            return self.constant(np.zeros_like(self.nodes[w].value))

        if not in_cone[output]:
            return [zero_like(w) for w in wrt]

        adjoint: dict[int, int] = {output: self.constant(np.ones_like(out_node.value))}
        for nid in range(output, -1, -1):
            if not in_cone[nid]:
                continue
            g = adjoint.get(nid)
            if g is None:
                continue
            for pid, contrib in self._parent_adjoints(self.nodes[nid], g, in_cone):
                prev = adjoint.get(pid)
                adjoint[pid] = contrib if prev is None else self.add(prev, contrib)
        return [adjoint[w] if w in adjoint else zero_like(w) for w in wrt]

    def _parent_adjoints(self, node: Node, g: int, in_cone) -> Iterable[tuple[int, int]]:
        kind = node.kind
        if kind in ("constant", "variable"):
            return
        p = node.parents
        if kind == "add":
            if in_cone[p[0]]:
                yield p[0], g
            if in_cone[p[1]]:
                yield p[1], g
        elif kind == "sub":
            if in_cone[p[0]]:
                yield p[0], g
            if in_cone[p[1]]:
                yield p[1], self.neg(g)
        elif kind == "mul":
            if in_cone[p[0]]:
                yield p[0], self.mul(g, p[1])
            if in_cone[p[1]]:
                yield p[1], self.mul(g, p[0])
        elif kind == "div":
            if in_cone[p[0]]:
                yield p[0], self.div(g, p[1])
            if in_cone[p[1]]:
                # d(a/b)/db = -y/b with y the stored quotient
                yield p[1], self.neg(self.div(self.mul(g, node.id), p[1]))
        elif kind == "neg":
            if in_cone[p[0]]:
                yield p[0], self.neg(g)
        elif kind == "powi":
            (k,) = node.attrs
            if in_cone[p[0]] and k != 0:
                shape = self.nodes[p[0]].value.shape
                contrib = self.mul(self.mul(g, self.powi(p[0], k - 1)), self.filled(shape, float(k)))
                yield p[0], contrib
        elif kind == "square":
            if in_cone[p[0]]:
                shape = self.nodes[p[0]].value.shape
                yield p[0], self.mul(self.mul(g, p[0]), self.filled(shape, 2.0))
        elif kind == "sin":
            if in_cone[p[0]]:
                yield p[0], self.mul(g, self.cos(p[0]))
        elif kind == "cos":
            if in_cone[p[0]]:
                yield p[0], self.neg(self.mul(g, self.sin(p[0])))
        elif kind == "exp":
            if in_cone[p[0]]:
                yield p[0], self.mul(g, node.id)
        elif kind == "tanh":
            if in_cone[p[0]]:
                one = self.filled(node.value.shape, 1.0)
                yield p[0], self.mul(g, self.sub(one, self.square(node.id)))
        elif kind == "matmul":
            ta, tb = node.attrs
            a, b = p
            if in_cone[a]:
                if not ta:
                    yield a, self.matmul(g, b, transpose_a=False, transpose_b=not tb)
                else:
                    yield a, self.matmul(b, g, transpose_a=tb, transpose_b=True)
            if in_cone[b]:
                if not tb:
                    yield b, self.matmul(a, g, transpose_a=not ta, transpose_b=False)
                else:
                    yield b, self.matmul(g, a, transpose_a=True, transpose_b=ta)
        elif kind == "add_bias":
            if in_cone[p[0]]:
                yield p[0], g
            if in_cone[p[1]]:
                yield p[1], self.reduce_sum(g, axis=0)
        elif kind == "reduce_sum":
            (axis,) = node.attrs
            if in_cone[p[0]]:
                rows, cols = self.nodes[p[0]].value.shape
                spread = self.matmul(self.ones(rows, 1), g)
                if axis is None and cols > 1:
                    spread = self.matmul(spread, self.ones(1, cols))
                yield p[0], spread
        else:  # pragma: no cover - every kind above is constructible
            raise GraphError(f"no adjoint rule for op '{kind}'")


def finite_difference_check(build, x: float, order: int, h: float, floor: float = 1e-12) -> float:
    """Relative gap between the graph derivative and a central difference.

    ``build(graph, x_id)`` must construct f(x) from the 1x1 variable ``x_id``
    and return the output node id.  Central stencils:
    ``(f(x+h) - f(x-h)) / 2h`` and ``(f(x+h) - 2 f(x) + f(x-h)) / h^2``.
    """
    if h <= 0:
        raise GraphError(f"step h must be positive, got {h}")
    if order not in (1, 2):
        raise GraphError(f"order must be 1 or 2, got {order}")
    graph = ComputeGraph()
    xid = graph.variable([[float(x)]])
    out = build(graph, xid)
    d = graph.grad(out, [xid])[0]
    if order == 2:
        d = graph.grad(d, [xid])[0]
    ad = float(graph.value(d)[0, 0])

    def f_at(z: float) -> float:
        graph.set_value(xid, [[z]])
        graph.recompute()
        return float(graph.value(out)[0, 0])

    fp = f_at(x + h)
    fm = f_at(x - h)
    if order == 1:
        fd = (fp - fm) / (2.0 * h)
    else:
        f0 = f_at(x)
        fd = (fp - 2.0 * f0 + fm) / (h * h)
    graph.set_value(xid, [[float(x)]])
    graph.recompute()
    if not np.isfinite([ad, fd]).all():
        raise NonFiniteError("finite-difference check hit non-finite values")
    return abs(ad - fd) / max(abs(ad), floor)
