"""Feed-forward tanh network: parameters, initialization, and forward pass.

Parameters live in :class:`MlpParams` as per-layer dense matrices plus
optional named trainable scalars (material coefficients such as ``lambda``).
``flatten``/``unflatten`` give the optimizer and the collective a single flat
float64 view: layer weights then bias per layer, extras appended at the end.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ComputeGraph, GraphError, as_matrix

__all__ = [
    "BoundMlp",
    "MlpParams",
    "flatten",
    "forward",
    "forward_values",
    "glorot_init",
    "load_params",
    "param_count",
    "save_params",
    "unflatten",
]

ACTIVATIONS = ("tanh", "identity")

_SNAPSHOT_MAGIC = b"PINNMLP1"


def _check_dims(dims) -> list[int]:
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError(f"dims must list input and output widths, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer widths must be >= 1, got {dims}")
    return dims


def param_count(dims) -> int:
    """Number of weight and bias entries: sum of W_l * W_{l-1} + W_l."""
    dims = _check_dims(dims)
    return sum(dims[l] * dims[l - 1] + dims[l] for l in range(1, len(dims)))


@dataclass
class MlpParams:
    """Layer weights W^l (out x in), bias vectors b^l, and named extras."""

    dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def size(self) -> int:
        return param_count(self.dims) + len(self.extras)

    def copy(self) -> "MlpParams":
        return MlpParams(
            list(self.dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            dict(self.extras),
        )


def glorot_init(dims, extras: dict[str, float] | None = None, seed: int = 0) -> MlpParams:
    """Uniform weights within +-sqrt(6 / (fan_in + fan_out)); zero biases.

    Deterministic in ``seed`` (counter-based Philox generator); layers are
    drawn in order.
    """
    dims = _check_dims(dims)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    weights, biases = [], []
    for l in range(1, len(dims)):
        fan_in, fan_out = dims[l - 1], dims[l]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(dims, weights, biases, dict(extras or {}))


def flatten(params: MlpParams) -> np.ndarray:
    """Flat float64 vector: (W^1, b^1), ..., (W^L, b^L), extras in order."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    if params.extras:
        parts.append(np.array([float(v) for v in params.extras.values()]))
    return np.concatenate(parts) if parts else np.zeros(0)


def unflatten(dims, vec, extras_names=()) -> MlpParams:
    """Inverse of :func:`flatten` for the given layout."""
    dims = _check_dims(dims)
    vec = np.asarray(vec, dtype=np.float64).ravel()
    expected = param_count(dims) + len(extras_names)
    if vec.size != expected:
        raise ValueError(f"flat vector has {vec.size} entries, layout needs {expected}")
    weights, biases, pos = [], [], 0
    for l in range(1, len(dims)):
        n_in, n_out = dims[l - 1], dims[l]
        weights.append(vec[pos : pos + n_out * n_in].reshape(n_out, n_in).copy())
        pos += n_out * n_in
        biases.append(vec[pos : pos + n_out].copy())
        pos += n_out
    extras = {name: float(vec[pos + i]) for i, name in enumerate(extras_names)}
    return MlpParams(dims, weights, biases, extras)


class BoundMlp:
    """Network bound to one graph: weight leaves created once, reused by every apply.

    All residual and loss terms built through the same ``BoundMlp`` share the
    weight variables, which is what makes the gradient of the total loss with
    respect to one flat parameter vector meaningful.
    """

    def __init__(self, graph: ComputeGraph, params: MlpParams, activation: str = "tanh"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        self.graph = graph
        self.dims = list(params.dims)
        self.activation = activation
        self.weight_ids = [graph.variable(w) for w in params.weights]
        self.bias_ids = [graph.variable(b.reshape(1, -1)) for b in params.biases]
        self.extras_ids = {name: graph.variable([[float(v)]]) for name, v in params.extras.items()}
        self._slices: list[tuple[int, int, int, tuple[int, int]]] = []  # (var id, start, stop, shape)
        pos = 0
        for wid, bid in zip(self.weight_ids, self.bias_ids):
            for vid in (wid, bid):
                shape = graph.value(vid).shape
                n = shape[0] * shape[1]
                self._slices.append((vid, pos, pos + n, shape))
                pos += n
        for name in self.extras_ids:
            vid = self.extras_ids[name]
            self._slices.append((vid, pos, pos + 1, (1, 1)))
            pos += 1
        self.flat_size = pos

    def apply(self, x_node: int) -> int:
        """Build the forward pass from an existing (n, W0) node; returns output id."""
        g = self.graph
        z = x_node
        last = len(self.weight_ids) - 1
        for l, (wid, bid) in enumerate(zip(self.weight_ids, self.bias_ids)):
            z = g.add_bias(g.matmul(z, wid, transpose_b=True), bid)
            if l != last and self.activation == "tanh":
                z = g.tanh(z)
        return z

    def grad_targets(self) -> list[int]:
        """Variable ids in flat-vector order (weights/bias per layer, extras)."""
        return [vid for vid, _, _, _ in self._slices]

    def set_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64).ravel()
        if vec.size != self.flat_size:
            raise ValueError(f"flat vector has {vec.size} entries, network needs {self.flat_size}")
        for vid, start, stop, shape in self._slices:
            self.graph.set_value(vid, vec[start:stop].reshape(shape))


def forward(params: MlpParams, X, graph: ComputeGraph, activation: str = "tanh") -> int:
    """One-shot forward pass: binds fresh weight variables and returns the output node."""
    X = as_matrix(X)
    if X.shape[1] != params.dims[0]:
        raise GraphError(f"input has {X.shape[1]} columns, network expects {params.dims[0]}")
    net = BoundMlp(graph, params, activation=activation)
    return net.apply(graph.constant(X))


def forward_values(params: MlpParams, X, activation: str = "tanh") -> np.ndarray:
    """Plain-numpy forward pass; same op order as the graph, so values match bitwise."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
    z = as_matrix(X)
    if z.shape[1] != params.dims[0]:
        raise ValueError(f"input has {z.shape[1]} columns, network expects {params.dims[0]}")
    last = params.n_layers - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = np.add(np.matmul(z, w.T), b.reshape(1, -1))
        if l != last and activation == "tanh":
            z = np.tanh(z)
    return z


def save_params(path, params: MlpParams) -> None:
    """Write a parameter snapshot.

    Byte layout (all little-endian):
      * bytes 0..7: magic ``PINNMLP1``
      * uint32 header length H
      * H bytes of UTF-8 JSON: ``{"dims": [...], "extras": [names...]}``
      * float64 flat parameter vector (see :func:`flatten` for the order)
    """
    header = json.dumps({"dims": list(params.dims), "extras": list(params.extras)}).encode()
    flat = flatten(params).astype("<f8")
    try:
        with open(path, "wb") as fh:
            fh.write(_SNAPSHOT_MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(flat.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write parameter snapshot {path}: {exc}") from exc


def load_params(path) -> MlpParams:
    """Read a snapshot written by :func:`save_params`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read parameter snapshot {path}: {exc}") from exc
    if blob[:8] != _SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a parameter snapshot (bad magic)")
    (hlen,) = struct.unpack("<I", blob[8:12])
    header = json.loads(blob[12 : 12 + hlen].decode())
    flat = np.frombuffer(blob[12 + hlen :], dtype="<f8")
    return unflatten(header["dims"], flat, extras_names=header["extras"])
