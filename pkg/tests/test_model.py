"""Network parameters, initialization bounds, forward pass, serialization."""

import numpy as np
import pytest

from pinnscale.autodiff import ComputeGraph
from pinnscale.model import (
    BoundMlp,
    flatten,
    forward,
    forward_values,
    glorot_init,
    load_params,
    param_count,
    save_params,
    unflatten,
)


class TestParamCount:
    def test_reference_architectures(self):
        assert param_count([1, 50, 50, 50, 50, 1]) == 7801
        assert param_count([2, 100, 100, 100, 100, 2]) == 30802
        assert param_count([1, 1]) == 2

    def test_matches_flatten_length(self):
        for dims in ([1, 1], [1, 5, 1], [2, 7, 3, 2], [1, 50, 50, 50, 50, 1]):
            params = glorot_init(dims, seed=0)
            assert flatten(params).size == param_count(dims)

    def test_invalid_dims(self):
        with pytest.raises(ValueError):
            param_count([5])
        with pytest.raises(ValueError):
            param_count([1, 0, 1])
        with pytest.raises(ValueError):
            glorot_init([], seed=0)


class TestGlorotInit:
    def test_deterministic_in_seed(self):
        a = glorot_init([1, 50, 50, 50, 50, 1], seed=1234)
        b = glorot_init([1, 50, 50, 50, 50, 1], seed=1234)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_different_seed_differs(self):
        a = glorot_init([1, 8, 1], seed=1)
        b = glorot_init([1, 8, 1], seed=2)
        assert not np.array_equal(a.weights[0], b.weights[0])

    def test_uniform_bound_per_layer(self):
        dims = [1, 50, 50, 50, 50, 1]
        params = glorot_init(dims, seed=7)
        # hand-evaluated first-layer bound: sqrt(6 / (1 + 50))
        assert np.sqrt(6.0 / 51.0) == pytest.approx(0.3430, abs=5e-5)
        for l, w in enumerate(params.weights):
            bound = np.sqrt(6.0 / (dims[l] + dims[l + 1]))
            assert np.all(np.abs(w) <= bound)

    def test_biases_zero(self):
        params = glorot_init([2, 9, 2], seed=3)
        for b in params.biases:
            assert np.all(b == 0.0)

    def test_extras_appended_to_flat(self):
        params = glorot_init([1, 5, 1], extras={"lambda": 0.0}, seed=0)
        vec = flatten(params)
        assert vec.size == param_count([1, 5, 1]) + 1
        assert vec[-1] == 0.0


class TestFlattenRoundTrip:
    def test_flatten_unflatten_identity(self):
        rng = np.random.default_rng(0)
        vec = rng.normal(size=param_count([2, 4, 3, 2]) + 2)
        params = unflatten([2, 4, 3, 2], vec, extras_names=["a", "b"])
        assert np.array_equal(flatten(params), vec)

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            unflatten([1, 2, 1], np.zeros(3))


class TestForward:
    def test_zero_params_give_zero_output(self):
        params = glorot_init([1, 4, 1], seed=0)
        for w in params.weights:
            w[:] = 0.0
        out = forward_values(params, [[0.3], [1.0]])
        assert np.all(out == 0.0)

    def test_single_affine_layer(self):
        params = unflatten([1, 1], np.array([2.0, 3.0]))
        out = forward_values(params, [[5.0]])
        assert out[0, 0] == 13.0

    def test_hand_computed_two_layer(self):
        # dims [1,2,1]: u(0) = W2 tanh(b1) + b2
        params = unflatten([1, 2, 1], np.array([0.5, -0.25, 0.1, -0.2, 1.5, 2.0, 0.75]))
        expected = 1.5 * np.tanh(0.1) + 2.0 * np.tanh(-0.2) + 0.75
        out = forward_values(params, [[0.0]])
        assert out[0, 0] == pytest.approx(expected, rel=1e-15)

    def test_graph_matches_plain_numpy_bitwise(self):
        params = glorot_init([2, 11, 7, 2], seed=5)
        X = np.random.default_rng(6).normal(size=(13, 2))
        g = ComputeGraph()
        node = forward(params, X, g)
        assert np.array_equal(g.value(node), forward_values(params, X))

    def test_identity_activation(self):
        params = glorot_init([1, 3, 1], seed=2)
        X = np.array([[0.7]])
        z = X @ params.weights[0].T + params.biases[0]
        expected = z @ params.weights[1].T + params.biases[1]
        out = forward_values(params, X, activation="identity")
        np.testing.assert_allclose(out, expected, rtol=1e-15)

    def test_shape_mismatch(self):
        params = glorot_init([2, 3, 1], seed=0)
        with pytest.raises(ValueError):
            forward_values(params, np.ones((4, 3)))

    def test_loss_gradient_matches_fd(self):
        """d(sum u)/d(theta) vs central differences on a [1,5,1] network."""
        params = glorot_init([1, 5, 1], seed=9)
        X = np.random.default_rng(10).uniform(-1, 1, size=(6, 1))

        def loss_at(vec):
            p = unflatten([1, 5, 1], vec)
            return float(np.sum(forward_values(p, X) ** 2))

        g = ComputeGraph()
        net = BoundMlp(g, params)
        out = net.apply(g.constant(X))
        loss = g.reduce_sum(g.square(out))
        grads = g.grad(loss, net.grad_targets())
        ad = np.concatenate([g.value(d).ravel() for d in grads])

        vec = flatten(params)
        h = 1e-6
        for i in range(vec.size):
            up, dn = vec.copy(), vec.copy()
            up[i] += h
            dn[i] -= h
            fd = (loss_at(up) - loss_at(dn)) / (2 * h)
            assert abs(ad[i] - fd) / max(abs(ad[i]), 1e-8) < 1e-5, f"coordinate {i}"


class TestBoundMlp:
    def test_set_flat_round_trip(self):
        params = glorot_init([1, 6, 1], extras={"lambda": 0.5}, seed=1)
        g = ComputeGraph()
        net = BoundMlp(g, params)
        rng = np.random.default_rng(2)
        vec = rng.normal(size=net.flat_size)
        net.set_flat(vec)
        g.recompute()
        got = np.concatenate([g.value(v).ravel() for v in net.grad_targets()])
        assert np.array_equal(got, vec)

    def test_bad_activation(self):
        with pytest.raises(ValueError):
            BoundMlp(ComputeGraph(), glorot_init([1, 2, 1], seed=0), activation="relu")


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        params = glorot_init([1, 5, 2], extras={"lambda": 0.25}, seed=4)
        path = tmp_path / "params.bin"
        save_params(path, params)
        loaded = load_params(path)
        assert loaded.dims == params.dims
        assert np.array_equal(flatten(loaded), flatten(params))
        assert loaded.extras == params.extras

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTPARAM" + b"\0" * 16)
        with pytest.raises(ValueError, match="bad magic"):
            load_params(path)

    def test_missing_file_has_path_context(self, tmp_path):
        with pytest.raises(OSError, match="nope.bin"):
            load_params(tmp_path / "nope.bin")
