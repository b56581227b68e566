"""ADAM update rule: hand-computed steps, sign/scale/determinism properties."""

import numpy as np
import pytest

from pinnscale.optim import AdamState, adam_step


def hand_adam(params, grads_sequence, lr=1e-4, b1=0.9, b2=0.999, eps=1e-8):
    """Straight transcription of the update recurrences, scalar-at-a-time."""
    params = np.array(params, dtype=float)
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    for t, g in enumerate(grads_sequence, start=1):
        g = np.asarray(g, dtype=float)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g**2
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


class TestAdamStep:
    def test_zero_gradient_leaves_params_unchanged(self):
        state = AdamState.zeros(4, lr=1e-3)
        params = np.array([1.0, -2.0, 0.5, 3.0])
        new, state = adam_step(params, np.zeros(4), state)
        assert np.array_equal(new, params)
        assert state.t == 1

    def test_first_step_bias_corrected(self):
        # scalar g = 0.5: m_hat = g, v_hat = g^2, step = -lr * g/(|g| + eps)
        state = AdamState.zeros(1, lr=1e-4)
        new, _ = adam_step(np.array([0.0]), np.array([0.5]), state)
        expected = -1e-4 * 0.5 / (0.5 + 1e-8)
        assert new[0] == pytest.approx(expected, rel=1e-12)

    def test_two_steps_constant_gradient_match_hand_computation(self):
        state = AdamState.zeros(3, lr=1e-4)
        params = np.array([0.1, -0.4, 2.0])
        g = np.ones(3)
        p1, state = adam_step(params, g, state)
        p2, state = adam_step(p1, g, state)
        expected = hand_adam(params, [g, g])
        np.testing.assert_allclose(p2, expected, rtol=0, atol=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            adam_step(np.zeros(3), np.zeros(4), AdamState.zeros(3))

    def test_non_finite_gradient_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            adam_step(np.zeros(2), np.array([1.0, np.nan]), AdamState.zeros(2))


class TestAdamProperties:
    def test_moves_against_gradient_sign(self):
        rng = np.random.default_rng(0)
        state = AdamState.zeros(50, lr=1e-3)
        params = rng.normal(size=50)
        g = rng.normal(size=50) * 10  # |g| >> eps
        new, _ = adam_step(params, g, state)
        assert np.all(np.sign(new - params) == -np.sign(g))

    def test_step_bounded_by_lr_for_constant_gradients(self):
        """With a constant gradient sequence, |step| <= lr exactly."""
        rng = np.random.default_rng(1)
        g = rng.normal(size=20)
        state = AdamState.zeros(20, lr=1e-4)
        params = np.zeros(20)
        for _ in range(50):
            new, state = adam_step(params, g, state)
            assert np.max(np.abs(new - params)) <= 1e-4 * (1 + 1e-6)
            params = new

    def test_step_bounded_by_classical_cap_for_arbitrary_gradients(self):
        """|step| <= lr * (1-b1)/sqrt(1-b2) for any gradient sequence when
        (1-b1) > sqrt(1-b2); this is the bias-corrected worst case (~3.16 lr
        at the defaults).  Same-sign bounded-ratio gradients stay much closer
        to lr because m averages a shorter window than v."""
        cap = (1 - 0.9) / np.sqrt(1 - 0.999)
        rng = np.random.default_rng(2)
        state = AdamState.zeros(10, lr=1e-3)
        params = np.zeros(10)
        worst_same_sign = 0.0
        for _ in range(200):
            g = rng.uniform(0.5, 1.5, size=10)
            new, state = adam_step(params, g, state)
            worst_same_sign = max(worst_same_sign, float(np.max(np.abs(new - params))))
            params = new
        assert worst_same_sign <= 1e-3 * 1.5
        state = AdamState.zeros(10, lr=1e-3)
        params = np.zeros(10)
        for _ in range(2000):
            g = rng.normal(size=10) * 10.0 ** rng.uniform(-3, 3, size=10)
            new, state = adam_step(params, g, state)
            assert np.max(np.abs(new - params)) <= 1e-3 * cap * (1 + 1e-9)
            params = new

    def test_deterministic(self):
        g = np.linspace(-1, 1, 7)
        a, _ = adam_step(np.zeros(7), g, AdamState.zeros(7))
        b, _ = adam_step(np.zeros(7), g, AdamState.zeros(7))
        assert np.array_equal(a, b)

    def test_state_copy_independent(self):
        state = AdamState.zeros(2)
        clone = state.copy()
        adam_step(np.zeros(2), np.ones(2), state)
        assert state.t == 1 and clone.t == 0
        assert np.all(clone.m == 0)
