"""Loss assembly, error metrics, bound evaluators, regime classification."""

import numpy as np
import pytest

from pinnscale.autodiff import ComputeGraph
from pinnscale.metrics import (
    BoundInputs,
    assemble_loss,
    build_loss_nodes,
    classify_regime,
    gap_bound,
    generalization_bound,
    pointsec,
    relative_gap,
    relative_l2_error,
    rho,
)
from pinnscale.model import glorot_init
from pinnscale.problems import make_problem
from pinnscale.sampling import build_training_set


def zeroed(dims, extras=None):
    params = glorot_init(dims, extras=extras, seed=0)
    for w in params.weights:
        w[:] = 0.0
    return params


class TestAssembleLoss:
    def test_zero_residuals_zero_total(self):
        # identity activation + zero weights -> u == 0 everywhere, and the
        # forcing is zero at integer points
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 4, seed=0)
        tset.points["f"] = np.array([[0.0], [1.0], [2.0], [3.0]])
        report = assemble_loss(zeroed([1, 3, 1]), tset)
        assert report.total == pytest.approx(0.0, abs=1e-25)

    def test_single_point_unit_weight_squares(self):
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 1, seed=0)
        tset.points["f"] = np.array([[0.5]])
        tset.weights["f"] = np.array([[1.0]])
        report = assemble_loss(zeroed([1, 3, 1]), tset)
        # residual is -pi^2 at x=0.5 for the zero network: contributes pi^4
        assert report.components["f"] == pytest.approx(np.pi**4, rel=1e-12)

    def test_zero_network_hand_summed(self):
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 4, seed=3)
        pts = tset.points["f"]
        expected = float(np.sum((np.pi**2 * np.sin(np.pi * pts)) ** 2 * 0.25))
        report = assemble_loss(zeroed([1, 4, 1]), tset)
        assert report.components["f"] == pytest.approx(expected, rel=1e-14)

    def test_unit_weights_equal_mean_of_squared_residuals(self):
        """Monte-Carlo rule: component loss == sum(residual^2 * (1/N)),
        bitwise in the arithmetic order used (per-point weighting before the
        sum), and equal to the unweighted mean within float tolerance."""
        problem = make_problem("laplace1d")
        params = glorot_init([1, 6, 1], seed=4)
        tset = build_training_set(problem, 32, seed=5)
        nodes = build_loss_nodes(params, tset)
        res = nodes.graph.value(nodes.residuals["f"][0])
        same_order = float(np.sum(np.square(res) * tset.weights["f"]))
        assert nodes.component_values()["f"] == same_order
        assert nodes.component_values()["f"] == pytest.approx(float(np.mean(res**2)), rel=1e-14)

    def test_total_is_weighted_component_sum(self):
        problem = make_problem("laplace1d-inverse")
        tset = build_training_set(problem, 8, m_obs=5, seed=6)
        params = glorot_init([1, 5, 1], extras={"lambda": 0.3}, seed=7)
        omega = {"f": 1.0, "g": 2.0, "u": 0.5}
        report = assemble_loss(params, tset, omega=omega)
        expected = sum(omega[v] * report.components[v] for v in report.components)
        assert report.total == pytest.approx(expected, rel=1e-14)
        assert report.eps_d == pytest.approx(
            np.sqrt(report.components["f"] + 2.0 * report.components["g"]), rel=1e-12
        )
        assert report.eps_u == pytest.approx(np.sqrt(report.components["u"]), rel=1e-12)

    def test_empty_component_with_weight_rejected(self):
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 4, seed=0)
        with pytest.raises(ValueError, match="empty"):
            assemble_loss(glorot_init([1, 3, 1], seed=0), tset, omega={"u": 1.0})

    def test_vector_residual_squared_euclidean_norm(self):
        problem = make_problem("schrodinger1d")
        tset = build_training_set(problem, 6, n_g=4, n_h=4, seed=1)
        params = glorot_init([2, 5, 2], seed=2)
        report = assemble_loss(params, tset)
        assert set(report.components) == {"f", "g", "h"}
        assert all(v >= 0 for v in report.components.values())


class TestScalarMetrics:
    def test_relative_l2_cases(self):
        exact = np.array([1.0, 2.0, -1.0])
        assert relative_l2_error(exact, exact) == 0.0
        assert relative_l2_error(np.zeros(3), exact) == pytest.approx(1.0)
        assert relative_l2_error(2 * exact, exact) == pytest.approx(1.0)

    def test_relative_l2_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero norm"):
            relative_l2_error(np.ones(3), np.zeros(3))

    def test_relative_l2_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            relative_l2_error(np.ones(3), np.ones(4))

    def test_rho_values(self):
        assert rho(64, 8, 1) == 8.0
        assert rho(350, 10 * np.pi / 2, 2) == pytest.approx(4.72, abs=0.01)
        assert rho(17, 17, 3) == pytest.approx(1.0)

    def test_rho_invalid(self):
        with pytest.raises(ValueError):
            rho(0, 8, 1)
        with pytest.raises(ValueError):
            rho(8, -1, 1)

    def test_pointsec_values(self):
        assert pointsec(500, 64, 4.08) == pytest.approx(7843, rel=1e-3)
        assert pointsec(500, 512, 4.19) == pytest.approx(61097, rel=1e-3)
        assert pointsec(0, 64, 1.0) == 0.0

    def test_pointsec_invalid_time(self):
        with pytest.raises(ValueError):
            pointsec(500, 64, 0.0)


class TestBounds:
    def test_omega_zero_collapses_to_physics_term(self):
        b = BoundInputs(c_pde=2.0, c_quad_y=4.0, alpha=1.0, omega_u=0.0, n_hat=100)
        got = generalization_bound(b, eps_td=0.01)
        assert got == pytest.approx(2.0 * (0.01 + 2.0 * 100 ** (-0.5)), rel=1e-12)

    def test_pure_bias_term(self):
        b = BoundInputs(c_pde=0.0, c_quad_y=0.0, c_quad_x=0.0, omega_u=3.0, mu_hat=0.4, n_hat=1, m_obs=10)
        got = generalization_bound(b, eps_td=0.0, eps_tu=0.0)
        assert got == pytest.approx(3.0 * 0.4 / 4.0, rel=1e-12)

    def test_hand_evaluated_formula(self):
        b = BoundInputs(c_pde=1.0, c_quad_y=1.0, alpha=1.0, omega_u=0.0, n_hat=100)
        assert generalization_bound(b, eps_td=0.01) == pytest.approx(0.11, rel=1e-12)

    def test_count_guards(self):
        with pytest.raises(ValueError, match="n_hat"):
            generalization_bound(BoundInputs(c_pde=1.0, n_hat=0), eps_td=0.0)
        with pytest.raises(ValueError, match="m_obs"):
            generalization_bound(BoundInputs(omega_u=1.0, n_hat=5, m_obs=0), eps_td=0.0)

    def test_monotonicity_over_random_grid(self):
        """Nonincreasing in the counts, nondecreasing in errors and bias."""
        rng = np.random.default_rng(8)
        for _ in range(200):
            b = BoundInputs(
                c_pde=rng.uniform(0.1, 3),
                c_quad_y=rng.uniform(0, 2),
                c_quad_x=rng.uniform(0, 2),
                alpha=rng.uniform(0.2, 2),
                beta=rng.uniform(0.2, 2),
                omega_u=rng.uniform(0.1, 2),
                mu_hat=rng.uniform(0, 1),
                n_hat=int(rng.integers(2, 1000)),
                m_obs=int(rng.integers(2, 1000)),
            )
            e_td, e_tu = rng.uniform(0, 1, size=2)
            base = generalization_bound(b, e_td, e_tu)
            bigger_n = BoundInputs(**{**b.__dict__, "n_hat": b.n_hat * 2})
            bigger_m = BoundInputs(**{**b.__dict__, "m_obs": b.m_obs * 2})
            assert generalization_bound(bigger_n, e_td, e_tu) <= base + 1e-15
            assert generalization_bound(bigger_m, e_td, e_tu) <= base + 1e-15
            assert generalization_bound(b, e_td * 1.5 + 0.01, e_tu) >= base - 1e-15
            assert generalization_bound(b, e_td, e_tu * 1.5 + 0.01) >= base - 1e-15
            mu_up = BoundInputs(**{**b.__dict__, "mu_hat": b.mu_hat + 0.1})
            assert generalization_bound(mu_up, e_td, e_tu) >= base - 1e-15

    def test_gap_bound_values(self):
        assert gap_bound(1.0, 1.0, 4) == pytest.approx(1.0)
        assert gap_bound(0.0, 2.0, 10) == 0.0
        assert gap_bound(4.0, 2.0, 100) == pytest.approx(0.04, rel=1e-12)

    def test_gap_bound_zero_count(self):
        with pytest.raises(ValueError):
            gap_bound(1.0, 1.0, 0)

    def test_invalid_bound_inputs(self):
        with pytest.raises(ValueError):
            BoundInputs(c_pde=-1.0)
        with pytest.raises(ValueError):
            BoundInputs(alpha=0.0)


class _Rec:
    def __init__(self, n_f, error, gap_rel):
        self.n_f = n_f
        self.error = error
        self.gap_rel = gap_rel


class TestClassifyRegime:
    def test_rule_application(self):
        recs = [_Rec(512, 1e-3, 1e-5), _Rec(512, 1.1e-3, 2e-5), _Rec(8, 0.9, 5.0), _Rec(8, 0.95, 3.0)]
        labels = classify_regime(recs)
        assert labels[512] == "permanent"
        assert labels[8] == "pre-asymptotic"

    def test_transition_label(self):
        recs = [
            _Rec(64, 0.05, 0.5),
            _Rec(64, 0.08, 0.4),
            _Rec(512, 1e-3, 1e-4),
            _Rec(512, 1.2e-3, 1e-4),
        ]
        labels = classify_regime(recs)
        assert labels[64] == "transition"
        assert labels[512] == "permanent"

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            classify_regime([])

    def test_single_seed_rejected(self):
        with pytest.raises(ValueError, match=">= 2"):
            classify_regime([_Rec(8, 0.5, 1.0)])

    def test_thresholds_configurable(self):
        recs = [_Rec(16, 0.2, 1e-5), _Rec(16, 0.25, 1e-5)]
        assert classify_regime(recs)[16] == "permanent"
        assert classify_regime(recs, error_threshold=0.1)[16] == "pre-asymptotic"

    def test_relative_gap_floor(self):
        assert relative_gap(0.0, 0.0) == 0.0
        assert relative_gap(0.0, 1.0) == pytest.approx(1e30)


class TestEmpiricalGapDecay:
    def test_train_test_gap_decays_at_monte_carlo_rate(self):
        """|eps_T - eps_V| over resampled point pairs decays roughly like
        N^{-1/2} for a fixed smooth residual field (iid sampling)."""
        rng = np.random.default_rng(123)

        def residual(x):
            return np.sin(np.pi * x) + 0.3

        n_list = [32, 128, 512, 2048, 8192]
        gaps = []
        for n in n_list:
            reps = []
            for _ in range(32):
                train = rng.uniform(-1, 7, size=n)
                test = rng.uniform(-1, 7, size=n)
                e_t = np.sqrt(np.mean(residual(train) ** 2))
                e_v = np.sqrt(np.mean(residual(test) ** 2))
                reps.append(abs(e_t - e_v))
            gaps.append(np.sqrt(np.mean(np.square(reps))))
        slope = np.polyfit(np.log10(n_list), np.log10(gaps), 1)[0]
        assert -0.8 <= slope <= -0.2
