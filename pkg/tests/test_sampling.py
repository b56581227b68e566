"""Latin hypercube properties, seed scheme, training-set construction."""

import numpy as np
import pytest

from pinnscale.problems import make_problem
from pinnscale.sampling import (
    build_test_set,
    build_training_set,
    dump_training_set,
    lhs,
    worker_seed,
)


class TestLhs:
    def test_single_point_inside_box(self):
        pts = lhs(1, [[-1, 7]], seed=0)
        assert pts.shape == (1, 1)
        assert -1 <= pts[0, 0] < 7

    def test_stratification_unit_bins(self):
        pts = lhs(8, [[-1, 7]], seed=5)
        bins = np.floor(pts[:, 0] + 1).astype(int)  # [-1,0) -> 0, ..., [6,7) -> 7
        assert sorted(bins) == list(range(8))

    @pytest.mark.parametrize("n", [1, 2, 7, 64, 1000])
    def test_marginal_stratification_every_dimension(self, n):
        box = [[-1, 7], [0, np.pi / 2]]
        pts = lhs(n, box, seed=42)
        for d, (lo, hi) in enumerate(box):
            strata = np.floor((pts[:, d] - lo) / (hi - lo) * n).astype(int)
            assert sorted(strata) == list(range(n))

    def test_deterministic(self):
        a = lhs(16, [[-1, 7]], seed=99)
        b = lhs(16, [[-1, 7]], seed=99)
        assert np.array_equal(a, b)

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError, match="width"):
            lhs(4, [[2, 2]], seed=0)

    def test_bad_count_rejected(self):
        with pytest.raises(ValueError):
            lhs(0, [[0, 1]], seed=0)


class TestWorkerSeed:
    def test_formula(self):
        assert worker_seed(1234, 0) == 1234
        assert worker_seed(1234, 3) == 4234

    def test_eight_distinct(self):
        seeds = {worker_seed(1234, r) for r in range(8)}
        assert len(seeds) == 8

    def test_negative_rank_rejected(self):
        with pytest.raises(ValueError):
            worker_seed(1, -1)

    def test_rank_sets_disjoint(self):
        problem = make_problem("laplace1d")
        a = build_training_set(problem, 64, seed=worker_seed(1234, 0))
        b = build_training_set(problem, 64, seed=worker_seed(1234, 1))
        rows_a = {tuple(r) for r in a.points["f"]}
        rows_b = {tuple(r) for r in b.points["f"]}
        assert not rows_a & rows_b


class TestBuildTrainingSet:
    def test_laplace_counts_and_boundary(self):
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 64, seed=7)
        assert tset.n_f == 64
        assert np.array_equal(tset.points["g"], [[-1.0], [7.0]])
        assert tset.n_h == 0 and tset.m_obs == 0
        assert tset.n_hat == 66
        assert np.all((tset.points["f"] >= -1) & (tset.points["f"] < 7))

    def test_laplace_rejects_wrong_counts(self):
        problem = make_problem("laplace1d")
        with pytest.raises(ValueError, match="n_g"):
            build_training_set(problem, 8, n_g=5, seed=0)
        with pytest.raises(ValueError, match="m_obs"):
            build_training_set(problem, 8, m_obs=3, seed=0)

    def test_schrodinger_boundary_pairs_and_ic(self):
        problem = make_problem("schrodinger1d")
        tset = build_training_set(problem, 32, n_g=200, n_h=200, seed=1)
        assert tset.points["g"].shape == (200, 2)
        assert np.all(tset.points["g"][:, 0] == -5.0)
        assert tset.points["g"][0, 1] == 0.0 and tset.points["g"][-1, 1] == pytest.approx(np.pi / 2)
        assert tset.points["h"].shape == (200, 2)
        assert np.all(tset.points["h"][:, 1] == 0.0)

    def test_inverse_observations_on_exact_solution(self):
        problem = make_problem("laplace1d-inverse")
        tset = build_training_set(problem, 16, m_obs=32, seed=3)
        assert tset.m_obs == 32
        np.testing.assert_allclose(tset.observations, np.sin(np.pi * tset.points["u"]), rtol=1e-15)

    def test_default_weights_sum_to_one(self):
        problem = make_problem("schrodinger1d")
        tset = build_training_set(problem, 50, n_g=20, n_h=30, seed=2)
        for comp in tset.components():
            assert float(np.sum(tset.weights[comp])) == pytest.approx(1.0, rel=1e-12)
            assert np.all(tset.weights[comp] > 0)

    def test_test_set_same_cardinality_disjoint_interior(self):
        problem = make_problem("laplace1d")
        tset = build_training_set(problem, 64, seed=11)
        vset = build_test_set(problem, tset, seed=11)
        assert vset.n_f == tset.n_f and vset.n_g == tset.n_g
        inter = {tuple(r) for r in tset.points["f"]} & {tuple(r) for r in vset.points["f"]}
        assert not inter

    def test_dump_round_trip_rows(self, tmp_path):
        problem = make_problem("laplace1d-inverse")
        tset = build_training_set(problem, 4, m_obs=3, seed=0)
        path = tmp_path / "set.csv"
        dump_training_set(tset, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("component,coord0,coord1,weight")
        assert len(lines) == 1 + 4 + 2 + 3
