import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsehess.bench import DesignSpec, ModelSpec, gen_response, sample_design
from sparsehess.moments import DataSet, MomentPair, compute_moments
from sparsehess.oracle import kkt_check
from sparsehess.solver import SolverConfig, solve
from sparsehess.tuning import (
    LambdaPath,
    cv_select,
    kfold_split,
    lambda_path,
    path_solve,
    validation_loss,
)
from tests.conftest import random_psd_moments


def model2_data(n=100, p=40, seed=3):
    X = sample_design(DesignSpec(n=n, p=p, rho=0.0, seed=seed))
    y = gen_response(X, ModelSpec(model_id=2, noise_sd=0.1), seed)
    return DataSet(y=y, X=X)


class TestLambdaPath:
    def test_log_spacing(self):
        Q = np.array([[2.0, 0.1], [0.1, -0.5]])
        mo = MomentPair(S=np.eye(2), Q=Q, n=10, p=2)
        path = lambda_path(mo, n=10, grid_size=3, span=100.0)
        assert np.allclose(path.values, [2.0, 0.2, 0.02])

    def test_anchor_formula(self):
        mo = MomentPair(S=np.eye(100), Q=np.eye(100), n=100, p=100)
        path = lambda_path(mo, n=100)
        assert path.anchor == pytest.approx(math.sqrt(math.log(100) / 100))
        assert path.anchor == pytest.approx(0.2146, abs=1e-4)

    def test_degenerate_q(self):
        mo = MomentPair(S=np.eye(3), Q=np.zeros((3, 3)), n=10, p=3)
        with pytest.raises(ValueError, match="degenerate problem: Q = 0"):
            lambda_path(mo, n=10)

    def test_top_value_fully_penalizes(self, rng):
        # KKT at zero: the all-zero matrix is optimal at values[0]
        mo = random_psd_moments(rng, 6)
        path = lambda_path(mo, n=mo.n)
        lam_top = float(path.values[0])
        cert = kkt_check(np.zeros((6, 6)), mo, lam_top, 1e-12)
        assert cert.passed
        # at the exact boundary the stopped solve can leave dust of the
        # order of the stopping tolerance; any strict margin gives exact 0
        rep_eq = solve(mo, SolverConfig(lam=lam_top))
        assert np.abs(rep_eq.state.Phi).max() <= 1e-4 * lam_top
        rep = solve(mo, SolverConfig(lam=lam_top * 1.001))
        assert np.array_equal(rep.state.Phi, np.zeros((6, 6)))

    def test_anchor_spans_benchmark_scale_path(self):
        data = model2_data()
        mo = compute_moments(data)
        path = lambda_path(mo, data.n)
        assert path.values.min() <= path.anchor <= path.values.max()

    def test_rejects_increasing_values(self):
        with pytest.raises(ValueError, match="decreasing"):
            LambdaPath(values=np.array([0.1, 1.0]), anchor=0.5)


class TestKfoldSplit:
    def test_leave_one_out_structure(self):
        folds = kfold_split(10, 10, seed=0)
        assert all(len(val) == 1 for _, val in folds)

    def test_balanced_sizes(self):
        folds = kfold_split(7, 3, seed=1)
        assert sorted(len(val) for _, val in folds) == [2, 2, 3]

    def test_deterministic(self):
        a = kfold_split(20, 4, seed=42)
        b = kfold_split(20, 4, seed=42)
        for (tr_a, va_a), (tr_b, va_b) in zip(a, b):
            assert np.array_equal(tr_a, tr_b) and np.array_equal(va_a, va_b)

    def test_k_greater_than_n(self):
        with pytest.raises(ValueError):
            kfold_split(3, 4, seed=0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 50), st.integers(0, 2**31), st.data())
    def test_exhaustive_and_disjoint(self, n, seed, data):
        K = data.draw(st.integers(2, n))
        folds = kfold_split(n, K, seed)
        val_union = np.concatenate([val for _, val in folds])
        assert sorted(val_union.tolist()) == list(range(n))
        for train, val in folds:
            assert set(train) & set(val) == set()
            assert sorted(np.concatenate([train, val]).tolist()) == list(range(n))


class TestCvSelect:
    def test_singleton_path(self):
        data = model2_data(p=20)
        path = LambdaPath(values=np.array([0.3]), anchor=0.1)
        res = cv_select(data, path, K=4, seed=0, cfg=SolverConfig(lam=1.0))
        assert res.selected == 0.3
        assert res.selected_index == 0

    def test_zero_loss_for_zero_estimate(self, rng):
        mo = random_psd_moments(rng, 5)
        assert validation_loss(np.zeros((5, 5)), mo) == 0.0

    def test_fold_losses_shape_and_finite(self):
        data = model2_data(p=15)
        mo = compute_moments(data)
        path = lambda_path(mo, data.n, grid_size=5)
        res = cv_select(data, path, K=5, seed=7, cfg=SolverConfig(lam=1.0))
        assert res.fold_losses.shape == (5, 5)
        assert np.isfinite(res.mean_loss).all()
        assert res.selected in res.lambdas

    def test_selection_prefers_larger_lambda_on_tie(self):
        # identical loss columns: argmin must take the first (largest)
        data = model2_data(p=10)
        path = LambdaPath(values=np.array([1e9, 1e8]), anchor=1.0)
        # both penalties exceed every fold's max |Q|: all solutions zero
        res = cv_select(data, path, K=3, seed=0, cfg=SolverConfig(lam=1.0))
        assert (res.mean_loss == 0.0).all()
        assert res.selected == 1e9

    def test_warm_equals_cold_objective(self, rng):
        mo = random_psd_moments(rng, 12)
        path = lambda_path(mo, mo.n, grid_size=8)
        cfg = SolverConfig(lam=1.0, tol=1e-6, max_iter=100000)
        from sparsehess.solver import objective_value

        warm = path_solve(mo, path.values, cfg)
        for lam, warm_rep in zip(path.values, warm):
            cold_rep = solve(mo, SolverConfig(lam=float(lam), tol=1e-6,
                                              max_iter=100000))
            ow = objective_value(warm_rep.state.Phi, warm_rep.state.Phi, mo,
                                 float(lam))
            oc = objective_value(cold_rep.state.Phi, cold_rep.state.Phi, mo,
                                 float(lam))
            assert ow == pytest.approx(oc, rel=1e-5, abs=1e-9)

    def test_null_model_stays_sparse(self):
        # pure noise: the selected penalty should keep nearly all
        # off-diagonal pairs out
        fractions = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            p = 30
            X = rng.standard_normal((100, p))
            y = rng.standard_normal(100)
            data = DataSet(y=y, X=X)
            mo = compute_moments(data)
            path = lambda_path(mo, data.n, grid_size=12)
            assert path.values.min() <= path.anchor <= path.values.max()
            res = cv_select(data, path, K=5, seed=seed,
                            cfg=SolverConfig(lam=1.0))
            rep = solve(mo, SolverConfig(lam=res.selected))
            phi = rep.state.Phi
            off = [
                (i, j)
                for i in range(p)
                for j in range(i + 1, p)
                if phi[i, j] != 0.0 or phi[j, i] != 0.0
            ]
            fractions.append(len(off) / math.comb(p, 2))
        assert np.mean(fractions) <= 0.01
