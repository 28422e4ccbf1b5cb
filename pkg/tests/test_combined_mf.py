import numpy as np
import pytest
import scipy.sparse as sp

from poikg.candidate_extraction import CandidateSet
from poikg.checkin_data import TimeSlotSpec, build_frequency_matrix, cluster_regions
from poikg.combined_mf import (
    FactorModel,
    MFConfig,
    combine,
    combine_scores,
    dampen_counts,
    fit_combined_mf,
    mf_objective,
    observed_entries,
    predict_pref,
    predict_st,
    train_mf,
)
from poikg.errors import CandidateIndexError, ConfigError, DataError, DivergenceError, UnknownEntityError
from poikg.kg_builder import build_graph


def factor_model(E, O, U, V, st_users=None, st_pois=None, users=None, pois=None, alpha=0.0):
    E, O, U, V = (np.asarray(m, dtype=float) for m in (E, O, U, V))
    users = users or [f"u{i}" for i in range(U.shape[1])]
    pois = pois or [f"p{j}" for j in range(V.shape[1])]
    return FactorModel(
        E=E,
        O=O,
        U=U,
        V=V,
        alpha=alpha,
        st_users=st_users or users[: E.shape[1]],
        st_pois=st_pois or pois[: O.shape[1]],
        users=users,
        pois=pois,
    )


def rmse(result, target):
    return float(np.sqrt(np.mean((result.row_factors.T @ result.col_factors - target) ** 2)))


class TestTrainMF:
    def test_recovers_rank_one_matrix(self):
        rng = np.random.default_rng(0)
        target = np.outer(rng.uniform(0.5, 1.5, size=8), rng.uniform(0.5, 1.5, size=6))
        cfg = MFConfig(k=1, alpha=0.0, learning_rate=0.01, epochs=500, batch_size=4, sample_zeros=False, dampen=False)
        assert rmse(train_mf(target, cfg), target) < 1e-2

    def test_recovers_rank_three_matrix(self):
        rng = np.random.default_rng(1)
        left, _ = np.linalg.qr(rng.normal(size=(12, 3)))
        right, _ = np.linalg.qr(rng.normal(size=(10, 3)))
        target = left @ np.diag([3.0, 2.5, 2.0]) @ right.T
        cfg = MFConfig(k=3, alpha=0.0, learning_rate=0.05, epochs=500, batch_size=16, sample_zeros=False, dampen=False)
        result = train_mf(target, cfg)
        assert rmse(result, target) < 1e-2
        assert result.objective_trace[-1] < result.objective_trace[0]

    def test_heavy_regularization_shrinks_predictions(self):
        counts = np.ones((4, 5))
        result = train_mf(counts, MFConfig(k=3, alpha=1e6, epochs=5))
        assert np.abs(result.row_factors.T @ result.col_factors).max() < 1e-6

    def test_zero_matrix(self):
        result = train_mf(np.zeros((3, 4)), MFConfig(k=2, alpha=0.0, epochs=3))
        assert result.objective_trace == [0.0] * 4
        assert mf_objective(np.zeros((2, 3)), np.zeros((2, 4)), np.array([0]), np.array([1]), np.zeros(1), 0.0) == 0.0

    def test_objective_decreases_on_counts(self):
        rng = np.random.default_rng(2)
        counts = rng.poisson(0.4, size=(30, 25))
        result = train_mf(counts, MFConfig(k=5, epochs=50))
        assert len(result.objective_trace) == 51
        assert result.objective_trace[-1] < result.objective_trace[0]

    def test_fixed_seed_is_reproducible(self):
        counts = np.random.default_rng(3).poisson(1.0, size=(10, 9))
        a = train_mf(counts, MFConfig(k=4, epochs=10, seed=7))
        b = train_mf(counts, MFConfig(k=4, epochs=10, seed=7))
        np.testing.assert_array_equal(a.row_factors, b.row_factors)
        assert a.objective_trace == b.objective_trace
        c = train_mf(counts, MFConfig(k=4, epochs=10), seed=8)
        assert not np.array_equal(a.row_factors, c.row_factors)

    def test_divergence(self):
        cfg = MFConfig(k=2, alpha=0.0, learning_rate=10.0, epochs=50, sample_zeros=False, dampen=False)
        with np.errstate(all="ignore"):
            with pytest.raises(DivergenceError):
                train_mf(np.full((5, 5), 100.0), cfg)

    @pytest.mark.parametrize("values", [{"k": 0}, {"alpha": -0.1}, {"learning_rate": 0}, {"batch_size": 0}])
    def test_invalid_config(self, values):
        with pytest.raises(ConfigError):
            MFConfig.from_config(values)


class TestObservedEntries:
    def test_dampening(self):
        np.testing.assert_allclose(dampen_counts([0, 1, np.e - 1]), [0, 1 + np.log(2), 2])

    def test_sampled_zeros(self):
        rng = np.random.default_rng(4)
        dense = (rng.uniform(size=(9, 7)) < 0.2) * rng.integers(1, 5, size=(9, 7))
        rows, cols, vals = observed_entries(build_sparse(dense), True, rng)
        n_nonzero = int((dense != 0).sum())
        assert len(vals) == 2 * n_nonzero
        cells = set(zip(rows.tolist(), cols.tolist()))
        assert len(cells) == len(vals)
        np.testing.assert_array_equal(dense[rows[n_nonzero:], cols[n_nonzero:]], 0)
        np.testing.assert_array_equal(vals[:n_nonzero], dense[rows[:n_nonzero], cols[:n_nonzero]])

    def test_no_zero_sampling(self):
        dense = np.array([[0, 2], [1, 0]])
        rows, cols, vals = observed_entries(build_sparse(dense), False, np.random.default_rng(0))
        assert sorted(zip(rows.tolist(), cols.tolist(), vals.tolist())) == [(0, 1, 2.0), (1, 0, 1.0)]


def build_sparse(dense):
    return sp.csr_matrix(np.asarray(dense, dtype=float))


class TestPrediction:
    @pytest.mark.parametrize("bad", [np.nan, np.inf])
    def test_non_finite_factors_are_rejected(self, tmp_path, bad):
        with pytest.raises(DataError):
            factor_model(E=[[1], [2]], O=[[3], [bad]], U=[[0], [0]], V=[[0], [0]])
        # a corrupted checkpoint is caught on load
        good = factor_model(E=[[1], [2]], O=[[3], [1]], U=[[0], [0]], V=[[0], [0]])
        good.V[0, 0] = bad
        path = str(tmp_path / "factors.npz")
        good.save(path)
        with pytest.raises(DataError):
            FactorModel.load(path)

    def test_predict_st_by_hand(self):
        model = factor_model(E=[[1], [2]], O=[[3], [-1]], U=[[0], [0]], V=[[0], [0]])
        assert predict_st(0, 0, model) == 1.0

    def test_zero_factor(self):
        model = factor_model(E=[[0], [0]], O=[[3], [-1]], U=[[0], [0]], V=[[5], [5]])
        assert predict_st(0, 0, model) == 0.0
        assert predict_pref(0, 0, model) == 0.0

    def test_predict_pref_by_hand(self):
        model = factor_model(E=[[1], [1]], O=[[1], [1]], U=[[1, 1], [1, 1]], V=[[2], [3]])
        assert predict_pref(0, 0, model) == 5.0
        assert predict_pref(1, 0, model) == predict_pref(0, 0, model)

    def test_self_product(self):
        column = np.array([[0.3], [-1.2]])
        model = factor_model(E=column, O=column, U=column, V=column)
        assert predict_st(0, 0, model) == pytest.approx(float(np.sum(column ** 2)))

    def test_index_outside_candidates(self):
        model = factor_model(E=[[1]], O=[[1]], U=[[1, 1]], V=[[1]])
        with pytest.raises(CandidateIndexError):
            predict_st(1, 0, model)
        with pytest.raises(CandidateIndexError):
            predict_pref(0, 3, model)

    def test_combine_product(self):
        model = factor_model(E=[[0.5]], O=[[1.0]], U=[[0.4]], V=[[1.0]])
        assert combine(0, 0, model) == pytest.approx(0.2)

    def test_combine_clamps_negative_scores(self):
        model = factor_model(E=[[-0.3]], O=[[1.0]], U=[[0.8]], V=[[1.0]])
        assert combine(0, 0, model) == 0.0

    def test_combine_outside_candidate_set(self):
        model = factor_model(E=[[1.0]], O=[[1.0]], U=[[1.0]], V=[[1.0, 2.0]], st_pois=["p0"])
        assert combine(0, 1, model) == 0.0
        assert combine(0, 0, model) == 1.0

    def test_combine_scores_match_combine(self):
        rng = np.random.default_rng(5)
        model = factor_model(
            E=rng.normal(size=(3, 4)),
            O=rng.normal(size=(3, 5)),
            U=rng.normal(size=(3, 6)),
            V=rng.normal(size=(3, 8)),
            st_users=["u1", "u3", "u4", "u5"],
            st_pois=["p7", "p0", "p2", "p3", "p5"],
        )
        pois = np.arange(8)
        for u in range(6):
            scores = combine_scores(u, pois, model)
            assert (scores >= 0).all()
            np.testing.assert_allclose(scores, [combine(u, v, model) for v in pois])
        assert (combine_scores(0, pois, model) == 0).all()

    def test_ranking_invariant_under_rescaling(self):
        rng = np.random.default_rng(6)
        E, O, U, V = (rng.uniform(0.1, 1.0, size=(2, n)) for n in (3, 7, 3, 7))
        base = factor_model(E, O, U, V)
        scaled = factor_model(3.0 * E, O, U, 0.5 * V)
        for u in range(3):
            np.testing.assert_array_equal(
                np.argsort(combine_scores(u, np.arange(7), base)),
                np.argsort(combine_scores(u, np.arange(7), scaled)),
            )

    def test_unknown_keys(self):
        model = factor_model(E=[[1]], O=[[1]], U=[[1]], V=[[1]])
        with pytest.raises(UnknownEntityError):
            model.user_index("nobody")

    def test_save_load_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        model = factor_model(
            rng.normal(size=(2, 2)), rng.normal(size=(2, 3)), rng.normal(size=(2, 4)), rng.normal(size=(2, 5)),
            st_users=["u3", "u1"], st_pois=["p4", "p0", "p2"], alpha=0.05,
        )
        path = str(tmp_path / "factors.npz")
        model.save(path)
        loaded = FactorModel.load(path)
        for name in ("E", "O", "U", "V"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(model, name))
        assert (loaded.st_users, loaded.st_pois, loaded.users, loaded.pois, loaded.alpha) == (
            model.st_users, model.st_pois, model.users, model.pois, model.alpha
        )
        np.testing.assert_array_equal(loaded.st_poi_index, [1, -1, 2, -1, 0])


class TestFitCombined:
    def test_candidate_restricted_and_global_factors(self, tiny_log):
        regions = cluster_regions([(r.lat, r.lon) for r in tiny_log], 1)
        graph = build_graph(tiny_log, TimeSlotSpec(slot_hours=8), regions)
        candidates = CandidateSet(user_set=[0], poi_set=[3, 2], pairs=[])
        result = fit_combined_mf(tiny_log, graph, candidates, MFConfig(k=2, epochs=4))
        model = result.model
        assert model.st_users == ["u1"]
        assert model.st_pois == ["p2", "p1"]
        assert model.E.shape == (2, 1)
        assert model.U.shape == (2, 2)
        assert model.V.shape == (2, 3)
        assert len(result.st_trace) == len(result.pref_trace) == 5
        assert combine(model.user_index("u2"), 0, model) == 0.0
        assert combine(0, model.poi_index("p3"), model) == 0.0

    def test_frequency_matrix_feeds_training(self, tiny_log):
        matrix = build_frequency_matrix(tiny_log, ["u1", "u2"], ["p1", "p2", "p3"])
        result = train_mf(matrix, MFConfig(k=2, epochs=2))
        assert result.row_factors.shape == (2, 2)
        assert result.col_factors.shape == (2, 3)
