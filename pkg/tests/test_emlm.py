import numpy as np
import pytest

from speechscreen.dataset import Label
from speechscreen.emlm import (
    DEFAULT_ALPHA,
    EmlmModel,
    distance_matrix,
    emlm_fit,
    emlm_from_dict,
    emlm_importance,
    emlm_predict,
    emlm_predict_batch,
    emlm_sensitivity,
    emlm_to_dict,
)
from speechscreen.errors import TrainingError


def naive_distances(R, X):
    """Independent double-loop oracle."""
    H = np.empty((R.shape[0], X.shape[0]))
    for i in range(R.shape[0]):
        for j in range(X.shape[0]):
            H[i, j] = np.sqrt(((R[i] - X[j]) ** 2).sum())
    return H


def cluster_data(seed=0, n_per_class=3, n_features=2, gap=8.0):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.standard_normal((n_per_class, n_features)) * 0.2,
        rng.standard_normal((n_per_class, n_features)) * 0.2 + gap,
    ])
    y = [Label.CONTROL] * n_per_class + [Label.AD] * n_per_class
    return X, y


class TestDistanceMatrix:
    def test_three_four_five(self):
        R = np.array([[0.0, 0.0], [3.0, 4.0]])
        H = distance_matrix(R, R)
        assert H.tolist() == [[0.0, 5.0], [5.0, 0.0]]

    def test_single_point(self):
        p = np.array([[1.0, 2.0, 3.0]])
        assert distance_matrix(p, p).tolist() == [[0.0]]

    def test_bitwise_equal_to_naive_oracle(self):
        rng = np.random.default_rng(1)
        R = rng.standard_normal((5, 3))
        X = rng.standard_normal((7, 3))
        assert (distance_matrix(R, X) == naive_distances(R, X)).all()

    def test_dimension_mismatch(self):
        with pytest.raises(TrainingError):
            distance_matrix(np.zeros((2, 3)), np.zeros((2, 4)))


class TestFit:
    def test_two_point_symbolic_solve(self):
        # Two unit-distance points: H = [[0,1],[1,0]], H H^T = I, so
        # W = Y H^T / (1 + alpha) with Y = I for one point per class.
        X = np.array([[0.0], [1.0]])
        y = ["a", "b"]
        model = emlm_fit(X, y)
        alpha = model.alpha
        expected = np.array([[0.0, 1.0], [1.0, 0.0]]) / (1.0 + alpha)
        assert model.weights == pytest.approx(expected, rel=1e-12)
        _, labels = emlm_predict_batch(model, X)
        assert labels == ["a", "b"]

    def test_default_alpha_is_sqrt_machine_epsilon(self):
        X, y = cluster_data()
        model = emlm_fit(X, y)
        assert model.alpha == DEFAULT_ALPHA == np.sqrt(np.finfo(np.float64).eps)

    def test_all_rows_become_references(self):
        X, y = cluster_data()
        model = emlm_fit(X, y)
        assert model.n_references == X.shape[0]
        assert (model.references == X).all()

    def test_duplicated_rows_keep_predictions(self):
        X, y = cluster_data(seed=2)
        model = emlm_fit(X, y)
        doubled = emlm_fit(np.vstack([X, X]), y + y)
        probes = np.random.default_rng(3).uniform(-2, 10, size=(20, X.shape[1]))
        _, labels = emlm_predict_batch(model, probes)
        _, labels_doubled = emlm_predict_batch(doubled, probes)
        assert labels == labels_doubled

    def test_requires_two_classes(self):
        with pytest.raises(TrainingError, match="2 classes"):
            emlm_fit(np.zeros((3, 1)) + np.arange(3)[:, None], ["a", "a", "a"])

    def test_class_order_respected(self):
        X, y = cluster_data()
        model = emlm_fit(X, y, class_order=(Label.AD, Label.CONTROL))
        assert model.class_order == (Label.AD, Label.CONTROL)


class TestPredict:
    def test_training_point_recovers_label(self):
        X, y = cluster_data(seed=4)
        model = emlm_fit(X, y)
        scores, label = emlm_predict(model, X[-1])
        assert label is Label.AD
        # brute-force check over the full 6-point set
        _, labels = emlm_predict_batch(model, X)
        assert labels == y

    def test_argmax_rule(self):
        # references at 0, probe at 1: H* = (1,), scores = W column.
        model = EmlmModel(references=np.array([[0.0]]),
                          weights=np.array([[0.9], [0.1]]),
                          class_order=(Label.CONTROL, Label.AD),
                          alpha=DEFAULT_ALPHA)
        scores, label = emlm_predict(model, np.array([1.0]))
        assert scores == pytest.approx([0.9, 0.1])
        assert label is Label.CONTROL

    def test_tie_breaks_to_first_class(self):
        model = EmlmModel(references=np.array([[0.0]]),
                          weights=np.array([[0.5], [0.5]]),
                          class_order=(Label.CONTROL, Label.AD),
                          alpha=DEFAULT_ALPHA)
        _, label = emlm_predict(model, np.array([1.0]))
        assert label is Label.CONTROL

    def test_dimension_mismatch(self):
        X, y = cluster_data()
        model = emlm_fit(X, y)
        with pytest.raises(TrainingError):
            emlm_predict(model, np.zeros(5))


class TestSensitivity:
    def test_coincident_probe_is_guarded(self):
        X, y = cluster_data(seed=5)
        model = emlm_fit(X, y)
        jac = emlm_sensitivity(model, X[0])
        assert np.isfinite(jac).all()
        fi = emlm_importance(model, X)
        assert np.isfinite(fi).all()

    def test_matches_central_finite_differences(self):
        X, y = cluster_data(seed=6, n_per_class=4, n_features=3)
        model = emlm_fit(X, y)
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(50):
            x = rng.uniform(-1.0, 9.0, size=3)
            analytic = emlm_sensitivity(model, x)
            fd = np.empty_like(analytic)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                up, _ = emlm_predict(model, x + e)
                down, _ = emlm_predict(model, x - e)
                fd[:, j] = (up - down) / (2 * h)
            assert np.max(np.abs(analytic - fd)) <= 1e-5 * np.max(np.abs(fd))


class TestImportance:
    def test_constant_feature_contributes_nothing(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((10, 4))
        X[:, 2] = 1.25  # constant across references and samples
        y = [Label.CONTROL, Label.AD] * 5
        model = emlm_fit(X, y)
        fi = emlm_importance(model, X)
        assert fi[2] <= 1e-3

    def test_matches_per_sample_sensitivities(self):
        X, y = cluster_data(seed=9, n_per_class=5, n_features=4)
        model = emlm_fit(X, y)
        probes = np.random.default_rng(10).standard_normal((8, 4))
        batched = emlm_importance(model, probes)
        stacked = np.mean(
            [np.abs(emlm_sensitivity(model, x)).mean(axis=0) for x in probes], axis=0
        )
        assert batched == pytest.approx(stacked, rel=1e-10)

    def test_invariant_under_sample_order(self):
        X, y = cluster_data(seed=11)
        model = emlm_fit(X, y)
        perm = np.random.default_rng(12).permutation(X.shape[0])
        fi = emlm_importance(model, X)
        fi_perm = emlm_importance(model, X[perm])
        assert fi_perm == pytest.approx(fi, rel=1e-12)


class TestInvariants:
    def test_distance_matrix_symmetric_zero_diagonal(self):
        X, _ = cluster_data(seed=13)
        H = distance_matrix(X, X)
        assert (H == H.T).all()
        assert (np.diag(H) == 0.0).all()

    def test_factorization_succeeds_on_finite_inputs(self):
        # Data at the scale the pipeline produces (min-max normalized), with
        # duplicated rows making H H^T singular before the alpha term.
        rng = np.random.default_rng(14)
        for trial in range(10):
            n = int(rng.integers(2, 20))
            X = rng.uniform(0.0, 1.0, size=(n, int(rng.integers(1, 8))))
            if trial % 3 == 0:
                X[-1] = X[0]
            y = ["a", "b"] * (n // 2) + ["a"] * (n % 2)
            emlm_fit(X, y)

    def test_prediction_invariant_under_reference_permutation(self):
        X, y = cluster_data(seed=15)
        model = emlm_fit(X, y)
        perm = np.random.default_rng(16).permutation(model.n_references)
        permuted = EmlmModel(references=model.references[perm],
                             weights=model.weights[:, perm],
                             class_order=model.class_order,
                             alpha=model.alpha)
        probes = np.random.default_rng(17).uniform(-2, 10, size=(15, X.shape[1]))
        s1, l1 = emlm_predict_batch(model, probes)
        s2, l2 = emlm_predict_batch(permuted, probes)
        assert s1 == pytest.approx(s2, rel=1e-12)
        assert l1 == l2


class TestSerialization:
    def test_round_trip(self):
        X, y = cluster_data(seed=18)
        model = emlm_fit(X, y)
        payload = emlm_to_dict(model)
        assert set(payload) == {"alpha", "class_order", "references", "W"}
        back = emlm_from_dict(payload, class_type=Label)
        assert (back.references == model.references).all()
        assert (back.weights == model.weights).all()
        assert back.class_order == model.class_order
        assert back.alpha == model.alpha
