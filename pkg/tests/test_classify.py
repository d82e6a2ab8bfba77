"""Nearest-neighbor prediction against the brute-force distance oracle."""

import numpy as np
import pytest

from qcoral.classify import knn_predict
from qcoral.errors import DataError, DimensionError
from qcoral.linalg import DataMatrix


def brute_force_predictions(train, test):
    out = []
    for i in range(test.values.shape[1]):
        distances = [
            float(np.sum((train.values[:, j] - test.values[:, i]) ** 2))
            for j in range(train.values.shape[1])
        ]
        out.append(int(train.labels[int(np.argmin(distances))]))
    return np.array(out)


class TestKnnPredict:
    def test_single_training_point(self):
        train = DataMatrix(values=np.array([[1.0], [0.0]]), labels=np.array([1]))
        test = DataMatrix(
            values=np.random.default_rng(0).normal(size=(2, 8)),
            labels=np.array([1, 1, 0, 0, 1, 0, 0, 0]),
        )
        report = knn_predict(train, test)
        assert np.all(report.predicted == 1)
        assert report.accuracy == pytest.approx(3 / 8)

    def test_self_classification(self):
        rng = np.random.default_rng(1)
        X = DataMatrix(values=rng.normal(size=(3, 12)), labels=rng.integers(0, 3, 12))
        report = knn_predict(X, X)
        assert report.accuracy == 1.0

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        centers = np.array([[2.0, -2.0], [0.0, 0.0]])
        train_values = np.hstack(
            [centers[:, [c]] + rng.normal(size=(2, 20)) for c in range(2)]
        )
        train = DataMatrix(values=train_values, labels=np.repeat([0, 1], 20))
        test_values = np.hstack(
            [centers[:, [c]] + rng.normal(size=(2, 10)) for c in range(2)]
        )
        test = DataMatrix(values=test_values, labels=np.repeat([0, 1], 10))
        report = knn_predict(train, test)
        assert np.array_equal(report.predicted, brute_force_predictions(train, test))

    def test_tie_breaks_to_lowest_index(self):
        point = np.array([[1.0], [1.0]])
        train = DataMatrix(values=np.hstack([point, point]), labels=np.array([2, 0]))
        test = DataMatrix(values=point, labels=np.array([0]))
        assert knn_predict(train, test).predicted[0] == 2

    def test_confusion_row_sums(self):
        rng = np.random.default_rng(3)
        train = DataMatrix(values=rng.normal(size=(2, 30)), labels=rng.integers(0, 3, 30))
        test = DataMatrix(values=rng.normal(size=(2, 20)), labels=rng.integers(0, 3, 20))
        report = knn_predict(train, test)
        assert np.array_equal(report.confusion.sum(axis=1), np.bincount(test.labels, minlength=3))
        assert report.accuracy == pytest.approx(np.trace(report.confusion) / 20)

    def test_scale_invariance(self):
        rng = np.random.default_rng(4)
        train = DataMatrix(values=rng.normal(size=(3, 15)), labels=rng.integers(0, 2, 15))
        test = DataMatrix(values=rng.normal(size=(3, 9)), labels=rng.integers(0, 2, 9))
        base = knn_predict(train, test).predicted
        scaled = knn_predict(
            DataMatrix(values=train.values * 7.5, labels=train.labels),
            DataMatrix(values=test.values * 7.5, labels=test.labels),
        ).predicted
        assert np.array_equal(base, scaled)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        train = DataMatrix(values=rng.normal(size=(3, 15)), labels=rng.integers(0, 2, 15))
        test = DataMatrix(values=rng.normal(size=(3, 9)), labels=rng.integers(0, 2, 9))
        base = knn_predict(train, test).predicted
        perm = rng.permutation(9)
        permuted = knn_predict(
            train, DataMatrix(values=test.values[:, perm], labels=test.labels[perm])
        ).predicted
        assert np.array_equal(base[perm], permuted)

    def test_requires_labels(self):
        X = DataMatrix(values=np.eye(2))
        labelled = DataMatrix(values=np.eye(2), labels=np.array([0, 1]))
        with pytest.raises(DataError):
            knn_predict(X, labelled)
        with pytest.raises(DataError):
            knn_predict(labelled, X)

    def test_dimension_mismatch(self):
        a = DataMatrix(values=np.eye(2), labels=np.array([0, 1]))
        b = DataMatrix(values=np.eye(3), labels=np.array([0, 1, 2]))
        with pytest.raises(DimensionError):
            knn_predict(a, b)
