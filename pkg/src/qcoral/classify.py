"""Brute-force 1-nearest-neighbor classification with accuracy reporting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError
from .linalg import DataMatrix


@dataclass(frozen=True)
class PredictionReport:
    """Predictions with the accuracy and confusion matrix against truth.

    Confusion rows are true classes, columns predicted classes, so row sums
    equal the per-class truth counts and accuracy = trace / n.
    """

    predicted: np.ndarray
    accuracy: float
    confusion: np.ndarray


def knn_predict(train: DataMatrix, test: DataMatrix) -> PredictionReport:
    """Assign each test column the label of its Euclidean-nearest training
    column; ties break toward the lowest training index.

    The test set must carry ground-truth labels for the report.
    """
    if train.labels is None:
        raise DataError("training data has no labels")
    if test.labels is None:
        raise DataError("test data has no labels to score against")
    if train.sample_count == 0:
        raise DataError("training set is empty")
    if train.dimension != test.dimension:
        raise DimensionError(
            f"feature dimensions differ: {train.dimension} vs {test.dimension}"
        )
    A = train.values
    B = test.values
    # ||a - b||^2 expanded; argmin scans training indices in order, so exact
    # distance ties resolve to the lowest index.
    sq = (
        np.sum(A**2, axis=0)[:, None]
        - 2.0 * A.T @ B
        + np.sum(B**2, axis=0)[None, :]
    )
    predicted = train.labels[np.argmin(sq, axis=0)]
    truth = test.labels
    class_count = int(max(predicted.max(initial=0), truth.max(initial=0))) + 1
    confusion = np.zeros((class_count, class_count), dtype=int)
    np.add.at(confusion, (truth, predicted), 1)
    accuracy = float(np.trace(confusion)) / test.sample_count
    return PredictionReport(predicted=predicted, accuracy=accuracy, confusion=confusion)
