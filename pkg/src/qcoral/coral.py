"""Classical correlation alignment: whiten with the source covariance,
recolor with the target covariance.

The closed-form optimal transform factors into a symmetric whitener
C_s^(-1/2) and a symmetric recolorer C_t^(1/2); applying the transform to
column data means multiplying by recolorer @ whitener.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DataError, DimensionError
from .linalg import (
    DataMatrix,
    covariance,
    matrix_half_power,
    symmetric_eig,
)

_JOINT_TOL = 1e-13
# Alternating centering/normalization contracts linearly; small sample
# counts can need several hundred sweeps, each O(D n).
_MAX_PREPROCESS_SWEEPS = 20000


@dataclass(frozen=True)
class CoralTransform:
    """Fitted alignment transform.

    combined is the D x D matrix applied to column data,
    combined = recolorer @ whitener; its transpose is the closed-form
    optimizer of the alignment objective.
    """

    whitener: np.ndarray
    recolorer: np.ndarray
    combined: np.ndarray
    rank_used: int

    def __post_init__(self):
        for name in ("whitener", "recolorer"):
            M = getattr(self, name)
            if np.max(np.abs(M - M.T)) > 1e-10:
                raise DimensionError(f"{name} must be symmetric")
        if np.max(np.abs(self.combined - self.recolorer @ self.whitener)) > 1e-10:
            raise DimensionError("combined is inconsistent with its factors")

    @property
    def dimension(self) -> int:
        return self.combined.shape[0]


def preprocess(X: DataMatrix) -> DataMatrix:
    """Zero-center features and scale every column to unit Euclidean norm.

    Centering and per-column scaling fight each other, so the two steps are
    swept alternately until both hold at 1e-13; a single pass leaves a
    residual mean of order 1/n. Zero columns stay zero with norm 0 recorded.
    The recorded norms come from the first pass over the centered data.
    """
    if X.sample_count < 2:
        raise DataError("preprocessing requires at least 2 samples")
    values = X.values - X.values.mean(axis=1, keepdims=True)
    recorded_norms = np.linalg.norm(values, axis=0)
    for _ in range(_MAX_PREPROCESS_SWEEPS):
        norms = np.linalg.norm(values, axis=0)
        scale = np.where(norms > 0, norms, 1.0)
        values = values / scale
        mean = values.mean(axis=1, keepdims=True)
        if np.max(np.abs(mean)) <= _JOINT_TOL:
            break
        values = values - mean
    else:
        raise ConvergenceError("centering/normalization did not reach joint tolerance")
    return DataMatrix(
        values=values,
        labels=X.labels,
        column_norms=recorded_norms,
        original_dimension=X.original_dimension,
    )


def fit_coral(Xs: DataMatrix, Xt: DataMatrix) -> CoralTransform:
    """Fit the whitening/recoloring transform from source to target columns.

    The recolorer is truncated to rank r = min(rank C_s, rank C_t), keeping
    the r largest target eigenvalues.
    """
    if Xs.dimension != Xt.dimension:
        raise DimensionError(
            f"feature dimensions differ: {Xs.dimension} vs {Xt.dimension}"
        )
    S_s = symmetric_eig(covariance(Xs))
    S_t = symmetric_eig(covariance(Xt))
    r = min(S_s.rank, S_t.rank)
    whitener = matrix_half_power(S_s, -1)
    recolorer = matrix_half_power(S_t, +1, rank=r)
    return CoralTransform(
        whitener=whitener,
        recolorer=recolorer,
        combined=recolorer @ whitener,
        rank_used=r,
    )


def apply_coral(T: CoralTransform, Xs: DataMatrix) -> DataMatrix:
    """Apply a fitted transform to column data; labels carry over unchanged."""
    if T.dimension != Xs.dimension:
        raise DimensionError(
            f"transform dimension {T.dimension} does not match data {Xs.dimension}"
        )
    return DataMatrix(
        values=T.combined @ Xs.values,
        labels=Xs.labels,
        column_norms=Xs.column_norms,
        original_dimension=Xs.original_dimension,
    )
