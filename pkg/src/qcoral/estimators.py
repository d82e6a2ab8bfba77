"""Scikit-learn style estimators wrapping the alignment pipelines.

Estimators follow the sklearn convention of samples as rows; internally the
package works with samples as columns. Aligners fit on (source, target)
pairs and transform source-domain arrays; the classifier is a plain
fit/predict wrapper around the brute-force nearest neighbor.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_array

from .classify import knn_predict
from .coral import apply_coral, fit_coral, preprocess
from .datasets import pad_to_qubits
from .linalg import DataMatrix, covariance
from .qblas import qblas_align, qblas_decorrelate
from .qsim import AnsatzCircuit, DensityMatrix
from .variational import (
    DeflationConfig,
    OptimizerConfig,
    apply_trained_transform,
    deflation_eigensolve,
    square_root_from_eigenpairs,
    train_end_to_end,
    train_vmm,
)


def _as_columns(X, pad: bool = False) -> DataMatrix:
    X = check_array(X, dtype=float)
    data = preprocess(DataMatrix(values=np.asarray(X).T))
    return pad_to_qubits(data) if pad else data


def _normalized_density(X: DataMatrix) -> DensityMatrix:
    C = covariance(X)
    return DensityMatrix(C / np.trace(C))


class CoralAligner(BaseEstimator, TransformerMixin):
    """Classical correlation alignment as a transformer.

    fit(X, X_target) learns the whitening/recoloring pair from the two
    domains; transform(X) maps source-domain rows into the target domain.
    Inputs are preprocessed (centered, unit sample norm) on the way in.
    """

    def fit(self, X, X_target):
        source = _as_columns(X)
        target = _as_columns(X_target)
        transform = fit_coral(source, target)
        self.whitener_ = transform.whitener
        self.recolorer_ = transform.recolorer
        self.combined_ = transform.combined
        self.rank_used_ = transform.rank_used
        self._transform = transform
        return self

    def transform(self, X):
        data = _as_columns(X)
        return apply_coral(self._transform, data).values.T

    def fit_transform(self, X, X_target=None, **fit_params):
        if X_target is None:
            raise TypeError("fit_transform requires X_target")
        return self.fit(X, X_target).transform(X)


class QblasCoralAligner(BaseEstimator, TransformerMixin):
    """Gate-level simulated alignment via phase estimation and postselection.

    Desk-scale only: the padded dimension plus sample count must fit the
    statevector simulator. transform records the two postselection results
    on decorrelation_ and alignment_.
    """

    def __init__(self, phase_bits: int = 10):
        self.phase_bits = phase_bits

    def fit(self, X, X_target):
        self.target_ = _as_columns(X_target, pad=True)
        return self

    def transform(self, X):
        source = _as_columns(X, pad=True)
        dec_result, dec_readback = qblas_decorrelate(source, phase_bits=self.phase_bits)
        align_result, aligned = qblas_align(
            (dec_result, dec_readback), self.target_, phase_bits=self.phase_bits
        )
        self.decorrelation_ = dec_result
        self.alignment_ = align_result
        return aligned.values.T

    def fit_transform(self, X, X_target=None, **fit_params):
        if X_target is None:
            raise TypeError("fit_transform requires X_target")
        return self.fit(X, X_target).transform(X)


class VariationalEndToEndAligner(BaseEstimator, TransformerMixin):
    """A trained layered circuit standing in for the alignment transform.

    fit minimizes the Frobenius mismatch between the conjugated source
    covariance and the target covariance; transform sends samples through
    the trained circuit.
    """

    def __init__(
        self,
        layers: int = 8,
        learning_rate: float = 0.1,
        max_iterations: int = 2000,
        restarts: int = 3,
        seed: int = 0,
    ):
        self.layers = layers
        self.learning_rate = learning_rate
        self.max_iterations = max_iterations
        self.restarts = restarts
        self.seed = seed

    def fit(self, X, X_target):
        source = _as_columns(X, pad=True)
        target = _as_columns(X_target, pad=True)
        qubits = source.dimension.bit_length() - 1
        self.circuit_ = AnsatzCircuit(qubit_count=qubits, layer_count=self.layers)
        opt = OptimizerConfig(
            learning_rate=self.learning_rate,
            max_iterations=self.max_iterations,
            seed=self.seed,
        )
        self.trace_ = train_end_to_end(
            self.circuit_,
            _normalized_density(source),
            _normalized_density(target),
            opt,
            restarts=self.restarts,
        )
        self.parameters_ = self.trace_.final_parameters
        return self

    def transform(self, X):
        data = _as_columns(X, pad=True)
        return apply_trained_transform(self.circuit_, self.parameters_, data).values.T

    def fit_transform(self, X, X_target=None, **fit_params):
        if X_target is None:
            raise TypeError("fit_transform requires X_target")
        return self.fit(X, X_target).transform(X)


class VariationalMatrixAligner(BaseEstimator, TransformerMixin):
    """Matrix-multiplication flavored variational alignment.

    fit recovers both covariance square roots with the deflation
    eigensolver; transform trains per-sample ansatz states through the
    decorrelate/align costs. Training happens in transform because the
    transport is per sample.
    """

    def __init__(
        self,
        layers: int = 8,
        learning_rate: float = 0.1,
        max_iterations: int = 500,
        restarts: int = 3,
        per_sample: bool = True,
        seed: int = 0,
    ):
        self.layers = layers
        self.learning_rate = learning_rate
        self.max_iterations = max_iterations
        self.restarts = restarts
        self.per_sample = per_sample
        self.seed = seed

    def fit(self, X, X_target):
        source = _as_columns(X, pad=True)
        target = _as_columns(X_target, pad=True)
        qubits = source.dimension.bit_length() - 1
        self.circuit_ = AnsatzCircuit(qubit_count=qubits, layer_count=self.layers)
        opt = OptimizerConfig(
            learning_rate=self.learning_rate,
            max_iterations=self.max_iterations,
            seed=self.seed,
        )
        rho_s = _normalized_density(source)
        rho_t = _normalized_density(target)
        dim = rho_s.dimension
        S_s = deflation_eigensolve(
            rho_s,
            self.circuit_,
            DeflationConfig.for_hamiltonian(rho_s.entries, dim, self.restarts),
            mode="all_eigen",
            opt=opt,
        )
        r = min(S_s.rank, np.linalg.matrix_rank(rho_t.entries))
        S_t = deflation_eigensolve(
            rho_t,
            self.circuit_,
            DeflationConfig.for_hamiltonian(rho_t.entries, int(r), self.restarts),
            mode="top_r_via_eta",
            opt=opt,
        )
        self.source_root_ = square_root_from_eigenpairs(S_s, +1)
        self.target_root_ = square_root_from_eigenpairs(S_t, +1)
        self._opt = opt
        return self

    def transform(self, X):
        data = _as_columns(X, pad=True)
        result = train_vmm(
            data,
            self.source_root_,
            self.target_root_,
            self.circuit_,
            self._opt,
            per_sample=self.per_sample,
            restarts=self.restarts,
        )
        self.lm1_ = result.lm1
        self.lm2_ = result.lm2
        return result.aligned.values.T

    def fit_transform(self, X, X_target=None, **fit_params):
        if X_target is None:
            raise TypeError("fit_transform requires X_target")
        return self.fit(X, X_target).transform(X)


class NearestNeighborClassifier(BaseEstimator):
    """Brute-force 1-NN with ties broken toward the lowest training index."""

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y disagree on the sample count")
        self.train_ = DataMatrix(values=X.T, labels=y)
        return self

    def predict(self, X):
        X = check_array(X, dtype=float)
        test = DataMatrix(
            values=X.T, labels=np.zeros(X.shape[0], dtype=int)
        )  # dummy labels; only predictions are used
        return knn_predict(self.train_, test).predicted

    def score(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=int)
        report = knn_predict(self.train_, DataMatrix(values=X.T, labels=y))
        return report.accuracy
