"""Dense real linear algebra used by every other module.

Data matrices hold samples as columns (shape D x n). Covariances are the
uncentered second moment X @ X.T; spectral decompositions carry an explicit
numerical rank so pseudo-inverse square roots follow the Moore-Penrose
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError

# Eigenvalues below RANK_TOLERANCE * lambda_max do not count toward the rank.
RANK_TOLERANCE = 1e-10

_SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """A D x n dataset, samples as columns, with optional labels.

    column_norms stores pre-normalization Euclidean norms so the original
    column scales survive unit normalization. original_dimension records the
    feature count before zero-row padding.
    """

    values: np.ndarray
    labels: np.ndarray | None = None
    column_norms: np.ndarray | None = None
    original_dimension: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError(f"data matrix must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", values)
        n = values.shape[1]
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=int)
            if labels.shape != (n,):
                raise DimensionError(
                    f"labels length {labels.shape} does not match sample count {n}"
                )
            object.__setattr__(self, "labels", labels)
        if self.column_norms is not None:
            norms = np.asarray(self.column_norms, dtype=float)
            if norms.shape != (n,):
                raise DimensionError(
                    f"column_norms length {norms.shape} does not match sample count {n}"
                )
            if not np.all(np.isfinite(norms)) or np.any(norms < 0):
                raise ValidationError("column_norms must be finite and nonnegative")
            object.__setattr__(self, "column_norms", norms)

    @property
    def dimension(self) -> int:
        return self.values.shape[0]

    @property
    def sample_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rank: int = field(default=-1)

    def __post_init__(self):
        values = np.asarray(self.eigenvalues, dtype=float)
        vectors = np.asarray(self.eigenvectors, dtype=float)
        if vectors.ndim != 2 or values.ndim != 1 or vectors.shape[1] != values.shape[0]:
            raise DimensionError(
                f"inconsistent spectral shapes {values.shape}, {vectors.shape}"
            )
        if np.any(np.diff(values) > 1e-12):
            raise ValidationError("eigenvalues must be sorted in descending order")
        gram = vectors.T @ vectors
        if np.max(np.abs(gram - np.eye(vectors.shape[1]))) > _SYMMETRY_TOL:
            raise ValidationError("eigenvector columns are not orthonormal")
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)
        if self.rank < 0:
            object.__setattr__(self, "rank", _rank_of(values, RANK_TOLERANCE))
        elif self.rank > values.shape[0]:
            raise ValidationError("rank exceeds decomposition size")

    @property
    def dimension(self) -> int:
        return self.eigenvectors.shape[0]


def _rank_of(eigenvalues: np.ndarray, rank_tol: float) -> int:
    if eigenvalues.size == 0:
        return 0
    lam_max = float(np.max(eigenvalues))
    return int(np.sum(eigenvalues > rank_tol * lam_max))


def covariance(X: DataMatrix) -> np.ndarray:
    """Uncentered covariance X @ X.T of a D x n data matrix."""
    values = X.values
    if values.size == 0:
        raise DimensionError("cannot take the covariance of an empty matrix")
    C = values @ values.T
    return (C + C.T) / 2.0


def symmetric_eig(C: np.ndarray, rank_tol: float = RANK_TOLERANCE) -> SpectralDecomposition:
    """Full eigendecomposition of a symmetric matrix with a numerical rank.

    Eigenvalues are returned in descending order. Each eigenvector's sign is
    fixed so its first component of magnitude above 1e-12 is positive, making
    the decomposition reproducible under degenerate spectra.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {C.shape}")
    if rank_tol < 0:
        raise ValidationError("rank tolerance must be nonnegative")
    scale = max(1.0, float(np.max(np.abs(C)))) if C.size else 1.0
    if np.max(np.abs(C - C.T)) > _SYMMETRY_TOL * scale:
        raise ValidationError("matrix is not symmetric within tolerance")
    eigenvalues, eigenvectors = np.linalg.eigh((C + C.T) / 2.0)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    for j in range(eigenvectors.shape[1]):
        col = eigenvectors[:, j]
        nonzero = np.nonzero(np.abs(col) > 1e-12)[0]
        if nonzero.size and col[nonzero[0]] < 0:
            eigenvectors[:, j] = -col
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        rank=_rank_of(eigenvalues, rank_tol),
    )


def matrix_half_power(
    S: SpectralDecomposition, sign: int, rank: int | None = None
) -> np.ndarray:
    """V diag(lambda^(sign/2)) V.T with Moore-Penrose handling of small eigenvalues.

    Eigenvalues beyond the retained rank contribute zero for either sign;
    for sign -1 this is the pseudo-inverse square root. Tiny negative
    eigenvalues from floating point are clamped to zero first.
    """
    if sign not in (+1, -1):
        raise ValidationError(f"sign must be +1 or -1, got {sign}")
    kept = S.rank if rank is None else min(rank, S.rank)
    lam = np.clip(S.eigenvalues, 0.0, None)
    powered = np.zeros_like(lam)
    if sign == +1:
        powered[:kept] = np.sqrt(lam[:kept])
    else:
        powered[:kept] = 1.0 / np.sqrt(lam[:kept])
    V = S.eigenvectors
    result = (V * powered) @ V.T
    return (result + result.T) / 2.0


def frobenius_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius norm of A - B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B))


def next_power_of_two(k: int) -> int:
    if k < 1:
        raise DimensionError("size must be positive")
    return 1 << (int(k) - 1).bit_length()
