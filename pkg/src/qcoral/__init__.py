"""Correlation alignment for unsupervised domain adaptation, with classical,
gate-level simulated, and variational hybrid implementations."""

__version__ = "0.1.0"

from .classify import PredictionReport, knn_predict
from .coral import CoralTransform, apply_coral, fit_coral, preprocess
from .datasets import (
    DatasetSpec,
    generate_synthetic,
    load_csv,
    load_digits,
    load_iris,
    pad_to_qubits,
    save_csv,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DimensionError,
    PostselectionError,
    QCoralError,
    ValidationError,
)
from .estimators import (
    CoralAligner,
    NearestNeighborClassifier,
    QblasCoralAligner,
    VariationalEndToEndAligner,
    VariationalMatrixAligner,
)
from .linalg import (
    DataMatrix,
    SpectralDecomposition,
    covariance,
    frobenius_distance,
    matrix_half_power,
    symmetric_eig,
)
from .qblas import (
    HermitianEmbedding,
    PhaseEstimationConfig,
    PostselectionResult,
    QblasStage,
    default_phase_config,
    hermitian_embed,
    qblas_align,
    qblas_coral,
    qblas_decorrelate,
    qpe_singular_values,
)
from .qsim import (
    AnsatzCircuit,
    DensityMatrix,
    QuantumState,
    amplitude_encode,
    ansatz_state,
    ansatz_unitary,
    apply_ansatz,
    batched_ansatz_states,
    conjugate_density,
    dataset_register_split,
    encode_dataset,
    expectation,
    overlap,
    partial_trace,
)
from .variational import (
    DeflationConfig,
    OptimizerConfig,
    TrainingTrace,
    VmmResult,
    adagrad_step,
    apply_trained_transform,
    deflation_eigensolve,
    end_to_end_cost,
    gradient,
    spectral_lower_bound,
    square_root_from_eigenpairs,
    train_end_to_end,
    train_vmm,
    vmm_cost_align,
    vmm_cost_decorrelate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
