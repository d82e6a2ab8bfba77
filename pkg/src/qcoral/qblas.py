"""Gate-level simulation of the phase-estimation alignment pipeline.

A data matrix is embedded into a Hermitian block anti-diagonal matrix whose
eigenvalues are the signed singular values. Phase estimation writes those
values into a phase register, an ancilla rotation weights each branch by
gamma/sigma (decorrelation) or gamma*sigma (recoloring), and uncomputation
plus postselection of the ancilla leaves the matrix-function applied state.

The simulation is exact: the conditional evolution uses the exact matrix
exponential on the embedding eigenbasis and the phase register transform is
a discrete Fourier transform, so finite phase-register leakage is faithfully
reproduced. State layout is [index register][phase register][system
register][ancilla], index-major.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    PostselectionError,
    ValidationError,
)
from .linalg import RANK_TOLERANCE, DataMatrix, next_power_of_two
from .qsim import QuantumState

_WRAP_MARGIN = 0.8  # evolution time targets max |eigenphase| = 0.8 * pi
_GAMMA_MARGIN = 0.9


@dataclass(frozen=True)
class HermitianEmbedding:
    """Block anti-diagonal embedding [[0, X], [X^T, 0]] of a padded matrix."""

    matrix: np.ndarray
    evolution_time: float
    source_shape: tuple[int, int]

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        dim = M.shape[0]
        if M.ndim != 2 or M.shape[1] != dim:
            raise DimensionError("embedding must be square")
        half = dim // 2
        if dim != 2 * half or (dim & (dim - 1)) != 0:
            raise ValidationError("embedding dimension must be a power of two")
        if np.max(np.abs(M[:half, :half])) != 0 or np.max(np.abs(M[half:, half:])) != 0:
            raise ValidationError("diagonal blocks of the embedding must be zero")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise ValidationError("embedding must be symmetric")
        if self.evolution_time <= 0:
            raise ConfigurationError("evolution time must be positive")
        object.__setattr__(self, "matrix", M)

    @property
    def half_dimension(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def system_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1


@dataclass(frozen=True)
class PhaseEstimationConfig:
    """Phase register width plus the evolution time and rotation constant."""

    phase_bits: int
    evolution_time: float
    gamma: float

    def __post_init__(self):
        if (1 << self.phase_bits) < 16:
            raise ConfigurationError("phase register must have at least 16 values")
        if self.evolution_time <= 0:
            raise ConfigurationError("evolution time must be positive")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")

    @property
    def register_size(self) -> int:
        return 1 << self.phase_bits


@dataclass(frozen=True)
class PostselectionResult:
    """Renormalized state after projecting the ancilla onto |1>."""

    state: QuantumState
    success_probability: float
    attempts_expected: float


def hermitian_embed(X: DataMatrix, pad_to: int | None = None) -> HermitianEmbedding:
    """Embed a D x n matrix into the 2P x 2P block anti-diagonal form.

    Rows and columns are both zero-padded to P = pad_to (default: the next
    power of two covering max(D, n)), so the embedding dimension is a power
    of two and its eigenvalues are +-sigma pairs plus padding zeros.
    """
    values = X.values
    D, n = values.shape
    P = next_power_of_two(max(D, n)) if pad_to is None else int(pad_to)
    if P < max(D, n) or (P & (P - 1)) != 0:
        raise ConfigurationError(f"pad_to={pad_to} is not a power of two >= {max(D, n)}")
    padded = np.zeros((P, P))
    padded[:D, :n] = values
    M = np.zeros((2 * P, 2 * P))
    M[:P, P:] = padded
    M[P:, :P] = padded.T
    sigma_max = float(np.linalg.norm(values, 2)) if values.size else 0.0
    t = _WRAP_MARGIN * np.pi / sigma_max if sigma_max > 0 else 1.0
    return HermitianEmbedding(matrix=M, evolution_time=t, source_shape=(D, n))


def default_phase_config(
    emb: HermitianEmbedding, mode: str, phase_bits: int = 10
) -> PhaseEstimationConfig:
    """Derive gamma from the embedding spectrum with a safety margin.

    inverse: gamma = 0.9 * the smallest retained singular-value bin, so the
    arcsin argument stays valid for every retained branch. forward:
    gamma = 0.9 / the largest bin.
    """
    t = emb.evolution_time
    T = 1 << phase_bits
    sigmas = _retained_singular_values(emb)
    if sigmas.size == 0:
        raise ValidationError("embedding has no retained singular values")
    binned = np.array([_bin_value(s, t, T) for s in sigmas])
    binned = binned[binned > 0]
    if binned.size == 0:
        raise ConfigurationError(
            "phase register cannot resolve any retained singular value; "
            "increase phase_bits"
        )
    if mode == "inverse":
        gamma = _GAMMA_MARGIN * float(np.min(binned))
    elif mode == "forward":
        gamma = _GAMMA_MARGIN / float(np.max(binned))
    else:
        raise ConfigurationError(f"unknown rotation mode {mode!r}")
    return PhaseEstimationConfig(phase_bits=phase_bits, evolution_time=t, gamma=gamma)


def _retained_singular_values(emb: HermitianEmbedding) -> np.ndarray:
    eigenvalues = np.linalg.eigvalsh(emb.matrix)
    sigmas = np.unique(np.abs(eigenvalues))
    if sigmas.size == 0:
        return sigmas
    cutoff = np.sqrt(RANK_TOLERANCE) * float(np.max(sigmas))
    return sigmas[sigmas > cutoff]


def _bin_value(sigma: float, t: float, T: int) -> float:
    """Singular-value estimate of the phase-register bin nearest to sigma."""
    k = int(round(sigma * t * T / (2.0 * np.pi)))
    return 2.0 * np.pi * k / (t * T)


class QblasStage:
    """One phase-estimation stage bound to an embedding and a config.

    The stage owns the register bookkeeping the individual operations need,
    so states can stay plain amplitude vectors between steps.
    """

    def __init__(
        self, emb: HermitianEmbedding, cfg: PhaseEstimationConfig, index_qubits: int = 0
    ):
        if index_qubits < 0:
            raise ConfigurationError("index_qubits must be nonnegative")
        eigenvalues, W = np.linalg.eigh(emb.matrix)
        lam_max = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
        if cfg.evolution_time * lam_max >= np.pi:
            raise ConfigurationError(
                f"evolution time {cfg.evolution_time} wraps the largest eigenphase"
            )
        self.embedding = emb
        self.cfg = cfg
        self.index_qubits = index_qubits
        self._eigenvalues = eigenvalues
        self._W = W
        self._phases = eigenvalues * cfg.evolution_time

    # -- register helpers --------------------------------------------------

    @property
    def system_dim(self) -> int:
        return self.embedding.matrix.shape[0]

    @property
    def index_dim(self) -> int:
        return 1 << self.index_qubits

    @property
    def register_size(self) -> int:
        return self.cfg.register_size

    def bin_singular_values(self) -> np.ndarray:
        """sigma-hat estimate per phase-register value (absolute, wrapped)."""
        T = self.register_size
        k = np.arange(T)
        signed = np.where(k < T // 2, k, k - T)
        return np.abs(2.0 * np.pi * signed / (self.cfg.evolution_time * T))

    # -- pipeline steps ------------------------------------------------------

    def qpe_singular_values(self, state: QuantumState) -> QuantumState:
        """Insert the phase register before the system register and run QPE."""
        expected = self.index_dim * self.system_dim
        if state.dimension != expected:
            raise DimensionError(
                f"state dimension {state.dimension} does not match "
                f"index*system = {expected}"
            )
        S = state.amplitudes.reshape(self.index_dim, self.system_dim)
        T = self.register_size
        coeff = self._W.T.astype(complex) @ S.T  # (modes, index)
        tau = np.arange(T)
        alpha = np.fft.fft(np.exp(1j * np.outer(tau, self._phases)), axis=0) / T
        out = np.einsum("mi,km,vm->ikv", coeff, alpha, self._W.astype(complex))
        return QuantumState(out.reshape(-1))

    def conditional_rotation(self, state: QuantumState, mode: str) -> QuantumState:
        """Append an ancilla rotated per phase-register bin.

        inverse: |1> amplitude gamma/sigma-hat on bins at or above gamma,
        other bins are exempt (ancilla stays |0>, Moore-Penrose behavior).
        forward: |1> amplitude gamma*sigma-hat, clamped to 1 on leakage bins
        past the valid range. Bins holding actual retained singular values
        must rotate validly or the configuration is rejected.
        """
        amps = self._reshape_pipeline(state)
        amp1 = self._ancilla_amplitudes(mode)
        amp0 = np.sqrt(np.clip(1.0 - amp1**2, 0.0, None))
        out = np.empty(amps.shape + (2,), dtype=complex)
        out[..., 0] = amps * amp0[None, :, None]
        out[..., 1] = amps * amp1[None, :, None]
        return QuantumState(out.reshape(-1))

    def _ancilla_amplitudes(self, mode: str) -> np.ndarray:
        sigma_hat = self.bin_singular_values()
        gamma = self.cfg.gamma
        T = self.register_size
        retained = _retained_singular_values(self.embedding)
        data_bins = {
            int(round(s * self.cfg.evolution_time * T / (2.0 * np.pi))) for s in retained
        }
        data_bins.discard(0)
        if mode == "inverse":
            for k in sorted(data_bins):
                if gamma > sigma_hat[k] * (1 + 1e-12):
                    raise ConfigurationError(
                        f"inverse rotation argument exceeds 1 on bin {k} "
                        f"(sigma-hat {sigma_hat[k]:.6g} < gamma {gamma:.6g})"
                    )
            amp1 = np.zeros(T)
            usable = sigma_hat >= gamma * (1 - 1e-12)
            amp1[usable] = np.minimum(gamma / sigma_hat[usable], 1.0)
            return amp1
        if mode == "forward":
            for k in sorted(data_bins):
                if gamma * sigma_hat[k] > 1 + 1e-12:
                    raise ConfigurationError(
                        f"forward rotation argument exceeds 1 on bin {k} "
                        f"(gamma*sigma-hat = {gamma * sigma_hat[k]:.6g})"
                    )
            return np.minimum(gamma * sigma_hat, 1.0)
        raise ConfigurationError(f"unknown rotation mode {mode!r}")

    def uncompute_and_postselect(self, state: QuantumState) -> PostselectionResult:
        """Project the ancilla onto |1>, invert the QPE, and keep the
        phase-register |0...0> branch; the lost mass is the leakage."""
        amps = self._reshape_pipeline(state, with_ancilla=True)
        selected = amps[..., 1]  # (index, T, system)
        T = self.register_size
        # QFT on the phase register.
        F1 = np.fft.ifft(selected, axis=1) * np.sqrt(T)
        # Inverse conditional evolution, diagonal in the eigenbasis.
        coeff = np.einsum("itv,vm->itm", F1, self._W.astype(complex))
        tau = np.arange(T)
        coeff = coeff * np.exp(-1j * np.outer(tau, self._phases))[None, :, :]
        F2 = np.einsum("itm,vm->itv", coeff, self._W.astype(complex))
        # Hadamard wall, then the phase-register |0...0> component.
        projected = F2.sum(axis=1) / np.sqrt(T)
        probability = float(np.sum(np.abs(projected) ** 2))
        if probability < 1e-12:
            raise PostselectionError(
                f"postselection probability {probability} is numerically zero"
            )
        normalized = projected.reshape(-1) / np.sqrt(probability)
        return PostselectionResult(
            state=QuantumState(normalized),
            success_probability=probability,
            attempts_expected=1.0 / probability,
        )

    def _reshape_pipeline(self, state: QuantumState, with_ancilla: bool = False):
        expected = self.index_dim * self.register_size * self.system_dim
        if with_ancilla:
            expected *= 2
        if state.dimension != expected:
            raise DimensionError(
                f"state dimension {state.dimension} does not match the "
                f"pipeline layout ({expected})"
            )
        shape = (self.index_dim, self.register_size, self.system_dim)
        if with_ancilla:
            shape = shape + (2,)
        return state.amplitudes.reshape(shape)


def qpe_singular_values(
    emb: HermitianEmbedding, state: QuantumState, cfg: PhaseEstimationConfig
) -> QuantumState:
    """Standalone QPE on a system-register state (no index register)."""
    return QblasStage(emb, cfg, index_qubits=0).qpe_singular_values(state)


@dataclass(frozen=True)
class QblasRun:
    """Composed decorrelate-then-align output."""

    aligned: DataMatrix
    decorrelation: PostselectionResult
    alignment: PostselectionResult


def _dataset_input_state(columns: np.ndarray, emb: HermitianEmbedding) -> QuantumState:
    """Columns (D x n) embedded into the top block of the system register."""
    D, n = columns.shape
    n_pad = next_power_of_two(n)
    S = np.zeros((n_pad, emb.matrix.shape[0]), dtype=complex)
    S[:n, :D] = columns.T
    total = np.linalg.norm(S)
    if total < 1e-15:
        raise ValidationError("cannot encode an all-zero dataset")
    return QuantumState((S / total).reshape(-1))


def _readback_columns(
    result: PostselectionResult, emb: HermitianEmbedding, D: int, n: int
) -> np.ndarray:
    """Per-column unit-normalized feature-block amplitudes.

    Per-column norms inside the joint state are not recoverable data, so
    each column is renormalized individually; all-leak columns stay zero.
    """
    n_pad = next_power_of_two(n)
    S = result.state.amplitudes.reshape(n_pad, emb.matrix.shape[0])
    cols = np.real(S[:n, :D]).T.copy()
    imag_max = float(np.max(np.abs(np.imag(S[:n, :D])))) if n else 0.0
    if imag_max > 1e-9:
        raise ValidationError(f"readback has imaginary residue {imag_max}")
    norms = np.linalg.norm(cols, axis=0)
    safe = np.where(norms > 1e-12, norms, 1.0)
    return cols / safe


def qblas_decorrelate(
    Xs: DataMatrix,
    cfg: PhaseEstimationConfig | None = None,
    phase_bits: int = 10,
) -> tuple[PostselectionResult, DataMatrix]:
    """Simulate the decorrelation stage; readback columns are proportional
    to the pseudo-inverse covariance square root applied to each sample."""
    emb = hermitian_embed(Xs)
    if cfg is None:
        cfg = default_phase_config(emb, "inverse", phase_bits=phase_bits)
    _check_simulation_size(Xs, cfg)
    stage = QblasStage(
        emb, cfg, index_qubits=next_power_of_two(Xs.sample_count).bit_length() - 1
    )
    state = stage.qpe_singular_values(_dataset_input_state(Xs.values, emb))
    state = stage.conditional_rotation(state, "inverse")
    result = stage.uncompute_and_postselect(state)
    cols = _readback_columns(result, emb, Xs.dimension, Xs.sample_count)
    return result, DataMatrix(values=cols, labels=Xs.labels)


def qblas_align(
    decorrelated: tuple[PostselectionResult, DataMatrix] | DataMatrix,
    Xt: DataMatrix,
    cfg: PhaseEstimationConfig | None = None,
    phase_bits: int = 10,
) -> tuple[PostselectionResult, DataMatrix]:
    """Simulate the alignment stage (forward rotation with the target data).

    Accepts either the (result, readback) pair from qblas_decorrelate, in
    which case the per-column weights of the postselected state carry over,
    or a plain DataMatrix encoded with equal column weights.
    """
    if isinstance(decorrelated, DataMatrix):
        labels = decorrelated.labels
        columns = decorrelated.values
        D, n = columns.shape
    else:
        prev_result, readback = decorrelated
        labels = readback.labels
        D, n = readback.values.shape
        n_pad = next_power_of_two(n)
        prev_dim = prev_result.state.dimension // n_pad
        S = prev_result.state.amplitudes.reshape(n_pad, prev_dim)
        columns = np.real(S[:n, :D]).T
    if Xt.dimension != D:
        raise DimensionError(
            f"target dimension {Xt.dimension} does not match source {D}"
        )
    emb = hermitian_embed(Xt)
    if cfg is None:
        cfg = default_phase_config(emb, "forward", phase_bits=phase_bits)
    _check_simulation_size(Xt, cfg, sample_count=n)
    stage = QblasStage(emb, cfg, index_qubits=next_power_of_two(n).bit_length() - 1)
    state = stage.qpe_singular_values(_dataset_input_state(columns, emb))
    state = stage.conditional_rotation(state, "forward")
    result = stage.uncompute_and_postselect(state)
    cols = _readback_columns(result, emb, D, n)
    if labels is not None:
        return result, DataMatrix(values=cols, labels=labels)
    return result, DataMatrix(values=cols)


def qblas_coral(
    Xs: DataMatrix, Xt: DataMatrix, phase_bits: int = 10
) -> QblasRun:
    """Run both stages and return the aligned readback with bookkeeping."""
    dec_result, dec_readback = qblas_decorrelate(Xs, phase_bits=phase_bits)
    align_result, aligned = qblas_align(
        (dec_result, dec_readback), Xt, phase_bits=phase_bits
    )
    return QblasRun(
        aligned=aligned, decorrelation=dec_result, alignment=align_result
    )


def _check_simulation_size(
    X: DataMatrix, cfg: PhaseEstimationConfig, sample_count: int | None = None
) -> None:
    n = X.sample_count if sample_count is None else sample_count
    P = next_power_of_two(max(X.dimension, X.sample_count))
    total_qubits = (
        (next_power_of_two(n).bit_length() - 1)
        + cfg.phase_bits
        + (2 * P).bit_length()
        - 1
        + 1
    )
    if total_qubits > 22:
        raise ConfigurationError(
            f"pipeline needs {total_qubits} qubits, beyond the simulator limit"
        )
