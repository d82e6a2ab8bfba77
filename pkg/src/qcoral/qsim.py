"""Exact statevector and density-matrix simulation.

Qubit 0 is the most significant bit of the basis index, so a state on
(index, feature) registers flattens as index-major. States are immutable;
every operation returns a new state. Gate-level simulation is dense and
guarded at MAX_GATE_QUBITS; larger states may exist as containers (for
instance the phase-estimation pipeline) but cannot be run through gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, ValidationError
from .linalg import DataMatrix, next_power_of_two

MAX_GATE_QUBITS = 12
_MAX_STATE_QUBITS = 22

_NORM_TOL = 1e-12
_HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class QuantumState:
    """Unit-norm complex amplitude vector over qubit_count qubits."""

    amplitudes: np.ndarray
    qubit_count: int = field(default=-1)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1:
            raise DimensionError("amplitudes must be a vector")
        n = amps.shape[0]
        if n < 1 or (n & (n - 1)) != 0:
            raise ValidationError(f"amplitude length {n} is not a power of two")
        q = n.bit_length() - 1
        if q > _MAX_STATE_QUBITS:
            raise ConfigurationError(f"{q} qubits exceeds the simulator limit")
        if self.qubit_count >= 0 and self.qubit_count != q:
            raise DimensionError("qubit_count does not match amplitude length")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValidationError(f"state norm {norm} is not 1")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "qubit_count", q)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    """Trace-1 Hermitian PSD matrix on a power-of-two dimension."""

    entries: np.ndarray
    validate: bool = True

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionError(f"density matrix must be square, got {entries.shape}")
        n = entries.shape[0]
        if n < 1 or (n & (n - 1)) != 0:
            raise ValidationError(f"dimension {n} is not a power of two")
        object.__setattr__(self, "entries", entries)
        if self.validate:
            check_density(entries)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def qubit_count(self) -> int:
        return self.dimension.bit_length() - 1


def check_density(entries: np.ndarray) -> None:
    if np.max(np.abs(entries - entries.conj().T)) > _HERMITIAN_TOL:
        raise ValidationError("density matrix is not Hermitian")
    trace = complex(np.trace(entries))
    if abs(trace - 1.0) > _HERMITIAN_TOL:
        raise ValidationError(f"density matrix trace {trace} is not 1")
    eigenvalues = np.linalg.eigvalsh((entries + entries.conj().T) / 2.0)
    if eigenvalues.size and float(eigenvalues[0]) < -1e-10:
        raise ValidationError(f"density matrix has negative eigenvalue {eigenvalues[0]}")


@dataclass(frozen=True)
class AnsatzCircuit:
    """Layered circuit: a Hadamard wall, then layer_count R_y layers with a
    CNOT chain between consecutive rotation layers.

    layer_count counts rotation layers, so parameter_count = qubit_count *
    layer_count. The entangler defaults to the linear chain (0,1), (1,2), ...
    """

    qubit_count: int
    layer_count: int
    entangler_pattern: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        if self.qubit_count < 1:
            raise ConfigurationError("circuit needs at least one qubit")
        if self.qubit_count > MAX_GATE_QUBITS:
            raise ConfigurationError(
                f"{self.qubit_count} qubits exceeds the gate-level limit {MAX_GATE_QUBITS}"
            )
        if self.layer_count < 1:
            raise ConfigurationError("circuit needs at least one rotation layer")
        pattern = tuple(tuple(pair) for pair in self.entangler_pattern)
        if not pattern and self.qubit_count > 1:
            pattern = tuple((j, j + 1) for j in range(self.qubit_count - 1))
        for control, target in pattern:
            if control == target:
                raise ConfigurationError("entangler control equals target")
            if not (0 <= control < self.qubit_count and 0 <= target < self.qubit_count):
                raise ConfigurationError("entangler qubit index out of range")
        object.__setattr__(self, "entangler_pattern", pattern)

    @property
    def parameter_count(self) -> int:
        return self.qubit_count * self.layer_count


# --- gate kernels on raw amplitude arrays -------------------------------

_H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _ry_gate(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]])


def _apply_single(amps: np.ndarray, q: int, gate: np.ndarray, qubit: int) -> np.ndarray:
    psi = amps.reshape((2,) * q)
    psi = np.tensordot(gate, psi, axes=([1], [qubit]))
    return np.moveaxis(psi, 0, qubit).reshape(-1)


def _cnot_permutation(q: int, control: int, target: int) -> np.ndarray:
    z = np.arange(1 << q)
    control_bit = (z >> (q - 1 - control)) & 1
    return z ^ (control_bit << (q - 1 - target))


def _apply_cnot(amps: np.ndarray, q: int, control: int, target: int) -> np.ndarray:
    return amps[_cnot_permutation(q, control, target)]


def _apply_ansatz_raw(
    circuit: AnsatzCircuit, theta: np.ndarray, amps: np.ndarray
) -> np.ndarray:
    q = circuit.qubit_count
    for qubit in range(q):
        amps = _apply_single(amps, q, _H_GATE, qubit)
    for layer in range(circuit.layer_count):
        for qubit in range(q):
            gate = _ry_gate(theta[layer * q + qubit])
            amps = _apply_single(amps, q, gate, qubit)
        if layer < circuit.layer_count - 1:
            for control, target in circuit.entangler_pattern:
                amps = _apply_cnot(amps, q, control, target)
    return amps


def _check_gate_size(q: int) -> None:
    if q > MAX_GATE_QUBITS:
        raise ConfigurationError(
            f"gate-level simulation is limited to {MAX_GATE_QUBITS} qubits, got {q}"
        )


# --- public operations ---------------------------------------------------


def amplitude_encode(v: np.ndarray, pad_to: int | None = None) -> QuantumState:
    """Encode a unit real vector as state amplitudes, zero-padded to a power of two."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError("input must be a nonempty vector")
    norm = np.linalg.norm(v)
    if norm < 1e-15:
        raise ValidationError("cannot amplitude-encode a zero vector")
    if abs(norm - 1.0) > 1e-10:
        raise ValidationError(f"input norm {norm} is not 1 within 1e-10")
    size = next_power_of_two(v.size) if pad_to is None else int(pad_to)
    if size < v.size or (size & (size - 1)) != 0:
        raise ConfigurationError(f"pad_to={pad_to} is not a power of two >= {v.size}")
    amps = np.zeros(size, dtype=complex)
    amps[: v.size] = v / norm
    return QuantumState(amps)


def encode_dataset(X: DataMatrix) -> QuantumState:
    """Joint state over (index, feature) registers with amplitude (i, m)
    proportional to X[m, i]; the index register occupies the high-order qubits."""
    values = X.values
    total = np.linalg.norm(values)
    if total < 1e-15:
        raise ValidationError("cannot encode an all-zero dataset")
    d_pad = next_power_of_two(values.shape[0])
    n_pad = next_power_of_two(values.shape[1])
    padded = np.zeros((d_pad, n_pad))
    padded[: values.shape[0], : values.shape[1]] = values / total
    return QuantumState(padded.T.reshape(-1).astype(complex))


def dataset_register_split(X: DataMatrix) -> tuple[int, int]:
    """(index_qubits, feature_qubits) for encode_dataset(X)."""
    d_pad = next_power_of_two(X.values.shape[0])
    n_pad = next_power_of_two(X.values.shape[1])
    return n_pad.bit_length() - 1, d_pad.bit_length() - 1


def partial_trace(state: QuantumState, traced_qubits: Sequence[int]) -> DensityMatrix:
    """Reduced density matrix after tracing out the given qubits."""
    q = state.qubit_count
    traced = sorted(set(int(t) for t in traced_qubits))
    if any(t < 0 or t >= q for t in traced):
        raise DimensionError(f"traced qubits {traced} outside 0..{q - 1}")
    if len(traced) >= q:
        raise DimensionError("cannot trace out every qubit")
    kept = [j for j in range(q) if j not in traced]
    psi = state.amplitudes.reshape((2,) * q)
    psi = np.transpose(psi, axes=traced + kept)
    A = psi.reshape(1 << len(traced), 1 << len(kept))
    rho = A.T @ A.conj()
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(rho, validate=False)


def apply_ansatz(
    circuit: AnsatzCircuit, theta: np.ndarray, state: QuantumState
) -> QuantumState:
    """Run the layered circuit on a state."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.parameter_count,):
        raise DimensionError(
            f"expected {circuit.parameter_count} parameters, got {theta.shape}"
        )
    if state.qubit_count != circuit.qubit_count:
        raise DimensionError("state and circuit qubit counts differ")
    _check_gate_size(circuit.qubit_count)
    amps = _apply_ansatz_raw(circuit, theta, state.amplitudes)
    amps = amps / np.linalg.norm(amps)
    return QuantumState(amps)


def ansatz_state(circuit: AnsatzCircuit, theta: np.ndarray) -> QuantumState:
    """Circuit applied to |0...0>."""
    zero = np.zeros(1 << circuit.qubit_count, dtype=complex)
    zero[0] = 1.0
    return apply_ansatz(circuit, theta, QuantumState(zero))


def ansatz_unitary(circuit: AnsatzCircuit, theta: np.ndarray) -> np.ndarray:
    """Dense matrix of the circuit, column by column."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.parameter_count,):
        raise DimensionError(
            f"expected {circuit.parameter_count} parameters, got {theta.shape}"
        )
    _check_gate_size(circuit.qubit_count)
    dim = 1 << circuit.qubit_count
    U = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        basis = np.zeros(dim, dtype=complex)
        basis[j] = 1.0
        U[:, j] = _apply_ansatz_raw(circuit, theta, basis)
    return U


def expectation(state: QuantumState, observable) -> float:
    """Real expectation value <psi|H|psi> of a Hermitian observable."""
    H = observable.entries if isinstance(observable, DensityMatrix) else observable
    H = np.asarray(H, dtype=complex)
    if H.shape != (state.dimension, state.dimension):
        raise DimensionError(
            f"observable shape {H.shape} does not match state dimension {state.dimension}"
        )
    scale = max(1.0, float(np.max(np.abs(H))))
    if np.max(np.abs(H - H.conj().T)) > 1e-10 * scale:
        raise ValidationError("observable is not Hermitian within tolerance")
    psi = state.amplitudes
    return float(np.real(psi.conj() @ H @ psi))


def overlap(a: QuantumState, b: QuantumState) -> float:
    """Squared magnitude of the inner product of two states."""
    if a.dimension != b.dimension:
        raise DimensionError("states live on different qubit counts")
    return float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def conjugate_density(
    circuit: AnsatzCircuit, theta: np.ndarray, rho: DensityMatrix
) -> DensityMatrix:
    """U(theta) rho U(theta)^dagger; trace and spectrum are preserved."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.parameter_count,):
        raise DimensionError(
            f"expected {circuit.parameter_count} parameters, got {theta.shape}"
        )
    if rho.qubit_count != circuit.qubit_count:
        raise DimensionError("density matrix and circuit qubit counts differ")
    _check_gate_size(circuit.qubit_count)
    out = _conjugate_raw(circuit, theta, rho.entries)
    return DensityMatrix((out + out.conj().T) / 2.0, validate=False)


def _conjugate_raw(
    circuit: AnsatzCircuit, theta: np.ndarray, rho: np.ndarray
) -> np.ndarray:
    # Stream gates over the columns of rho, then over the rows, instead of
    # building the dense unitary; this keeps the cost at O(gates * 4^q).
    q = circuit.qubit_count
    dim = 1 << q

    def stream(M: np.ndarray) -> np.ndarray:
        out = M
        for qubit in range(q):
            out = _apply_single_batch(out, q, _H_GATE, qubit)
        for layer in range(circuit.layer_count):
            for qubit in range(q):
                gate = _ry_gate(theta[layer * q + qubit])
                out = _apply_single_batch(out, q, gate, qubit)
            if layer < circuit.layer_count - 1:
                for control, target in circuit.entangler_pattern:
                    out = out[_cnot_permutation(q, control, target), :]
        return out

    half = stream(rho.reshape(dim, dim))
    full = stream(half.conj().T.reshape(dim, dim)).conj().T
    return full


def _apply_single_batch(M: np.ndarray, q: int, gate: np.ndarray, qubit: int) -> np.ndarray:
    cols = M.shape[1]
    psi = M.reshape((2,) * q + (cols,))
    psi = np.tensordot(gate, psi, axes=([1], [qubit]))
    return np.moveaxis(psi, 0, qubit).reshape(M.shape)


def batched_apply_ansatz(
    circuit: AnsatzCircuit, thetas: np.ndarray, inputs: np.ndarray
) -> np.ndarray:
    """Circuit applied row-wise: row b of `inputs` runs under parameter row b.

    Takes (B, parameter_count) parameters and (B, 2^q) input states and
    returns the (B, 2^q) outputs in one vectorized pass. This is the hot
    path for shift-rule gradients.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != circuit.parameter_count:
        raise DimensionError(
            f"expected a (batch, {circuit.parameter_count}) parameter block, "
            f"got {thetas.shape}"
        )
    _check_gate_size(circuit.qubit_count)
    q = circuit.qubit_count
    B = thetas.shape[0]
    inputs = np.asarray(inputs)
    if inputs.shape != (B, 1 << q):
        raise DimensionError(
            f"expected inputs of shape ({B}, {1 << q}), got {inputs.shape}"
        )
    psi = inputs.reshape((B,) + (2,) * q).copy()
    broadcast = (B,) + (1,) * (q - 1)

    def rotate(state, axis, c, s):
        x0 = np.take(state, 0, axis=axis)
        x1 = np.take(state, 1, axis=axis)
        return np.stack([c * x0 - s * x1, s * x0 + c * x1], axis=axis)

    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for qubit in range(q):
        axis = 1 + qubit
        x0 = np.take(psi, 0, axis=axis)
        x1 = np.take(psi, 1, axis=axis)
        psi = np.stack([(x0 + x1) * inv_sqrt2, (x0 - x1) * inv_sqrt2], axis=axis)
    for layer in range(circuit.layer_count):
        for qubit in range(q):
            half = thetas[:, layer * q + qubit] / 2.0
            c = np.cos(half).reshape(broadcast)
            s = np.sin(half).reshape(broadcast)
            psi = rotate(psi, 1 + qubit, c, s)
        if layer < circuit.layer_count - 1:
            flat = psi.reshape(B, -1)
            for control, target in circuit.entangler_pattern:
                flat = flat[:, _cnot_permutation(q, control, target)]
            psi = flat.reshape((B,) + (2,) * q)
    return psi.reshape(B, -1)


def batched_ansatz_states(circuit: AnsatzCircuit, thetas: np.ndarray) -> np.ndarray:
    """Circuit applied to |0...0> for a whole block of parameter vectors."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2:
        raise DimensionError("expected a 2-D parameter block")
    zeros = np.zeros((thetas.shape[0], 1 << circuit.qubit_count))
    zeros[:, 0] = 1.0
    return batched_apply_ansatz(circuit, thetas, zeros)
