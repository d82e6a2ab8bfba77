"""Variational alignment stack: the end-to-end conjugated-covariance cost,
a deflation eigensolver for covariance square roots, variational
matrix-multiplication costs for per-sample decorrelation/alignment, and the
AdaGrad optimizer driving all of them.

Gradient methods per cost family (recorded here as the module contract):
parameter shift is exact for costs that are quadratic forms of the ansatz
state (end-to-end, deflation penalty, alignment fidelity); the decorrelation
cost carries a parameter-dependent normalization and uses central finite
differences.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DimensionError
from .linalg import RANK_TOLERANCE, DataMatrix, SpectralDecomposition, matrix_half_power
from .qsim import (
    AnsatzCircuit,
    DensityMatrix,
    _conjugate_raw,
    ansatz_state,
    batched_ansatz_states,
    batched_apply_ansatz,
)

logger = logging.getLogger(__name__)

GRADIENT_METHOD_BY_COST = {
    "end_to_end": "parameter_shift",
    "deflation": "parameter_shift",
    "vmm_decorrelate": "finite_difference",
    "vmm_align": "finite_difference",
}

_FD_STEP = 1e-5
_CONVERGENCE_PATIENCE = 20


@dataclass(frozen=True)
class OptimizerConfig:
    """AdaGrad hyperparameters; convergence means |delta cost| below
    convergence_tol for 20 consecutive iterations."""

    learning_rate: float = 0.1
    accumulator_epsilon: float = 1e-8
    max_iterations: int = 2000
    convergence_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")


@dataclass(frozen=True)
class DeflationConfig:
    """Deflation eigensolver settings.

    penalty_weight must dominate the spectral range of the Hamiltonian and
    eta must be at least its largest eigenvalue; both are checked against
    the trace, which bounds the spectrum of a PSD matrix.
    """

    penalty_weight: float
    eta: float
    target_count: int
    restarts: int = 3

    def __post_init__(self):
        if self.penalty_weight <= 0 or self.eta <= 0:
            raise ConfigurationError("penalty_weight and eta must be positive")
        if self.target_count < 1 or self.restarts < 1:
            raise ConfigurationError("target_count and restarts must be at least 1")

    @classmethod
    def for_hamiltonian(cls, H: np.ndarray, target_count: int, restarts: int = 3):
        trace = float(np.real(np.trace(H)))
        return cls(
            penalty_weight=2.0 * trace,
            eta=1.05 * trace,
            target_count=target_count,
            restarts=restarts,
        )


@dataclass(frozen=True)
class TrainingTrace:
    """Per-iteration costs plus the accepted parameters.

    cost_history[0] is the initial cost; AdaGrad may oscillate, so the
    history need not be monotone, but the accepted final cost never exceeds
    the initial one (the best visited point is kept).
    """

    cost_history: np.ndarray
    final_parameters: np.ndarray
    converged: bool
    wall_time: float

    def __post_init__(self):
        object.__setattr__(self, "cost_history", np.asarray(self.cost_history, dtype=float))
        object.__setattr__(
            self, "final_parameters", np.asarray(self.final_parameters, dtype=float)
        )

    @property
    def final_cost(self) -> float:
        return float(np.min(self.cost_history))


# --- gradients and the optimizer step ------------------------------------


def gradient(cost, theta: np.ndarray, method: str = "parameter_shift", batch_cost=None):
    """Gradient of a scalar cost over rotation parameters.

    parameter_shift evaluates cost(theta +- pi/2 e_j) and is exact for costs
    that are quadratic forms of the ansatz state; finite_difference uses
    central differences with step 1e-5. batch_cost, when given, maps a (B, P)
    parameter block to B costs and is used to evaluate all shifts at once.
    """
    theta = np.asarray(theta, dtype=float)
    if method == "parameter_shift":
        shift, scale = np.pi / 2.0, 0.5
    elif method == "finite_difference":
        shift, scale = _FD_STEP, 1.0 / (2.0 * _FD_STEP)
    else:
        raise ConfigurationError(f"unknown gradient method {method!r}")
    P = theta.size
    offsets = np.concatenate([np.eye(P) * shift, -np.eye(P) * shift])
    if batch_cost is not None:
        values = np.asarray(batch_cost(theta[None, :] + offsets), dtype=float)
    else:
        values = np.array([cost(theta + row) for row in offsets], dtype=float)
    if not np.all(np.isfinite(values)):
        raise ConvergenceError("cost is non-finite at a shifted parameter point")
    return (values[:P] - values[P:]) * scale


def adagrad_step(theta, grad, accumulator, cfg: OptimizerConfig):
    """One AdaGrad update; returns (new parameters, new accumulator)."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    accumulator = np.asarray(accumulator, dtype=float)
    if theta.shape != grad.shape or theta.shape != accumulator.shape:
        raise DimensionError("parameter, gradient, and accumulator shapes differ")
    new_acc = accumulator + grad**2
    new_theta = theta - cfg.learning_rate * grad / np.sqrt(new_acc + cfg.accumulator_epsilon)
    return new_theta, new_acc


def _adagrad_minimize(cost, theta0, opt: OptimizerConfig, method, batch_cost=None):
    """Run AdaGrad to convergence; returns a TrainingTrace tracking the best
    visited parameters."""
    theta = np.asarray(theta0, dtype=float)
    accumulator = np.zeros_like(theta)
    start = time.perf_counter()
    current = float(cost(theta))
    if not np.isfinite(current):
        raise ConvergenceError("initial cost is non-finite")
    history = [current]
    best_theta, best_cost = theta.copy(), current
    streak = 0
    converged = False
    for _ in range(opt.max_iterations):
        grad = gradient(cost, theta, method=method, batch_cost=batch_cost)
        theta, accumulator = adagrad_step(theta, grad, accumulator, opt)
        value = float(cost(theta))
        if not np.isfinite(value):
            raise ConvergenceError("cost became non-finite during training")
        history.append(value)
        if value < best_cost:
            best_theta, best_cost = theta.copy(), value
        if abs(value - history[-2]) < opt.convergence_tol:
            streak += 1
            if streak >= _CONVERGENCE_PATIENCE:
                converged = True
                break
        else:
            streak = 0
    return TrainingTrace(
        cost_history=np.array(history),
        final_parameters=best_theta,
        converged=converged,
        wall_time=time.perf_counter() - start,
    )


def _initial_parameters(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.uniform(-np.pi, np.pi, size=count)


# --- end-to-end covariance alignment --------------------------------------


def _density_entries(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def end_to_end_cost(circuit: AnsatzCircuit, theta, rho_s, rho_t) -> float:
    """Squared Frobenius distance between the conjugated source covariance
    and the target covariance."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (circuit.parameter_count,):
        raise DimensionError(
            f"expected {circuit.parameter_count} parameters, got {theta.shape}"
        )
    A = _density_entries(rho_s)
    B = _density_entries(rho_t)
    dim = 1 << circuit.qubit_count
    if A.shape != (dim, dim) or B.shape != (dim, dim):
        raise DimensionError("density matrices do not match the circuit dimension")
    conjugated = _conjugate_raw(circuit, theta, A)
    return float(np.sum(np.abs(conjugated - B) ** 2))


def spectral_lower_bound(rho_s, rho_t) -> float:
    """Sum of squared differences of sorted spectra; unitary conjugation
    cannot do better than matching eigenvalues."""
    lam_s = np.linalg.eigvalsh(_density_entries(rho_s))
    lam_t = np.linalg.eigvalsh(_density_entries(rho_t))
    return float(np.sum((np.sort(lam_s) - np.sort(lam_t)) ** 2))


def _end_to_end_batch_cost(circuit: AnsatzCircuit, rho_s, rho_t):
    """Batched evaluator identical to end_to_end_cost, expanded through the
    eigenbasis of rho_s: |U rho_s U+ - rho_t|^2 = tr(rho_s^2) + tr(rho_t^2)
    - 2 sum_k lam_k <U v_k| rho_t |U v_k>."""
    A = _density_entries(rho_s)
    B = _density_entries(rho_t)
    lam, V = np.linalg.eigh(A)
    keep = np.abs(lam) > 1e-14
    lam, V = lam[keep], V[:, keep]
    constant = float(np.real(np.trace(A @ A) + np.trace(B @ B)))
    K = lam.size

    def batch_cost(thetas):
        thetas = np.asarray(thetas, dtype=float)
        n_batch = thetas.shape[0]
        rep = np.repeat(thetas, K, axis=0)
        inputs = np.tile(V.T, (n_batch, 1))
        out = batched_apply_ansatz(circuit, rep, inputs)
        quad = np.real(np.einsum("ri,ij,rj->r", out.conj(), B, out))
        mixed = (quad.reshape(n_batch, K) * lam).sum(axis=1)
        return constant - 2.0 * mixed

    return batch_cost


def train_end_to_end(
    circuit: AnsatzCircuit, rho_s, rho_t, opt: OptimizerConfig, restarts: int = 3
) -> TrainingTrace:
    """Minimize the end-to-end cost over the ansatz parameters; the best of
    `restarts` seeded random initializations is returned."""
    rng = np.random.default_rng(opt.seed)
    batch_cost = _end_to_end_batch_cost(circuit, rho_s, rho_t)
    cost = lambda th: float(batch_cost(th[None, :])[0])
    best: TrainingTrace | None = None
    start = time.perf_counter()
    for _ in range(max(1, restarts)):
        trace = _adagrad_minimize(
            cost,
            _initial_parameters(rng, circuit.parameter_count),
            opt,
            GRADIENT_METHOD_BY_COST["end_to_end"],
            batch_cost=batch_cost,
        )
        if best is None or trace.final_cost < best.final_cost:
            best = trace
    return TrainingTrace(
        cost_history=best.cost_history,
        final_parameters=best.final_parameters,
        converged=best.converged,
        wall_time=time.perf_counter() - start,
    )


def apply_trained_transform(
    circuit: AnsatzCircuit, theta: np.ndarray, Xs: DataMatrix
) -> DataMatrix:
    """Send every (unit, power-of-two padded) column through the trained
    circuit; the states stay real for this gate set, which is asserted
    rather than silently projected."""
    theta = np.asarray(theta, dtype=float)
    dim = 1 << circuit.qubit_count
    if Xs.dimension != dim:
        raise DimensionError(
            f"data dimension {Xs.dimension} does not match circuit dimension {dim}"
        )
    norms = np.linalg.norm(Xs.values, axis=0)
    if np.max(np.abs(norms - 1.0)) > 1e-10:
        raise DimensionError("columns must be unit-normalized")
    transformed = _apply_circuit_to_columns(circuit, theta, Xs.values)
    transformed /= np.linalg.norm(transformed, axis=0)
    return DataMatrix(
        values=transformed,
        labels=Xs.labels,
        column_norms=Xs.column_norms,
        original_dimension=Xs.original_dimension,
    )


def _apply_circuit_to_columns(circuit, theta, columns) -> np.ndarray:
    from .qsim import _apply_ansatz_raw

    out = np.empty_like(columns, dtype=float)
    for i in range(columns.shape[1]):
        psi = _apply_ansatz_raw(circuit, theta, columns[:, i].astype(complex))
        imag = float(np.max(np.abs(psi.imag)))
        if imag > 1e-10:
            raise ConvergenceError(f"transformed state has imaginary residue {imag}")
        out[:, i] = psi.real
    return out


# --- deflation eigensolver -------------------------------------------------


def deflation_eigensolve(
    H,
    circuit: AnsatzCircuit,
    cfg: DeflationConfig,
    mode: str = "all_eigen",
    opt: OptimizerConfig | None = None,
    with_details: bool = False,
):
    """Recover eigenpairs sequentially with overlap penalties against the
    states already found.

    all_eigen minimizes over H itself, yielding eigenvalues in ascending
    discovery order. top_r_via_eta minimizes over eta*I - H and reports
    eta - E, i.e. the largest eigenvalues of H. Eigenvectors are
    re-orthonormalized before being returned; with_details additionally
    returns the raw ansatz vectors and per-pair traces.
    """
    H = _density_entries(H)
    dim = 1 << circuit.qubit_count
    if H.shape != (dim, dim):
        raise DimensionError("Hamiltonian does not match the circuit dimension")
    trace = float(np.real(np.trace(H)))
    if cfg.penalty_weight <= trace:
        raise ConfigurationError(
            f"penalty weight {cfg.penalty_weight} does not dominate the spectrum "
            f"bound {trace}"
        )
    if mode == "all_eigen":
        work = np.real(H).astype(float)
    elif mode == "top_r_via_eta":
        if cfg.eta < trace:
            raise ConfigurationError(
                f"eta {cfg.eta} is below the spectral upper bound {trace}"
            )
        work = cfg.eta * np.eye(dim) - np.real(H)
    else:
        raise ConfigurationError(f"unknown mode {mode!r}")
    if cfg.target_count > dim:
        raise ConfigurationError("cannot extract more eigenpairs than the dimension")

    opt = opt or OptimizerConfig()
    rng = np.random.default_rng(opt.seed)
    found_vectors: list[np.ndarray] = []
    found_energies: list[float] = []
    traces: list[TrainingTrace] = []
    alpha = cfg.penalty_weight

    for k in range(cfg.target_count):
        V = np.array(found_vectors).T if found_vectors else None

        def batch_cost(thetas, V=V):
            states = batched_ansatz_states(circuit, thetas)
            energies = np.real(np.einsum("bi,ij,bj->b", states.conj(), work, states))
            if V is not None:
                energies = energies + alpha * np.sum(
                    np.abs(states.conj() @ V) ** 2, axis=1
                )
            return energies

        cost = lambda th: float(batch_cost(th[None, :])[0])
        best: TrainingTrace | None = None
        for _ in range(cfg.restarts):
            trace_k = _adagrad_minimize(
                cost,
                _initial_parameters(rng, circuit.parameter_count),
                opt,
                GRADIENT_METHOD_BY_COST["deflation"],
                batch_cost=batch_cost,
            )
            if best is None or trace_k.final_cost < best.final_cost:
                best = trace_k
        improved = best.final_cost < best.cost_history[0] - 1e-15
        if not best.converged and not improved:
            raise ConvergenceError(
                f"deflation stagnated at eigenpair {k + 1}/{cfg.target_count}",
                partial=(np.array(found_energies), np.array(found_vectors).T),
            )
        psi = ansatz_state(circuit, best.final_parameters).amplitudes
        vector = np.real(psi)
        vector = vector / np.linalg.norm(vector)
        energy = float(np.real(vector @ work @ vector))
        found_vectors.append(vector)
        found_energies.append(energy)
        traces.append(best)

    energies = np.array(found_energies)
    eigenvalues = energies if mode == "all_eigen" else cfg.eta - energies
    raw_vectors = np.array(found_vectors).T
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    vectors = raw_vectors[:, order]
    Q, _ = np.linalg.qr(vectors)
    lam_max = float(np.max(eigenvalues)) if eigenvalues.size else 0.0
    rank = int(np.sum(eigenvalues > RANK_TOLERANCE * max(lam_max, 0.0)))
    result = SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=Q, rank=rank)
    if with_details:
        return result, {"raw_vectors": raw_vectors, "traces": traces}
    return result


def square_root_from_eigenpairs(S: SpectralDecomposition, sign: int) -> np.ndarray:
    """Matrix half power assembled from (possibly variational) eigenpairs;
    eigenvectors are re-orthonormalized first."""
    order = np.argsort(S.eigenvalues)[::-1]
    eigenvalues = S.eigenvalues[order]
    Q, _ = np.linalg.qr(S.eigenvectors[:, order])
    lam_max = float(np.max(eigenvalues)) if eigenvalues.size else 0.0
    rank = int(np.sum(eigenvalues > RANK_TOLERANCE * max(lam_max, 0.0)))
    clean = SpectralDecomposition(
        eigenvalues=np.clip(eigenvalues, 0.0, None), eigenvectors=Q, rank=rank
    )
    return matrix_half_power(clean, sign)


# --- variational matrix multiplication -------------------------------------


def _per_sample_thetas(theta, n: int, parameter_count: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        if theta.shape != (parameter_count,):
            raise DimensionError("shared parameter vector has the wrong length")
        return np.tile(theta, (n, 1))
    if theta.shape != (n, parameter_count):
        raise DimensionError(
            f"expected per-sample parameters of shape ({n}, {parameter_count})"
        )
    return theta


def _check_unit_columns(values: np.ndarray, dim: int) -> None:
    if values.shape[0] != dim:
        raise DimensionError(
            f"data dimension {values.shape[0]} does not match circuit dimension {dim}"
        )
    norms = np.linalg.norm(values, axis=0)
    if norms.size and np.max(np.abs(norms - 1.0)) > 1e-8:
        raise DimensionError("columns must be unit-normalized")


def vmm_cost_decorrelate(
    circuit: AnsatzCircuit, theta_d, Xs: DataMatrix, Cs_half: np.ndarray
) -> float:
    """1 - mean fidelity between each sample and its ansatz state pushed
    through the covariance square root (the variational linear solve).

    A sample whose ansatz state falls in the null space of the square root
    contributes cost 1 and is logged.
    """
    values = Xs.values
    dim = 1 << circuit.qubit_count
    _check_unit_columns(values, dim)
    Cs_half = np.asarray(Cs_half, dtype=float)
    thetas = _per_sample_thetas(theta_d, values.shape[1], circuit.parameter_count)
    states = batched_ansatz_states(circuit, thetas)  # (n, dim), real gate set
    pushed = states.real @ Cs_half.T
    norms = np.linalg.norm(pushed, axis=1)
    fidelities = np.zeros(values.shape[1])
    usable = norms > 1e-12
    if not np.all(usable):
        logger.warning(
            "%d ansatz state(s) lie in the null space of the square root",
            int(np.sum(~usable)),
        )
    inner = np.einsum("ni,in->n", pushed, values)
    fidelities[usable] = (inner[usable] / norms[usable]) ** 2
    return float(np.clip(1.0 - fidelities.mean(), 0.0, 1.0))


def vmm_align_targets(decorrelated: np.ndarray, Ct_half: np.ndarray) -> np.ndarray:
    """Unit targets: the recoloring square root applied to each decorrelated
    column, normalized per column (self-consistent normalization)."""
    pushed = np.asarray(Ct_half, dtype=float) @ np.asarray(decorrelated, dtype=float)
    norms = np.linalg.norm(pushed, axis=0)
    usable = norms > 1e-12
    if not np.all(usable):
        logger.warning(
            "%d decorrelated column(s) lie in the null space of the recoloring root",
            int(np.sum(~usable)),
        )
    out = np.zeros_like(pushed)
    out[:, usable] = pushed[:, usable] / norms[usable]
    return out


def vmm_cost_align(
    circuit: AnsatzCircuit, theta_a, decorrelated, Ct_half: np.ndarray
) -> float:
    """1 - mean fidelity between the ansatz states and the recolored
    decorrelated columns."""
    columns = decorrelated.values if isinstance(decorrelated, DataMatrix) else np.asarray(
        decorrelated, dtype=float
    )
    dim = 1 << circuit.qubit_count
    _check_unit_columns(columns, dim)
    targets = vmm_align_targets(columns, Ct_half)
    thetas = _per_sample_thetas(theta_a, columns.shape[1], circuit.parameter_count)
    states = batched_ansatz_states(circuit, thetas)
    fidelities = np.einsum("ni,in->n", states.real, targets) ** 2
    return float(np.clip(1.0 - fidelities.mean(), 0.0, 1.0))


@dataclass(frozen=True)
class VmmResult:
    """Aligned data plus the recorded per-sample final costs."""

    aligned: DataMatrix
    decorrelated: DataMatrix
    lm1: np.ndarray
    lm2: np.ndarray

    @property
    def lm1_mean(self) -> float:
        return float(self.lm1.mean())

    @property
    def lm2_mean(self) -> float:
        return float(self.lm2.mean())


def train_vmm(
    Xs: DataMatrix,
    Cs_half: np.ndarray,
    Ct_half: np.ndarray,
    circuit: AnsatzCircuit,
    opt: OptimizerConfig,
    per_sample: bool = True,
    restarts: int = 3,
) -> VmmResult:
    """Two-stage variational transport: fit decorrelated states against the
    source samples, then fit aligned states against the recolored targets.

    per_sample trains one parameter set per sample (the default); the shared
    mode is an economy option that fits a single parameter set per stage.
    """
    values = Xs.values
    dim = 1 << circuit.qubit_count
    _check_unit_columns(values, dim)
    n = values.shape[1]
    rng = np.random.default_rng(opt.seed)

    def fit_column(cost_builder, count):
        params = np.empty((count, circuit.parameter_count))
        costs = np.empty(count)
        for i in range(count):
            cost, batch = cost_builder(i)
            best = None
            for _ in range(max(1, restarts)):
                trace = _adagrad_minimize(
                    cost,
                    _initial_parameters(rng, circuit.parameter_count),
                    opt,
                    "finite_difference",
                    batch_cost=batch,
                )
                if best is None or trace.final_cost < best.final_cost:
                    best = trace
            params[i] = best.final_parameters
            costs[i] = best.final_cost
        return params, costs

    def stage(targets_fn, count):
        # targets_fn(i) -> (matrix A applied to the ansatz state or None,
        #                   unit target vector)
        def builder(i):
            A, target = targets_fn(i)

            def batch(thetas):
                states = batched_ansatz_states(circuit, thetas).real
                if A is None:
                    fa = (states @ target) ** 2
                    return 1.0 - fa
                pushed = states @ A.T
                norms = np.linalg.norm(pushed, axis=1)
                fa = np.zeros(thetas.shape[0])
                ok = norms > 1e-12
                fa[ok] = ((pushed[ok] @ target) / norms[ok]) ** 2
                return 1.0 - fa

            return (lambda th: float(batch(th[None, :])[0])), batch

        return fit_column(builder, count)

    count = n if per_sample else 1
    Cs_half = np.asarray(Cs_half, dtype=float)
    Ct_half = np.asarray(Ct_half, dtype=float)

    params_d, lm1 = stage(lambda i: (Cs_half, values[:, i if per_sample else 0]), count)
    if not per_sample:
        params_d = np.tile(params_d, (n, 1))
        lm1 = np.full(n, vmm_cost_decorrelate(circuit, params_d, Xs, Cs_half))
    decorrelated_cols = batched_ansatz_states(circuit, params_d).real.T
    decorrelated = DataMatrix(values=decorrelated_cols, labels=Xs.labels)

    targets = vmm_align_targets(decorrelated_cols, Ct_half)
    params_a, lm2 = stage(lambda i: (None, targets[:, i if per_sample else 0]), count)
    if not per_sample:
        params_a = np.tile(params_a, (n, 1))
        lm2 = np.full(n, vmm_cost_align(circuit, params_a, decorrelated, Ct_half))
    aligned_cols = batched_ansatz_states(circuit, params_a).real.T
    norms = np.linalg.norm(aligned_cols, axis=0)
    aligned_cols = aligned_cols / np.where(norms > 0, norms, 1.0)
    aligned = DataMatrix(values=aligned_cols, labels=Xs.labels)
    return VmmResult(aligned=aligned, decorrelated=decorrelated, lm1=lm1, lm2=lm2)
