"""Condensed oracle-equivalence checks behind the `selftest` subcommand.

Each check compares an implementation path against an independent oracle at
a fixed tolerance and prints one PASS/FAIL line.
"""

from __future__ import annotations

import numpy as np

from .classify import knn_predict
from .coral import apply_coral, fit_coral, preprocess
from .linalg import DataMatrix, covariance, frobenius_distance, matrix_half_power, symmetric_eig
from .qblas import qblas_coral
from .qsim import AnsatzCircuit, dataset_register_split, encode_dataset, partial_trace
from .variational import OptimizerConfig, adagrad_step, end_to_end_cost, gradient


def _check_classical_alignment(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(5):
        Xs = preprocess(DataMatrix(rng.normal(size=(4, 60))))
        Xt = preprocess(DataMatrix(rng.normal(size=(4, 60))))
        transform = fit_coral(Xs, Xt)
        aligned = apply_coral(transform, Xs)
        Ct = covariance(Xt)
        rel = frobenius_distance(covariance(aligned), Ct) / np.linalg.norm(Ct)
        worst = max(worst, rel)
        # closed-form path: the factored optimal transform, transposed
        S_s, S_t = symmetric_eig(covariance(Xs)), symmetric_eig(Ct)
        r = min(S_s.rank, S_t.rank)
        A_star = matrix_half_power(S_s, -1) @ matrix_half_power(S_t, +1, rank=r)
        two_path = np.max(np.abs(A_star.T @ Xs.values - aligned.values))
        worst = max(worst, two_path)
    return worst <= 1e-8, f"worst deviation {worst:.3g} (tol 1e-8)"


def _check_trace_identity(rng) -> tuple[bool, str]:
    X = DataMatrix(rng.normal(size=(4, 8)))
    state = encode_dataset(X)
    index_qubits, _ = dataset_register_split(X)
    rho = partial_trace(state, range(index_qubits))
    C = covariance(X)
    gap = np.max(np.abs(rho.entries - C / np.trace(C)))
    return gap <= 1e-12, f"max deviation {gap:.3g} (tol 1e-12)"


def _check_gradient(rng) -> tuple[bool, str]:
    circuit = AnsatzCircuit(qubit_count=2, layer_count=3)
    A = rng.normal(size=(4, 4))
    rho_s = A @ A.T
    rho_s /= np.trace(rho_s)
    B = rng.normal(size=(4, 4))
    rho_t = B @ B.T
    rho_t /= np.trace(rho_t)
    cost = lambda th: end_to_end_cost(circuit, th, rho_s, rho_t)
    theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
    shift = gradient(cost, theta, method="parameter_shift")
    fd = gradient(cost, theta, method="finite_difference")
    rel = np.linalg.norm(shift - fd) / max(np.linalg.norm(shift), 1e-6)
    return rel <= 1e-6, f"relative gap {rel:.3g} (tol 1e-6)"


def _check_adagrad(rng) -> tuple[bool, str]:
    cfg = OptimizerConfig(learning_rate=0.1)
    theta = np.array([0.3, -0.2])
    acc = np.zeros(2)
    grad = np.array([1.0, -2.0])
    oracle_theta, oracle_acc = theta.copy(), acc.copy()
    for _ in range(3):
        theta, acc = adagrad_step(theta, grad, acc, cfg)
        oracle_acc = oracle_acc + grad**2
        oracle_theta = oracle_theta - 0.1 * grad / np.sqrt(oracle_acc + 1e-8)
    gap = np.max(np.abs(theta - oracle_theta)) + np.max(np.abs(acc - oracle_acc))
    return gap <= 1e-12, f"recurrence gap {gap:.3g} (tol 1e-12)"


def _check_qblas(rng) -> tuple[bool, str]:
    Xs = preprocess(DataMatrix(rng.normal(size=(2, 4))))
    Xt = preprocess(DataMatrix(rng.normal(size=(2, 4))))
    run = qblas_coral(Xs, Xt, phase_bits=9)
    oracle = apply_coral(fit_coral(Xs, Xt), Xs).values
    oracle /= np.linalg.norm(oracle, axis=0)
    fidelities = np.abs(np.sum(run.aligned.values * oracle, axis=0)) ** 2
    worst = float(np.min(fidelities))
    return worst >= 0.99, f"min column fidelity {worst:.5f} (floor 0.99)"


def _check_knn(rng) -> tuple[bool, str]:
    train = DataMatrix(rng.normal(size=(3, 20)), labels=rng.integers(0, 2, 20))
    test = DataMatrix(rng.normal(size=(3, 10)), labels=rng.integers(0, 2, 10))
    report = knn_predict(train, test)
    # brute-force oracle
    expected = []
    for i in range(10):
        distances = [
            float(np.sum((train.values[:, j] - test.values[:, i]) ** 2))
            for j in range(20)
        ]
        expected.append(train.labels[int(np.argmin(distances))])
    ok = np.array_equal(report.predicted, expected)
    return ok, "predictions match the distance-matrix oracle" if ok else "mismatch"


def run_selftest(verbose: bool = True) -> int:
    checks = [
        ("classical-alignment", _check_classical_alignment),
        ("trace-covariance-identity", _check_trace_identity),
        ("gradient-shift-vs-fd", _check_gradient),
        ("adagrad-recurrence", _check_adagrad),
        ("qblas-oracle-fidelity", _check_qblas),
        ("knn-oracle", _check_knn),
    ]
    failures = 0
    for name, check in checks:
        rng = np.random.default_rng(7)
        ok, detail = check(rng)
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    return 0 if failures == 0 else 4
