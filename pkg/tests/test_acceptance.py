"""Acceptance criteria, one test per criterion at its stated tolerance.

Run with ``pytest -v -s tests/test_acceptance.py`` to see one PASS line per
criterion. The handwritten-digit criterion is in the slow/optional tier and
needs QCORAL_DATA_DIR to point at MNIST IDX files and a USPS text file.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from qcoral.classify import knn_predict
from qcoral.coral import apply_coral, fit_coral, preprocess
from qcoral.datasets import DatasetSpec, generate_synthetic, load_digits, load_iris, pad_to_qubits
from qcoral.linalg import (
    DataMatrix,
    covariance,
    frobenius_distance,
    matrix_half_power,
    symmetric_eig,
)
from qcoral.qblas import QblasStage, default_phase_config, hermitian_embed, qblas_coral
from qcoral.qsim import (
    AnsatzCircuit,
    DensityMatrix,
    QuantumState,
    ansatz_state,
    apply_ansatz,
    batched_ansatz_states,
    conjugate_density,
    dataset_register_split,
    encode_dataset,
    partial_trace,
)
from qcoral.variational import (
    DeflationConfig,
    OptimizerConfig,
    apply_trained_transform,
    deflation_eigensolve,
    end_to_end_cost,
    gradient,
    spectral_lower_bound,
    square_root_from_eigenpairs,
    train_end_to_end,
    vmm_cost_align,
)


def report(number, detail):
    print(f"\nACCEPTANCE {number}: PASS ({detail})")


def preprocessed(rng, dim, n):
    return preprocess(DataMatrix(values=rng.normal(size=(dim, n))))


def column_fidelities(A, B):
    return np.abs(np.sum(A * B, axis=0)) ** 2


def normalized_density(X):
    C = covariance(X)
    return DensityMatrix(C / np.trace(C))


def test_criterion_1_classical_coral_exactness():
    start = time.perf_counter()
    worst_cov, worst_path = 0.0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        Xs = preprocessed(rng, 4, 100)
        Xt = preprocessed(rng, 4, 100)
        aligned = apply_coral(fit_coral(Xs, Xt), Xs)
        Ct = covariance(Xt)
        worst_cov = max(
            worst_cov, frobenius_distance(covariance(aligned), Ct) / np.linalg.norm(Ct)
        )
        S_s = symmetric_eig(covariance(Xs))
        S_t = symmetric_eig(Ct)
        r = min(S_s.rank, S_t.rank)
        A_star = matrix_half_power(S_s, -1) @ matrix_half_power(S_t, +1, rank=r)
        worst_path = max(
            worst_path, float(np.max(np.abs(A_star.T @ Xs.values - aligned.values)))
        )
    elapsed = time.perf_counter() - start
    assert worst_cov <= 1e-8
    assert worst_path <= 1e-10
    assert elapsed < 1.0
    report(1, f"cov dev {worst_cov:.2e}, path dev {worst_path:.2e}, {elapsed:.2f}s")


def _dense_stage_replay(stage, input_state, mode):
    """Independent replay of one pipeline stage with dense QFT matrices."""
    T = stage.register_size
    V = stage.system_dim
    n_idx = stage.index_dim
    eigenvalues, W = np.linalg.eigh(stage.embedding.matrix)
    U_step = W @ np.diag(np.exp(1j * eigenvalues * stage.cfg.evolution_time)) @ W.T
    S = input_state.amplitudes.reshape(n_idx, V)
    joint = np.zeros((n_idx, T, V), dtype=complex)
    power = np.eye(V, dtype=complex)
    for tau in range(T):
        joint[:, tau, :] = (power @ S.T).T / np.sqrt(T)
        power = U_step @ power
    k = np.arange(T)
    F = np.exp(-2j * np.pi * np.outer(k, k) / T) / np.sqrt(T)
    qpe = np.einsum("kt,itv->ikv", F, joint)
    sigma_hat = stage.bin_singular_values()
    gamma = stage.cfg.gamma
    if mode == "inverse":
        amp1 = np.where(
            sigma_hat >= gamma * (1 - 1e-12),
            np.minimum(gamma / np.where(sigma_hat > 0, sigma_hat, 1.0), 1.0),
            0.0,
        )
    else:
        amp1 = np.minimum(gamma * sigma_hat, 1.0)
    selected = qpe * amp1[None, :, None]
    back = np.einsum("kt,ikv->itv", F.conj().T, selected)
    power = np.eye(V, dtype=complex)
    for tau in range(T):
        back[:, tau, :] = (power @ back[:, tau, :].T).T
        power = U_step.conj().T @ power
    projected = back.sum(axis=1) / np.sqrt(T)
    return projected, float(np.sum(np.abs(projected) ** 2))


def test_criterion_2_qblas_oracle_equivalence():
    start = time.perf_counter()
    worst_fid = 1.0
    for dim, seed in ((2, 0), (2, 1), (4, 2), (4, 3)):
        rng = np.random.default_rng(seed)
        Xs = preprocessed(rng, dim, 8)
        Xt = preprocessed(rng, dim, 8)
        run = qblas_coral(Xs, Xt, phase_bits=10)
        oracle = apply_coral(fit_coral(Xs, Xt), Xs).values
        oracle = oracle / np.linalg.norm(oracle, axis=0)
        worst_fid = min(worst_fid, float(np.min(column_fidelities(run.aligned.values, oracle))))

    # probability bookkeeping against an independent dense replay
    rng = np.random.default_rng(4)
    Xs = preprocessed(rng, 2, 4)
    emb = hermitian_embed(Xs)
    cfg = default_phase_config(emb, "inverse", phase_bits=6)
    stage = QblasStage(emb, cfg, index_qubits=2)
    from qcoral.qblas import _dataset_input_state

    input_state = _dataset_input_state(Xs.values, emb)
    state = stage.conditional_rotation(stage.qpe_singular_values(input_state), "inverse")
    result = stage.uncompute_and_postselect(state)
    dense_state, dense_prob = _dense_stage_replay(stage, input_state, "inverse")
    prob_gap = abs(result.success_probability - dense_prob)
    state_gap = float(
        np.max(
            np.abs(
                result.state.amplitudes * np.sqrt(result.success_probability)
                - dense_state.reshape(-1)
            )
        )
    )
    elapsed = time.perf_counter() - start
    assert worst_fid >= 0.99
    assert prob_gap <= 1e-10
    assert state_gap <= 1e-10
    assert elapsed < 60.0
    report(2, f"min fidelity {worst_fid:.5f}, prob gap {prob_gap:.1e}, {elapsed:.1f}s")


def test_criterion_3_deflation_eigensolver_accuracy():
    start = time.perf_counter()
    circuit = AnsatzCircuit(qubit_count=2, layer_count=6)
    worst_eig, worst_sqrt = 0.0, 0.0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        A = rng.normal(size=(4, 4))
        H = A @ A.T
        H = H / np.trace(H)
        cfg = DeflationConfig.for_hamiltonian(H, target_count=4, restarts=3)
        S = deflation_eigensolve(H, circuit, cfg, opt=OptimizerConfig(seed=seed))
        dense = np.sort(np.linalg.eigvalsh(H))[::-1]
        worst_eig = max(worst_eig, float(np.max(np.abs(S.eigenvalues - dense))))
        root = square_root_from_eigenpairs(S, +1)
        worst_sqrt = max(worst_sqrt, float(np.linalg.norm(root @ root - H)))
    elapsed = time.perf_counter() - start
    assert worst_eig <= 1e-3
    assert worst_sqrt <= 2e-2
    assert elapsed < 300.0
    report(3, f"eig dev {worst_eig:.2e}, sqrt dev {worst_sqrt:.2e}, {elapsed:.1f}s")


def test_criterion_4_gradient_correctness():
    start = time.perf_counter()
    circuit = AnsatzCircuit(qubit_count=2, layer_count=3)
    worst = 0.0
    checks = 0
    for seed in range(20):
        rng = np.random.default_rng(200 + seed)
        A = rng.normal(size=(4, 4))
        rho_s = A @ A.T
        rho_s /= np.trace(rho_s)
        B = rng.normal(size=(4, 4))
        rho_t = B @ B.T
        rho_t /= np.trace(rho_t)
        family = seed % 3
        if family == 0:
            cost = lambda th: end_to_end_cost(circuit, th, rho_s, rho_t)
        elif family == 1:
            anchor = np.real(ansatz_state(circuit, rng.uniform(-np.pi, np.pi, circuit.parameter_count)).amplitudes)

            def cost(th, H=rho_s, anchor=anchor):
                psi = np.real(ansatz_state(circuit, th).amplitudes)
                return float(psi @ H @ psi + 2.0 * (anchor @ psi) ** 2)

        else:
            decor = rng.normal(size=(4, 3))
            decor /= np.linalg.norm(decor, axis=0)
            Ct_half = matrix_half_power(symmetric_eig(rho_t), +1)
            cost = lambda th, d=decor, C=Ct_half: vmm_cost_align(circuit, th, d, C)
        theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
        shift = gradient(cost, theta, method="parameter_shift")
        fd = gradient(cost, theta, method="finite_difference")
        rel = np.linalg.norm(shift - fd) / max(np.linalg.norm(shift), 1e-6)
        worst = max(worst, float(rel))
        checks += 1
    elapsed = time.perf_counter() - start
    assert checks == 20
    assert worst <= 1e-6
    assert elapsed < 30.0
    report(4, f"worst relative gap {worst:.2e} over 20 pairs, {elapsed:.1f}s")


def test_criterion_5_spectral_lower_bound():
    start = time.perf_counter()
    circuit = AnsatzCircuit(qubit_count=2, layer_count=4)
    margin = np.inf
    for seed in range(50):
        rng = np.random.default_rng(300 + seed)
        A = rng.normal(size=(4, 4))
        rho_s = A @ A.T
        rho_s /= np.trace(rho_s)
        B = rng.normal(size=(4, 4))
        rho_t = B @ B.T
        rho_t /= np.trace(rho_t)
        theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
        gap = end_to_end_cost(circuit, theta, rho_s, rho_t) - spectral_lower_bound(rho_s, rho_t)
        assert gap >= -1e-10
        margin = min(margin, gap)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    report(5, f"min cost-bound gap {margin:.2e} over 50 triples, {elapsed:.1f}s")


def _variational_accuracy(source, target, seed, layers=8):
    circuit = AnsatzCircuit(qubit_count=2, layer_count=layers)
    trace = train_end_to_end(
        circuit,
        normalized_density(source),
        normalized_density(target),
        OptimizerConfig(seed=seed),
        restarts=3,
    )
    aligned = apply_trained_transform(circuit, trace.final_parameters, source)
    return knn_predict(aligned, target).accuracy


def test_criterion_6_synthetic_table_band():
    start = time.perf_counter()
    results = {}
    for src_kind, tgt_kind in (("d1", "d2"), ("d2", "d1")):
        na, vq = [], []
        for seed in range(5):
            source = generate_synthetic(DatasetSpec.preset(src_kind, seed=2 * seed))
            target = generate_synthetic(DatasetSpec.preset(tgt_kind, seed=2 * seed + 1))
            na.append(knn_predict(source, target).accuracy)
            vq.append(_variational_accuracy(source, target, seed))
        task = f"{src_kind}->{tgt_kind}"
        results[task] = (float(np.median(na)), float(np.median(vq)))
        assert results[task][1] >= results[task][0] + 0.20, task
        assert results[task][1] >= 0.75, task
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    detail = ", ".join(
        f"{task}: NA {na:.2f} vs VQ {vq:.2f}" for task, (na, vq) in results.items()
    )
    report(6, f"{detail}, {elapsed:.0f}s")


def test_criterion_7_iris_table_direction():
    start = time.perf_counter()
    iris = preprocess(load_iris())
    results = {}
    for direction in ("d3->iris", "iris->d3"):
        na, vq = [], []
        for seed in range(5):
            d3 = generate_synthetic(DatasetSpec.preset("d3", seed=2 * seed))
            source, target = (d3, iris) if direction == "d3->iris" else (iris, d3)
            na.append(knn_predict(source, target).accuracy)
            vq.append(_variational_accuracy(source, target, seed))
        results[direction] = (float(np.median(na)), float(np.median(vq)))
        assert results[direction][1] >= results[direction][0] + 0.20, direction
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    detail = ", ".join(
        f"{task}: NA {na:.2f} vs VQ {vq:.2f}" for task, (na, vq) in results.items()
    )
    report(7, f"{detail}, {elapsed:.0f}s")


def _digits_available():
    root = os.environ.get("QCORAL_DATA_DIR")
    if not root:
        return False
    root = Path(root)
    has_mnist = any((root / "mnist" / name).exists() for name in
                    ("train-images-idx3-ubyte", "train-images.idx3-ubyte"))
    has_usps = any((root / "usps" / name).exists() for name in
                   ("usps.txt", "usps.train", "zip.train"))
    return has_mnist and has_usps


@pytest.mark.slow
@pytest.mark.skipif(
    not _digits_available(),
    reason="MNIST/USPS files not found under QCORAL_DATA_DIR (slow/optional tier)",
)
def test_criterion_8_digits_table_band():
    start = time.perf_counter()
    root = Path(os.environ["QCORAL_DATA_DIR"])
    mnist = preprocess(load_digits("mnist", root / "mnist", 500))
    usps = preprocess(load_digits("usps", root / "usps", 450))
    accuracies = {}
    for name, source, target in (("mnist->usps", mnist, usps), ("usps->mnist", usps, mnist)):
        source_p, target_p = pad_to_qubits(source), pad_to_qubits(target)
        na = knn_predict(source_p, target_p).accuracy
        coral = knn_predict(apply_coral(fit_coral(source_p, target_p), source_p), target_p).accuracy
        circuit = AnsatzCircuit(qubit_count=8, layer_count=16)
        trace = train_end_to_end(
            circuit,
            normalized_density(source_p),
            normalized_density(target_p),
            OptimizerConfig(seed=0, max_iterations=400),
            restarts=1,
        )
        vq = knn_predict(
            apply_trained_transform(circuit, trace.final_parameters, source_p), target_p
        ).accuracy
        accuracies[name] = (na, coral, vq)
    na_um, coral_um, vq_um = accuracies["usps->mnist"]
    assert coral_um >= na_um + 0.05
    for name in accuracies:
        na, coral, vq = accuracies[name]
        assert vq >= coral - 0.08, name
    elapsed = time.perf_counter() - start
    assert elapsed < 3600.0
    report(8, f"{accuracies}, {elapsed:.0f}s")


def test_criterion_9_property_suites():
    start = time.perf_counter()
    trials = 200

    # covariance output is symmetric PSD
    for seed in range(trials):
        rng = np.random.default_rng(1000 + seed)
        C = covariance(DataMatrix(values=rng.normal(size=(rng.integers(2, 6), rng.integers(2, 30)))))
        eig = np.linalg.eigvalsh(C)
        assert eig[0] >= -1e-10 * max(eig[-1], 1e-300)
        assert np.max(np.abs(C - C.T)) == 0.0

    # gate application preserves the state norm
    for seed in range(trials):
        rng = np.random.default_rng(2000 + seed)
        q = int(rng.integers(1, 4))
        circuit = AnsatzCircuit(qubit_count=q, layer_count=int(rng.integers(1, 4)))
        theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
        v = rng.normal(size=1 << q) + 1j * rng.normal(size=1 << q)
        v /= np.linalg.norm(v)
        out = apply_ansatz(circuit, theta, QuantumState(v))
        assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-12

    # conjugation preserves trace and spectrum
    for seed in range(trials):
        rng = np.random.default_rng(3000 + seed)
        circuit = AnsatzCircuit(qubit_count=2, layer_count=3)
        theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
        A = rng.normal(size=(4, 4))
        rho = DensityMatrix((lambda M: M / np.trace(M))(A @ A.T))
        out = conjugate_density(circuit, theta, rho)
        assert abs(np.trace(out.entries).real - 1.0) < 1e-12
        assert np.max(np.abs(
            np.linalg.eigvalsh(out.entries) - np.linalg.eigvalsh(rho.entries)
        )) < 1e-10

    # partial trace of the dataset state is the normalized covariance
    for seed in range(trials):
        rng = np.random.default_rng(4000 + seed)
        X = DataMatrix(values=rng.normal(size=(rng.integers(2, 9), rng.integers(2, 9))))
        state = encode_dataset(X)
        index_qubits, feature_qubits = dataset_register_split(X)
        rho = partial_trace(state, range(index_qubits))
        C = covariance(X)
        padded = np.zeros((1 << feature_qubits, 1 << feature_qubits))
        padded[: C.shape[0], : C.shape[1]] = C / np.trace(C)
        assert np.max(np.abs(rho.entries - padded)) < 1e-12

    # transport costs stay inside [0, 1]
    circuit = AnsatzCircuit(qubit_count=2, layer_count=2)
    from qcoral.variational import vmm_cost_decorrelate

    for seed in range(trials):
        rng = np.random.default_rng(5000 + seed)
        theta = rng.uniform(-np.pi, np.pi, circuit.parameter_count)
        values = rng.normal(size=(4, 3))
        values /= np.linalg.norm(values, axis=0)
        A = rng.normal(size=(4, 4))
        c1 = vmm_cost_decorrelate(circuit, theta, DataMatrix(values=values), A @ A.T)
        c2 = vmm_cost_align(circuit, theta, values, A @ A.T)
        assert 0.0 <= c1 <= 1.0
        assert 0.0 <= c2 <= 1.0

    # deflation eigenvectors stay near-orthogonal before re-orthonormalization
    circuit1 = AnsatzCircuit(qubit_count=1, layer_count=2)
    for seed in range(trials):
        rng = np.random.default_rng(6000 + seed)
        A = rng.normal(size=(2, 2))
        H = A @ A.T
        H /= np.trace(H)
        cfg = DeflationConfig.for_hamiltonian(H, target_count=2, restarts=1)
        S, details = deflation_eigensolve(
            H, circuit1, cfg, opt=OptimizerConfig(seed=seed, max_iterations=800),
            with_details=True,
        )
        raw = details["raw_vectors"]
        assert abs(raw[:, 0] @ raw[:, 1]) ** 2 <= 1e-3
        assert abs(np.sum(S.eigenvalues) - 1.0) <= 1e-2

    # nearest neighbor equals the brute-force oracle
    for seed in range(trials):
        rng = np.random.default_rng(7000 + seed)
        train = DataMatrix(values=rng.normal(size=(3, 12)), labels=rng.integers(0, 3, 12))
        test = DataMatrix(values=rng.normal(size=(3, 6)), labels=rng.integers(0, 3, 6))
        report_ = knn_predict(train, test)
        for i in range(6):
            distances = np.sum((train.values - test.values[:, [i]]) ** 2, axis=0)
            assert report_.predicted[i] == train.labels[int(np.argmin(distances))]

    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    report(9, f"7 invariant suites x {trials} trials, {elapsed:.0f}s")
