"""Experiment harness: dataset generation, pipeline runs, result tables.

Subcommands: gen, run, table, selftest. Configs and results are flat
``key = value`` text with dotted section prefixes; every run echoes its full
config into the result file. Exit codes: 0 success, 2 usage error, 3 data
error, 4 numerical/convergence error.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .classify import knn_predict
from .coral import apply_coral, fit_coral, preprocess
from .datasets import (
    DatasetSpec,
    generate_synthetic,
    load_dataset,
    pad_to_qubits,
    save_csv,
)
from .errors import ConfigurationError, ConvergenceError, DataError, QCoralError
from .linalg import DataMatrix, covariance, next_power_of_two
from .qblas import qblas_coral
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

METHODS = ("na", "coral", "qblas", "vq_e2e", "vq_mm")
SCHEMA_VERSION = 1

_PRESET_SAMPLES = {"iris": 150, "mnist": 2000, "usps": 1800}
_TARGET_SEED_OFFSET = 1000


# --- flat key-value documents ----------------------------------------------


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigurationError(f"{source}:{lineno}: empty key")
        entries[key] = value.strip()
    return entries


def serialize_kv(entries: dict[str, str]) -> str:
    return "\n".join(f"{key} = {entries[key]}" for key in sorted(entries)) + "\n"


# --- experiment configuration ------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    source: DatasetSpec
    target: DatasetSpec
    qubits: int | None = None
    layers: int = 8
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    restarts: int = 3
    phase_bits: int = 10
    deflation_target: int | None = None
    seed: int = 0
    output_path: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.layers < 1:
            raise ConfigurationError("layers must be at least 1")

    @property
    def task(self) -> str:
        return f"{self.source.kind}->{self.target.kind}"


def _dataset_spec_from(entries: dict[str, str], prefix: str, default_seed: int) -> DatasetSpec:
    kind = entries.get(f"{prefix}.kind")
    if kind is None:
        raise ConfigurationError(f"missing {prefix}.kind")
    overrides: dict = {}
    if f"{prefix}.samples" in entries:
        overrides["sample_count"] = int(entries[f"{prefix}.samples"])
    if f"{prefix}.dimension" in entries:
        overrides["dimension"] = int(entries[f"{prefix}.dimension"])
    if f"{prefix}.classes" in entries:
        overrides["class_count"] = int(entries[f"{prefix}.classes"])
    if f"{prefix}.sigma" in entries:
        overrides["sigma"] = float(entries[f"{prefix}.sigma"])
    seed = int(entries.get(f"{prefix}.seed", default_seed))
    path = entries.get(f"{prefix}.path")
    if kind in ("d1", "d2", "d3"):
        return DatasetSpec.preset(kind, seed=seed, **overrides)
    overrides.setdefault("sample_count", _PRESET_SAMPLES.get(kind, 0))
    return DatasetSpec(kind=kind, seed=seed, path=path, **overrides)


def config_from_entries(entries: dict[str, str]) -> ExperimentConfig:
    seed = int(entries.get("seed", 0))
    optimizer = OptimizerConfig(
        learning_rate=float(entries.get("optimizer.learning_rate", 0.1)),
        accumulator_epsilon=float(entries.get("optimizer.epsilon", 1e-8)),
        max_iterations=int(entries.get("optimizer.max_iterations", 2000)),
        convergence_tol=float(entries.get("optimizer.convergence_tol", 1e-8)),
        seed=seed,
    )
    qubits = int(entries["circuit.qubits"]) if "circuit.qubits" in entries else None
    deflation_target = (
        int(entries["deflation.target_count"])
        if "deflation.target_count" in entries
        else None
    )
    return ExperimentConfig(
        method=entries.get("method", ""),
        source=_dataset_spec_from(entries, "source", seed),
        target=_dataset_spec_from(entries, "target", seed + _TARGET_SEED_OFFSET),
        qubits=qubits,
        layers=int(entries.get("circuit.layers", 8)),
        optimizer=optimizer,
        restarts=int(entries.get("restarts", 3)),
        phase_bits=int(entries.get("phase.bits", 10)),
        deflation_target=deflation_target,
        seed=seed,
        output_path=entries.get("out"),
    )


def config_to_entries(config: ExperimentConfig) -> dict[str, str]:
    entries = {
        "method": config.method,
        "seed": str(config.seed),
        "circuit.layers": str(config.layers),
        "restarts": str(config.restarts),
        "phase.bits": str(config.phase_bits),
        "optimizer.learning_rate": format(config.optimizer.learning_rate, "g"),
        "optimizer.epsilon": format(config.optimizer.accumulator_epsilon, "g"),
        "optimizer.max_iterations": str(config.optimizer.max_iterations),
        "optimizer.convergence_tol": format(config.optimizer.convergence_tol, "g"),
    }
    if config.qubits is not None:
        entries["circuit.qubits"] = str(config.qubits)
    if config.deflation_target is not None:
        entries["deflation.target_count"] = str(config.deflation_target)
    if config.output_path is not None:
        entries["out"] = config.output_path
    for prefix, spec in (("source", config.source), ("target", config.target)):
        entries[f"{prefix}.kind"] = spec.kind
        entries[f"{prefix}.seed"] = str(spec.seed)
        if spec.kind in ("d1", "d2", "d3"):
            entries[f"{prefix}.samples"] = str(spec.sample_count)
            entries[f"{prefix}.dimension"] = str(spec.dimension)
            entries[f"{prefix}.classes"] = str(spec.class_count)
            entries[f"{prefix}.sigma"] = format(spec.sigma, "g")
        else:
            if spec.sample_count:
                entries[f"{prefix}.samples"] = str(spec.sample_count)
            if spec.path:
                entries[f"{prefix}.path"] = spec.path
    return entries


# --- running experiments ------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    config: dict[str, str]
    accuracy: float
    cost_trace: np.ndarray | None
    postselection: dict[str, float]
    wall_time: float
    seed: int
    projections: dict[str, tuple[np.ndarray, np.ndarray]]


def _normalized_density(X: DataMatrix) -> DensityMatrix:
    C = covariance(X)
    return DensityMatrix(C / np.trace(C))


def _circuit_for(config: ExperimentConfig, padded_dim: int) -> AnsatzCircuit:
    qubits = padded_dim.bit_length() - 1
    if config.qubits is not None and config.qubits != qubits:
        raise ConfigurationError(
            f"circuit.qubits = {config.qubits} but the padded dimension "
            f"{padded_dim} needs {qubits}"
        )
    return AnsatzCircuit(qubit_count=qubits, layer_count=config.layers)


def run_experiment(config: ExperimentConfig) -> RunResult:
    start = time.perf_counter()
    source = preprocess(load_dataset(config.source))
    target = preprocess(load_dataset(config.target))
    cost_trace = None
    postselection: dict[str, float] = {}

    if config.method == "na":
        aligned, test = source, target
    elif config.method == "coral":
        aligned = apply_coral(fit_coral(source, target), source)
        test = target
    elif config.method == "qblas":
        source_p, test = pad_to_qubits(source), pad_to_qubits(target)
        run = qblas_coral(source_p, test, phase_bits=config.phase_bits)
        aligned = run.aligned
        postselection = {
            "decorrelate": run.decorrelation.success_probability,
            "align": run.alignment.success_probability,
        }
    elif config.method == "vq_e2e":
        source_p, test = pad_to_qubits(source), pad_to_qubits(target)
        circuit = _circuit_for(config, source_p.dimension)
        trace = train_end_to_end(
            circuit,
            _normalized_density(source_p),
            _normalized_density(test),
            config.optimizer,
            restarts=config.restarts,
        )
        aligned = apply_trained_transform(circuit, trace.final_parameters, source_p)
        cost_trace = trace.cost_history
    else:  # vq_mm
        source_p, test = pad_to_qubits(source), pad_to_qubits(target)
        circuit = _circuit_for(config, source_p.dimension)
        rho_s = _normalized_density(source_p)
        rho_t = _normalized_density(test)
        dim = rho_s.dimension
        S_s = deflation_eigensolve(
            rho_s,
            circuit,
            DeflationConfig.for_hamiltonian(rho_s.entries, dim, config.restarts),
            mode="all_eigen",
            opt=config.optimizer,
        )
        if config.deflation_target is not None:
            r = config.deflation_target
        else:
            r = min(S_s.rank, int(np.linalg.matrix_rank(rho_t.entries)))
        S_t = deflation_eigensolve(
            rho_t,
            circuit,
            DeflationConfig.for_hamiltonian(rho_t.entries, int(r), config.restarts),
            mode="top_r_via_eta",
            opt=config.optimizer,
        )
        result = train_vmm(
            source_p,
            square_root_from_eigenpairs(S_s, +1),
            square_root_from_eigenpairs(S_t, +1),
            circuit,
            config.optimizer,
            restarts=config.restarts,
        )
        aligned = result.aligned
        cost_trace = np.concatenate([result.lm1, result.lm2])

    report = knn_predict(aligned, test)
    projections = {
        "source": (aligned.values[:2, :], aligned.labels),
        "target": (test.values[:2, :], test.labels),
    }
    return RunResult(
        config=config_to_entries(config),
        accuracy=report.accuracy,
        cost_trace=cost_trace,
        postselection=postselection,
        wall_time=time.perf_counter() - start,
        seed=config.seed,
        projections=projections,
    )


# --- result files --------------------------------------------------------------


def _format_projection(coords: np.ndarray, labels: np.ndarray | None) -> str:
    n = coords.shape[1]
    labels = labels if labels is not None else np.full(n, -1)
    return ";".join(
        f"{format(coords[0, i], '.8g')}:{format(coords[1, i], '.8g')}:{labels[i]}"
        for i in range(n)
    )


def write_result(result: RunResult, path) -> None:
    entries = {
        "schema_version": str(SCHEMA_VERSION),
        "artifact_version": __version__,
        "accuracy": format(result.accuracy, ".17g"),
        "wall_time": format(result.wall_time, ".6g"),
        "seed": str(result.seed),
    }
    for key, value in result.config.items():
        entries[f"config.{key}"] = value
    if result.cost_trace is not None:
        entries["cost_trace"] = " ".join(format(v, ".12g") for v in result.cost_trace)
    for name, prob in result.postselection.items():
        entries[f"postselect.{name}"] = format(prob, ".12g")
    for name, (coords, labels) in result.projections.items():
        entries[f"projection.{name}"] = _format_projection(coords, labels)
    Path(path).write_text(serialize_kv(entries))


def read_result(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(), source=str(path))


# --- subcommands ----------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = DatasetSpec.preset(
        args.kind,
        seed=args.seed,
        **{
            key: value
            for key, value in (
                ("sample_count", args.samples),
                ("dimension", args.dimension),
                ("class_count", args.classes),
                ("sigma", args.sigma),
            )
            if value is not None
        },
    )
    data = generate_synthetic(spec)
    save_csv(data, args.out)
    print(f"wrote {spec.kind} dataset ({data.dimension}x{data.sample_count}) to {args.out}")
    return 0


def _run_single(config_path: str, seed: int | None, out: str | None) -> tuple[str, float]:
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read config {config_path}: {exc}") from exc
    entries = parse_kv(text, source=config_path)
    if seed is not None:
        entries["seed"] = str(seed)
        entries.pop("source.seed", None)
        entries.pop("target.seed", None)
    config = config_from_entries(entries)
    result = run_experiment(config)
    out_path = out or config.output_path
    if out_path is None:
        stem = Path(config_path).stem
        out_path = str(Path(config_path).with_name(f"{stem}_result.txt"))
    write_result(result, out_path)
    return out_path, result.accuracy


def cmd_run(args) -> int:
    configs = args.config
    if args.jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [
                pool.submit(_run_single, path, args.seed, None) for path in configs
            ]
            for path, future in zip(configs, futures):
                out_path, accuracy = future.result()
                print(f"{path}: accuracy {accuracy:.4f} -> {out_path}")
    else:
        for path in configs:
            out = args.out if len(configs) == 1 else None
            out_path, accuracy = _run_single(path, args.seed, out)
            print(f"{path}: accuracy {accuracy:.4f} -> {out_path}")
    return 0


def cmd_table(args) -> int:
    result_dir = Path(args.results)
    files = sorted(result_dir.glob("*.txt"))
    if not files:
        raise DataError(f"no result files under {result_dir}")
    grid: dict[tuple[str, str], float] = {}
    methods: list[str] = []
    tasks: list[str] = []
    out_dir = Path(args.out).parent if args.out else result_dir
    for path in files:
        try:
            entries = read_result(path)
            method = entries["config.method"]
            task = f"{entries['config.source.kind']}->{entries['config.target.kind']}"
            accuracy = float(entries["accuracy"])
        except (KeyError, ValueError, ConfigurationError) as exc:
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
            continue
        grid[(method, task)] = accuracy
        if method not in methods:
            methods.append(method)
        if task not in tasks:
            tasks.append(task)
        for name in ("source", "target"):
            key = f"projection.{name}"
            if key in entries:
                proj_path = out_dir / f"proj_{method}_{task.replace('->', '_to_')}_{name}.csv"
                _write_projection_csv(entries[key], proj_path)
    if not grid:
        raise DataError(f"no readable results under {result_dir}")
    lines = _format_grid(methods, tasks, grid, args.format)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote table to {args.out}")
    else:
        print(text, end="")
    return 0


def _write_projection_csv(packed: str, path: Path) -> None:
    lines = ["f0,f1,label"]
    for triple in packed.split(";"):
        if triple:
            x, y, label = triple.split(":")
            lines.append(f"{x},{y},{label}")
    path.write_text("\n".join(lines) + "\n")


def _format_grid(methods, tasks, grid, fmt: str) -> list[str]:
    if fmt == "markdown":
        header = "| method | " + " | ".join(tasks) + " |"
        rule = "|" + "---|" * (len(tasks) + 1)
        rows = [header, rule]
        for method in methods:
            cells = [
                f"{grid[(method, task)]:.1%}" if (method, task) in grid else ""
                for task in tasks
            ]
            rows.append(f"| {method} | " + " | ".join(cells) + " |")
        return rows
    rows = ["method," + ",".join(tasks)]
    for method in methods:
        cells = [
            format(grid[(method, task)], ".6g") if (method, task) in grid else ""
            for task in tasks
        ]
        rows.append(method + "," + ",".join(cells))
    return rows


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return run_selftest(verbose=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcoral",
        description="Correlation alignment experiments, classical and simulated-quantum.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    gen.add_argument("--kind", required=True, choices=("d1", "d2", "d3"))
    gen.add_argument("--samples", type=int, default=None)
    gen.add_argument("--dimension", type=int, default=None)
    gen.add_argument("--classes", type=int, default=None)
    gen.add_argument("--sigma", type=float, default=None)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run one or more experiment configs")
    run.add_argument("--config", required=True, nargs="+")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", default=None, help="result path (single config only)")
    run.set_defaults(func=cmd_run)

    table = sub.add_parser("table", help="aggregate results into a method x task grid")
    table.add_argument("--results", required=True)
    table.add_argument("--format", choices=("csv", "markdown"), default="csv")
    table.add_argument("--out", default=None)
    table.set_defaults(func=cmd_table)

    selftest = sub.add_parser("selftest", help="run the oracle-equivalence checks")
    selftest.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConvergenceError, QCoralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
