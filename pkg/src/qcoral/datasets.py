"""Dataset generation and ingestion.

Synthetic kinds d1/d2/d3 draw isotropic Gaussian blobs around class-mean
lobes placed on unit-lattice offsets; each class occupies the +- pair of
lobes of its own axis so that class identity is a direction-free (sign
symmetric) property, and the axis frames differ per kind so that the kinds
genuinely live in shifted domains. Outputs are preprocessed (zero mean,
unit columns) and deterministic per seed.

File formats: CSV with header f0..fD-1,label (one row per sample), MNIST
IDX image/label pairs, and whitespace-delimited label+256-feature USPS
text. Relative paths resolve against the QCORAL_DATA_DIR environment
variable.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .coral import preprocess
from .errors import ConfigurationError, DataError
from .linalg import DataMatrix, next_power_of_two

_SYNTHETIC_KINDS = ("d1", "d2", "d3")
_KINDS = _SYNTHETIC_KINDS + ("iris", "mnist", "usps", "csv")

# Per-kind class-mean lobes (integer-lattice vectors). Axes within a kind
# are mutually orthogonal with distinct norms so covariance eigenvalues rank
# the classes consistently; axes across kinds point elsewhere, which is the
# domain shift. The +-3 magnitude keeps the classes statistically separable
# against the sigma=2 noise floor after unit normalization.
_CLASS_AXES = {
    "d1": ((3, 3, 3, 3), (3, -3, 0, 0)),
    "d2": ((3, 3, -3, -3), (0, 0, 3, -3)),
    "d3": ((3, 3, 0, 3), (0, 1, -2, -1), (0, 2, 2, -2)),
}

_PRESETS = {
    "d1": dict(sample_count=100, dimension=4, class_count=2, sigma=1.0),
    "d2": dict(sample_count=100, dimension=4, class_count=2, sigma=2.0),
    "d3": dict(sample_count=150, dimension=4, class_count=3, sigma=1.0),
}


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    sample_count: int = 0
    dimension: int = 4
    class_count: int = 2
    sigma: float = 1.0
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown dataset kind {self.kind!r}")
        if self.dimension < 1:
            raise ConfigurationError("dimension must be at least 1")
        if self.kind in _SYNTHETIC_KINDS:
            if self.sample_count < 2:
                raise ConfigurationError("synthetic datasets need at least 2 samples")
            if self.sample_count % self.class_count != 0:
                raise ConfigurationError(
                    "sample_count must be divisible by class_count"
                )

    @classmethod
    def preset(cls, kind: str, seed: int = 0, **overrides) -> "DatasetSpec":
        if kind not in _PRESETS:
            raise ConfigurationError(f"no preset for kind {kind!r}")
        fields = dict(_PRESETS[kind])
        fields.update(overrides)
        return cls(kind=kind, seed=seed, **fields)


def generate_synthetic(spec: DatasetSpec) -> DataMatrix:
    """Seeded Gaussian class blobs, preprocessed, labels attached.

    Within a class, samples alternate deterministically between the +axis
    and -axis lobes, keeping the lobes exactly balanced.
    """
    if spec.kind not in _SYNTHETIC_KINDS:
        raise ConfigurationError(f"{spec.kind!r} is not a synthetic kind")
    axes = _CLASS_AXES[spec.kind]
    if spec.class_count != len(axes):
        raise ConfigurationError(
            f"kind {spec.kind!r} defines {len(axes)} classes, got {spec.class_count}"
        )
    if spec.dimension != 4:
        raise ConfigurationError("synthetic kinds are defined on 4 features")
    rng = np.random.default_rng(spec.seed)
    per_class = spec.sample_count // spec.class_count
    columns = []
    labels = []
    for c, axis in enumerate(axes):
        axis = np.asarray(axis, dtype=float)
        noise = rng.normal(0.0, spec.sigma, size=(spec.dimension, per_class))
        signs = np.where(np.arange(per_class) % 2 == 0, 1.0, -1.0)
        columns.append(axis[:, None] * signs[None, :] + noise)
        labels.extend([c] * per_class)
    raw = DataMatrix(values=np.hstack(columns), labels=np.array(labels))
    return preprocess(raw)


# --- CSV ------------------------------------------------------------------


def save_csv(X: DataMatrix, path) -> None:
    """Write samples as rows with a trailing integer label column."""
    D = X.dimension
    header = ",".join([f"f{j}" for j in range(D)] + ["label"])
    labels = X.labels if X.labels is not None else np.full(X.sample_count, -1)
    lines = [header]
    for i in range(X.sample_count):
        feats = ",".join(format(v, ".17g") for v in X.values[:, i])
        lines.append(f"{feats},{labels[i]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path) -> DataMatrix:
    """Read a dataset written by save_csv; the label column is optional."""
    path = resolve_data_path(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in lines[0].split(",")]
    labelled = header[-1] == "label"
    D = len(header) - 1 if labelled else len(header)
    if D < 1:
        raise DataError(f"{path}: header declares no features")
    values = np.empty((D, len(lines) - 1))
    labels = np.empty(len(lines) - 1, dtype=int) if labelled else None
    for row, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}:{row}: expected {len(header)} fields")
        try:
            values[:, row - 2] = [float(p) for p in parts[:D]]
            if labelled:
                labels[row - 2] = int(float(parts[-1]))
        except ValueError as exc:
            raise DataError(f"{path}:{row}: {exc}") from exc
    if labelled and np.all(labels == -1):
        labels = None
    return DataMatrix(values=values, labels=labels)


def load_iris(path=None) -> DataMatrix:
    """The 4 x 150 Iris table with labels 0/1/2, 50 samples each.

    Defaults to the copy bundled with the package.
    """
    if path is None:
        with resources.as_file(
            resources.files("qcoral").joinpath("data/iris.csv")
        ) as bundled:
            X = load_csv(bundled)
    else:
        X = load_csv(path)
    if X.values.shape != (4, 150):
        raise DataError(f"iris table must be 4 x 150, got {X.values.shape}")
    if X.labels is None:
        raise DataError("iris table is missing labels")
    counts = np.bincount(X.labels, minlength=3)
    if not np.array_equal(counts, [50, 50, 50]):
        raise DataError(f"iris classes must be 50/50/50, got {counts.tolist()}")
    return X


# --- handwritten digits ----------------------------------------------------

_MNIST_IMAGE_NAMES = ("train-images-idx3-ubyte", "train-images.idx3-ubyte")
_MNIST_LABEL_NAMES = ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte")
_USPS_NAMES = ("usps.txt", "usps.train", "zip.train")


def resolve_data_path(path) -> Path:
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    root = os.environ.get("QCORAL_DATA_DIR")
    return Path(root) / path if root else path


def _find_file(directory: Path, candidates) -> Path:
    for name in candidates:
        candidate = directory / name
        if candidate.exists():
            return candidate
    raise DataError(f"none of {candidates} found under {directory}")


def _read_idx_images(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < 16:
        raise DataError(f"{path}: truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != 2051:
        raise DataError(f"{path}: IDX image magic mismatch ({magic})")
    expected = 16 + count * rows * cols
    if len(data) < expected:
        raise DataError(f"{path}: truncated IDX payload")
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols).astype(float) / 255.0


def _read_idx_labels(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < 8:
        raise DataError(f"{path}: truncated IDX header")
    magic, count = struct.unpack(">II", data[:8])
    if magic != 2049:
        raise DataError(f"{path}: IDX label magic mismatch ({magic})")
    if len(data) < 8 + count:
        raise DataError(f"{path}: truncated IDX payload")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(int)


def _read_usps_text(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        table = np.loadtxt(path)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: cannot parse USPS text: {exc}") from exc
    if table.ndim != 2 or table.shape[1] != 257:
        raise DataError(
            f"{path}: expected label + 256 features per line, got shape {table.shape}"
        )
    labels = table[:, 0].astype(int)
    features = table[:, 1:]
    if features.min() < 0:  # the common [-1, 1] distribution convention
        features = (features + 1.0) / 2.0
    images = features.reshape(-1, 16, 16)
    return images, labels


def bilinear_resize(image: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Linear rescale of a 2-D gray image."""
    in_h, in_w = image.shape
    out_h, out_w = out_shape
    if (in_h, in_w) == (out_h, out_w):
        return image.copy()
    ys = np.linspace(0.0, in_h - 1.0, out_h)
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = (1 - wx) * image[np.ix_(y0, x0)] + wx * image[np.ix_(y0, x1)]
    bottom = (1 - wx) * image[np.ix_(y1, x0)] + wx * image[np.ix_(y1, x1)]
    return (1 - wy) * top + wy * bottom


def load_digits(kind: str, path, count: int) -> DataMatrix:
    """MNIST or USPS digits rescaled to 16 x 16 and flattened to 256-vectors.

    Selection is class balanced: the first count/10 samples of each digit in
    file order, assembled in label order.
    """
    if kind not in ("mnist", "usps"):
        raise ConfigurationError(f"unknown digits kind {kind!r}")
    if count < 10 or count % 10 != 0:
        raise DataError("count must be a positive multiple of 10")
    root = resolve_data_path(path)
    if kind == "mnist":
        if root.is_dir():
            image_path = _find_file(root, _MNIST_IMAGE_NAMES)
            label_path = _find_file(root, _MNIST_LABEL_NAMES)
        else:
            raise DataError(f"{root} is not a directory of MNIST IDX files")
        images = _read_idx_images(image_path)
        labels = _read_idx_labels(label_path)
    else:
        source = _find_file(root, _USPS_NAMES) if root.is_dir() else root
        images, labels = _read_usps_text(source)
    if images.shape[0] != labels.shape[0]:
        raise DataError("image and label counts differ")
    per_class = count // 10
    chosen = []
    for digit in range(10):
        indices = np.nonzero(labels == digit)[0][:per_class]
        if indices.size < per_class:
            raise DataError(
                f"class {digit} has only {indices.size} samples, need {per_class}"
            )
        chosen.extend(indices.tolist())
    vectors = np.empty((256, count))
    for out_col, idx in enumerate(chosen):
        vectors[:, out_col] = bilinear_resize(images[idx], (16, 16)).reshape(-1)
    return DataMatrix(values=vectors, labels=labels[np.array(chosen)])


def pad_to_qubits(X: DataMatrix) -> DataMatrix:
    """Append zero rows up to the next power of two; records the original
    feature count."""
    D = X.dimension
    target = next_power_of_two(D)
    original = X.original_dimension if X.original_dimension is not None else D
    if target == D:
        return DataMatrix(
            values=X.values,
            labels=X.labels,
            column_norms=X.column_norms,
            original_dimension=original,
        )
    padded = np.zeros((target, X.sample_count))
    padded[:D, :] = X.values
    return DataMatrix(
        values=padded,
        labels=X.labels,
        column_norms=X.column_norms,
        original_dimension=original,
    )


def load_dataset(spec: DatasetSpec) -> DataMatrix:
    """Materialize any DatasetSpec."""
    if spec.kind in _SYNTHETIC_KINDS:
        return generate_synthetic(spec)
    if spec.kind == "iris":
        return load_iris(spec.path)
    if spec.kind in ("mnist", "usps"):
        if spec.path is None:
            raise DataError(f"{spec.kind} requires a path")
        return load_digits(spec.kind, spec.path, spec.sample_count)
    if spec.path is None:
        raise DataError("csv datasets require a path")
    return load_csv(spec.path)
