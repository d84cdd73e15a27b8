"""Dataset manifests, stratified splits, the training loop, and metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from birdsong import nn


class ManifestError(ValueError):
    """Manifest CSV is structurally invalid."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class DatasetManifest:
    entries: list[tuple[str, str]]  # (path, label)
    labels: tuple[str, ...]  # unique labels in first-appearance order

    def __len__(self) -> int:
        return len(self.entries)

    def label_index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 32
    test_fraction: float = 0.10
    seed: int = 0
    shuffle: bool = True
    learning_rate: float = 0.001

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")


@dataclass
class TrainingHistory:
    train_loss: list[float]
    train_accuracy: list[float]
    val_loss: list[float]
    val_accuracy: list[float]

    def __len__(self) -> int:
        return len(self.train_loss)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (n_classes, n_classes), rows true, columns predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class ClassMetrics:
    label: str
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    degenerate: bool


@dataclass
class MetricsReport:
    per_class: list[ClassMetrics]
    accuracy: float


def load_manifest(path) -> DatasetManifest:
    """Read a `path,label` CSV into a validated manifest."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("manifest is empty, expected a path,label header")
        if [c.strip() for c in header] != ["path", "label"]:
            raise ManifestError(f"expected header 'path,label', got {','.join(header)!r}")
        entries: list[tuple[str, str]] = []
        labels: list[str] = []
        seen: set[str] = set()
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ManifestError(f"row {row_no}: expected 2 fields, got {len(row)}")
            clip_path, label = row[0].strip(), row[1].strip()
            if not clip_path:
                raise ManifestError(f"row {row_no}: empty path")
            if not label:
                raise ManifestError(f"row {row_no}: empty label")
            if clip_path in seen:
                raise ManifestError(f"duplicate path {clip_path!r}")
            seen.add(clip_path)
            entries.append((clip_path, label))
            if label not in labels:
                labels.append(label)
    return DatasetManifest(entries=entries, labels=tuple(labels))


def stratified_split_indices(
    label_indices, n_classes: int, test_fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split: test takes max(1, floor(fraction * n_c)) of each class.

    Deterministic for a given seed; every class must hold at least 2 items
    so both sides stay populated.
    """
    y = np.asarray(label_indices)
    rng = np.random.default_rng(seed)
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for c in range(n_classes):
        idx = np.flatnonzero(y == c)
        if len(idx) < 2:
            raise ValueError(f"class {c} has {len(idx)} entries, need at least 2")
        shuffled = idx[rng.permutation(len(idx))]
        n_test = max(1, int(test_fraction * len(idx)))
        test_parts.append(shuffled[:n_test])
        train_parts.append(shuffled[n_test:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return train_idx, test_idx


def split_dataset(
    manifest: DatasetManifest, config: TrainingConfig
) -> tuple[DatasetManifest, DatasetManifest]:
    """Stratified train/test split of a manifest."""
    y = [manifest.label_index(label) for _, label in manifest.entries]
    train_idx, test_idx = stratified_split_indices(
        y, len(manifest.labels), config.test_fraction, config.seed
    )
    train = DatasetManifest(
        entries=[manifest.entries[i] for i in train_idx], labels=manifest.labels
    )
    test = DatasetManifest(
        entries=[manifest.entries[i] for i in test_idx], labels=manifest.labels
    )
    return train, test


def one_hot(labels, n_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def evaluate_model(net: nn.Network, features: np.ndarray, labels) -> tuple[float, float]:
    """Mean cross-entropy loss and accuracy in inference mode."""
    y = np.asarray(labels, dtype=np.int64)
    probs = nn.forward(net, features, mode="infer")
    loss = nn.cross_entropy(probs, one_hot(y, probs.shape[1]))
    accuracy = float((probs.argmax(axis=1) == y).mean())
    return loss, accuracy


def train(
    net: nn.Network,
    train_features: np.ndarray,
    train_labels,
    val_features: np.ndarray,
    val_labels,
    config: TrainingConfig | None = None,
) -> tuple[nn.Network, TrainingHistory]:
    """Mini-batch training with Adam; records one history row per epoch.

    Shuffling and dropout draw from a single generator seeded from the
    config, so a fixed seed reproduces the exact parameter trajectory.
    """
    if config is None:
        config = TrainingConfig()
    x_train = np.asarray(train_features, dtype=np.float64)
    y_train = np.asarray(train_labels, dtype=np.int64)
    x_val = np.asarray(val_features, dtype=np.float64)
    y_val = np.asarray(val_labels, dtype=np.int64)
    if x_train.shape[1] != net.config.layer_sizes[0]:
        raise ValueError(
            f"feature width {x_train.shape[1]} does not match model input "
            f"{net.config.layer_sizes[0]}"
        )
    n_classes = net.config.layer_sizes[-1]
    targets = one_hot(y_train, n_classes)

    rng = np.random.default_rng(config.seed)
    params = nn.network_params(net)
    state = nn.AdamState.for_params(params, learning_rate=config.learning_rate)
    history = TrainingHistory([], [], [], [])

    n = len(x_train)
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            probs, cache = nn.forward(net, x_train[batch], mode="train", rng=rng)
            loss = nn.cross_entropy(probs, targets[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, batch {start // config.batch_size}"
                )
            grads = nn.backward(net, cache, targets[batch])
            nn.adam_step(state, params, nn.flatten_grads(grads))
            loss_sum += loss * len(batch)
            correct += int((probs.argmax(axis=1) == y_train[batch]).sum())
        val_loss, val_acc = evaluate_model(net, x_val, y_val)
        history.train_loss.append(loss_sum / n)
        history.train_accuracy.append(correct / n)
        history.val_loss.append(val_loss)
        history.val_accuracy.append(val_acc)
    return net, history


def confusion_matrix(predicted, true, n_classes: int) -> ConfusionMatrix:
    """Count matrix with rows indexed by true class, columns by prediction."""
    p = np.asarray(predicted, dtype=np.int64)
    t = np.asarray(true, dtype=np.int64)
    if p.shape != t.shape:
        raise ValueError("predicted and true label sequences differ in length")
    if len(p) and (p.min() < 0 or t.min() < 0 or p.max() >= n_classes or t.max() >= n_classes):
        raise ValueError(f"label out of range for {n_classes} classes")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts=counts)


def _ratio(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def compute_metrics(cm: ConfusionMatrix, labels=None) -> MetricsReport:
    """One-vs-rest sensitivity, specificity, precision, and F1 per class.

    Ratios with a zero denominator report 0 and set the class's
    degenerate flag instead of producing NaN.
    """
    counts = cm.counts
    total = int(counts.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    n = counts.shape[0]
    if labels is None:
        labels = [f"class_{i}" for i in range(n)]
    per_class: list[ClassMetrics] = []
    for c in range(n):
        tp = int(counts[c, c])
        fn = int(counts[c].sum()) - tp
        fp = int(counts[:, c].sum()) - tp
        tn = total - tp - fn - fp
        sensitivity, d1 = _ratio(tp, tp + fn)
        specificity, d2 = _ratio(tn, tn + fp)
        precision, d3 = _ratio(tp, tp + fp)
        f1, d4 = _ratio(2.0 * precision * sensitivity, precision + sensitivity)
        per_class.append(
            ClassMetrics(
                label=str(labels[c]),
                sensitivity=sensitivity,
                specificity=specificity,
                precision=precision,
                f1=f1,
                degenerate=d1 or d2 or d3 or d4,
            )
        )
    accuracy = float(np.trace(counts)) / total
    return MetricsReport(per_class=per_class, accuracy=accuracy)


def metrics_to_dict(report: MetricsReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "per_class": [
            {
                "label": m.label,
                "sensitivity": m.sensitivity,
                "specificity": m.specificity,
                "precision": m.precision,
                "f1": m.f1,
                "degenerate": m.degenerate,
            }
            for m in report.per_class
        ],
    }


def metrics_to_json(report: MetricsReport) -> str:
    return json.dumps(metrics_to_dict(report), indent=2)


def render_metrics_table(report: MetricsReport) -> str:
    """Fixed-width table of the per-class metrics plus overall accuracy."""
    width = max([len("label")] + [len(m.label) for m in report.per_class])
    header = f"{'label':<{width}}  sensitivity  specificity  precision  f1"
    lines = [header, "-" * len(header)]
    for m in report.per_class:
        flag = " *" if m.degenerate else ""
        lines.append(
            f"{m.label:<{width}}  {m.sensitivity:>11.4f}  {m.specificity:>11.4f}"
            f"  {m.precision:>9.4f}  {m.f1:.4f}{flag}"
        )
    lines.append(f"accuracy: {report.accuracy:.4f}")
    if any(m.degenerate for m in report.per_class):
        lines.append("* zero-denominator ratios reported as 0")
    return "\n".join(lines)


def export_history(history: TrainingHistory, out_dir, stem: str = "history") -> tuple[Path, Path]:
    """Write per-epoch metrics as CSV and a two-panel line plot PNG."""
    if len(history) == 0:
        raise ValueError("empty training history")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    png_path = out_dir / f"{stem}.png"

    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "train_acc", "val_acc"])
        for i in range(len(history)):
            writer.writerow(
                [
                    i + 1,
                    repr(history.train_loss[i]),
                    repr(history.val_loss[i]),
                    repr(history.train_accuracy[i]),
                    repr(history.val_accuracy[i]),
                ]
            )

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = np.arange(1, len(history) + 1)
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    ax_loss.plot(epochs, history.train_loss, label="train")
    ax_loss.plot(epochs, history.val_loss, label="validation")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_acc.plot(epochs, history.train_accuracy, label="train")
    ax_acc.plot(epochs, history.val_accuracy, label="validation")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend()
    fig.tight_layout()
    fig.savefig(png_path)
    plt.close(fig)
    return csv_path, png_path
