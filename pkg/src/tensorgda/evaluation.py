"""Classification of projected samples and the two evaluation protocols.

Classification is nearest neighbor under the tensor Frobenius distance in
the projected space; ties go to the lowest gallery index.  Protocols:
seeded random per-class splits ("train-m" style) averaged over trials, and
subject-wise leave-one-out.  Splits depend only on (seed, trial, labels), so
different methods evaluated with the same seed see identical splits.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DatasetError
from .training import (
    GdaModel,
    LabeledTensorSet,
    TrainingConfig,
    train_fisherface,
    train_gda,
    train_hopca,
    train_mda,
    train_pca,
)

METHODS = ("gda", "mda", "hopca", "pca", "fisherface")


def train_method(method: str, data: LabeledTensorSet, config: TrainingConfig) -> GdaModel:
    """Dispatch one of the named methods on a training set."""
    if method == "gda":
        return train_gda(data, config)
    if method == "mda":
        return train_mda(data, config)
    if method == "hopca":
        return train_hopca(data, config)
    if method == "pca":
        return train_pca(data, dims=config.pca_dims)
    if method == "fisherface":
        return train_fisherface(
            data,
            pca_dims=config.fisherface_pca_dims,
            lda_dims=config.fisherface_lda_dims,
            ridge=config.ridge,
        )
    raise ConfigurationError(f"unknown method {method!r}; choose from {METHODS}")


def project(model: GdaModel, x: np.ndarray) -> np.ndarray:
    """Low-dimensional representation of one sample under a trained model."""
    return model.project(x)


def classify(model: GdaModel, x: np.ndarray):
    """Nearest-neighbor label of one sample.

    Returns ``(label, best_index, distance)``; equidistant gallery entries
    resolve to the lowest index.
    """
    if model.gallery.size == 0:
        raise DatasetError("model has an empty gallery")
    z = model.project(x)
    deltas = model.gallery - z[..., None]
    distances = np.sqrt(np.sum(deltas**2, axis=tuple(range(deltas.ndim - 1))))
    best = int(np.argmin(distances))
    return model.gallery_labels[best], best, float(distances[best])


@dataclass
class ExperimentReport:
    """Results of one evaluation run.

    ``trial_accuracies`` holds one entry per trial (split protocol) or per
    held-out subject (leave-one-out).  ``mean_accuracy`` is the headline
    figure: the trial mean for splits, the per-sample (micro) accuracy for
    leave-one-out, where ``macro_accuracy`` additionally averages the
    per-subject accuracies.  The confusion matrix aggregates all trials;
    its rows (true classes, sorted) sum to ``test_counts``.  ``timings``
    holds wall-clock seconds per stage and is excluded from the canonical
    serialization so that report files are byte-reproducible.
    """

    protocol: str
    method: str
    seed: int
    classes: tuple
    trial_accuracies: tuple
    mean_accuracy: float
    macro_accuracy: float | None
    confusion: np.ndarray
    test_counts: tuple
    per_trial_dims: tuple
    compression_fractions: tuple
    objective_traces: tuple
    train_per_class: int | None = None
    timings: dict = field(default_factory=dict, compare=False)


def _count_correct(model: GdaModel, test: LabeledTensorSet, classes, confusion) -> int:
    class_index = {c: i for i, c in enumerate(classes)}
    correct = 0
    for i in range(test.n_samples):
        predicted, _, _ = classify(model, test.samples[..., i])
        truth = test.labels[i]
        confusion[class_index[truth], class_index[predicted]] += 1
        if predicted == truth:
            correct += 1
    return correct


def _compression_fraction(model: GdaModel, n_train: int) -> float:
    # storage of the projected gallery plus the projectors, relative to raw
    if model.vectorized:
        length = int(np.prod(model.sample_shape))
        p = model.combined[0].shape[1]
        return (n_train * p + length * p) / (n_train * length)
    dims = model.projected_shape
    extents = model.sample_shape
    compressed = n_train * int(np.prod(dims)) + sum(
        e * d for e, d in zip(extents, dims)
    )
    return compressed / (n_train * int(np.prod(extents)))


def split_indices(data: LabeledTensorSet, train_per_class: int, seed: int, trial: int):
    """Seeded per-class split; returns (train, test) index arrays.

    Depends only on the labels, seed, and trial number, never on the method
    under evaluation, so method sweeps share identical splits.
    """
    rng = np.random.default_rng([seed, trial])
    train, test = [], []
    for c in data.classes:
        members = np.flatnonzero(data.labels == c)
        if len(members) <= train_per_class:
            raise ConfigurationError(
                f"class {c} has {len(members)} samples; "
                f"need more than {train_per_class}"
            )
        chosen = rng.permutation(members)
        train.extend(sorted(chosen[:train_per_class]))
        test.extend(sorted(chosen[train_per_class:]))
    return np.array(sorted(train)), np.array(sorted(test))


def evaluate_split(
    data: LabeledTensorSet,
    method: str,
    config: TrainingConfig,
    train_per_class: int,
    trials: int = 10,
    seed: int = 0,
) -> ExperimentReport:
    """Random per-class splits, averaged over ``trials`` seeded repetitions."""
    if trials < 1:
        raise ConfigurationError("trials must be at least 1")
    classes = tuple(data.classes.tolist())
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    accuracies = []
    dims_per_trial = []
    fractions = []
    traces = []
    timings = {"train_s": 0.0, "classify_s": 0.0}
    for trial in range(trials):
        train_idx, test_idx = split_indices(data, train_per_class, seed, trial)
        train_set = data.subset(train_idx)
        test_set = data.subset(test_idx)
        t0 = time.perf_counter()
        model = train_method(method, train_set, config)
        timings["train_s"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        correct = _count_correct(model, test_set, classes, confusion)
        timings["classify_s"] += time.perf_counter() - t0
        accuracies.append(100.0 * correct / test_set.n_samples)
        dims_per_trial.append(model.projected_shape)
        fractions.append(_compression_fraction(model, train_set.n_samples))
        traces.append(model.objective_trace)
    test_counts = tuple(int(x) for x in confusion.sum(axis=1))
    return ExperimentReport(
        protocol="split",
        method=method,
        seed=seed,
        classes=classes,
        trial_accuracies=tuple(accuracies),
        mean_accuracy=float(np.mean(accuracies)),
        macro_accuracy=None,
        confusion=confusion,
        test_counts=test_counts,
        per_trial_dims=tuple(dims_per_trial),
        compression_fractions=tuple(fractions),
        objective_traces=tuple(traces),
        train_per_class=train_per_class,
        timings=timings,
    )


def evaluate_loo(
    data: LabeledTensorSet, method: str, config: TrainingConfig, seed: int = 0
) -> ExperimentReport:
    """Subject-wise leave-one-out: one fold per subject, training on all
    other subjects' samples."""
    if data.subjects is None:
        raise DatasetError("leave-one-out needs subject annotations")
    subjects = np.unique(data.subjects)
    if len(subjects) < 2:
        raise DatasetError("leave-one-out needs at least 2 subjects")
    classes = tuple(data.classes.tolist())
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    fold_accuracies = []
    dims_per_fold = []
    fractions = []
    traces = []
    total_correct = 0
    total_seen = 0
    timings = {"train_s": 0.0, "classify_s": 0.0}
    for held_out in subjects:
        train_idx = np.flatnonzero(data.subjects != held_out)
        test_idx = np.flatnonzero(data.subjects == held_out)
        train_set = data.subset(train_idx)
        test_set = data.subset(test_idx)
        assert held_out not in set(train_set.subjects.tolist())
        t0 = time.perf_counter()
        model = train_method(method, train_set, config)
        timings["train_s"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        correct = _count_correct(model, test_set, classes, confusion)
        timings["classify_s"] += time.perf_counter() - t0
        fold_accuracies.append(100.0 * correct / test_set.n_samples)
        total_correct += correct
        total_seen += test_set.n_samples
        dims_per_fold.append(model.projected_shape)
        fractions.append(_compression_fraction(model, train_set.n_samples))
        traces.append(model.objective_trace)
    test_counts = tuple(int(x) for x in confusion.sum(axis=1))
    return ExperimentReport(
        protocol="loo",
        method=method,
        seed=seed,
        classes=classes,
        trial_accuracies=tuple(fold_accuracies),
        mean_accuracy=100.0 * total_correct / total_seen,
        macro_accuracy=float(np.mean(fold_accuracies)),
        confusion=confusion,
        test_counts=test_counts,
        per_trial_dims=tuple(dims_per_fold),
        compression_fractions=tuple(fractions),
        objective_traces=tuple(traces),
        timings=timings,
    )


def export_projection_2d(model: GdaModel, data: LabeledTensorSet, plane: str = "pair"):
    """Project every sample onto a 2D plane for visualization.

    Planes for order-2 data under multilinear models: ``"1x2"`` uses the
    first left direction against the first two right directions,
    ``"2x1"`` the first two left directions against the first right one.
    ``"pair"`` takes the first two entries of the projected representation
    (column-major) and works for any model with at least two projected
    coordinates.  Returns a list of ``(x, y, label)`` rows in sample order.
    """
    if plane in ("1x2", "2x1"):
        if model.vectorized or len(model.combined) != 2:
            raise ConfigurationError(
                f"plane {plane!r} needs a multilinear model over order-2 data"
            )
        left, right = model.combined
        need_left, need_right = (1, 2) if plane == "1x2" else (2, 1)
        if left.shape[1] < need_left or right.shape[1] < need_right:
            raise ConfigurationError(
                f"plane {plane!r} needs at least {need_left}x{need_right} "
                f"projected dims, model has {left.shape[1]}x{right.shape[1]}"
            )
        u = left[:, :need_left]
        v = right[:, :need_right]
        rows = []
        for i in range(data.n_samples):
            z = (u.T @ data.samples[..., i] @ v).ravel(order="F")
            rows.append((float(z[0]), float(z[1]), data.labels[i]))
        return rows
    if plane == "pair":
        rows = []
        for i in range(data.n_samples):
            z = model.project(data.samples[..., i]).ravel(order="F")
            if z.size < 2:
                raise ConfigurationError(
                    "plane 'pair' needs at least 2 projected coordinates"
                )
            rows.append((float(z[0]), float(z[1]), data.labels[i]))
        return rows
    raise ConfigurationError(f"unknown plane {plane!r}; choose 1x2, 2x1 or pair")


def write_projection_csv(rows, path, delimiter: str = ",") -> None:
    """Write 2D projection rows as delimited text with a header."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(delimiter.join(("x", "y", "label")) + "\n")
        for x, y, label in rows:
            handle.write(delimiter.join((repr(x), repr(y), str(label))) + "\n")
