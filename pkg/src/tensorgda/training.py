"""Discriminant training for labeled tensor sets.

The full pipeline stacks the samples into an (N+1)-order tensor, reduces
each data mode with an energy-thresholded HOSVD (the sample mode is exempt),
then alternates per-mode eigen updates of discriminant factors U_k that
maximize the ratio of between-class to within-class scatter of the core
tensors.  The served projectors are the per-mode products V_k @ U_k.

Variants: ``train_mda`` skips the HOSVD stage (identity V_k), ``train_hopca``
skips the discriminant stage (truncated-identity U_k), and ``train_pca`` /
``train_fisherface`` are the classical vectorizing baselines.

Everything here is deterministic: identical data and config produce
bit-identical models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .errors import ConfigurationError, DatasetError, DimensionError, SingularityError
from .hosvd import GRAM_CROSSOVER, hosvd
from .linalg import ratio_trace_eig, svd


class LabeledTensorSet:
    """Same-shape tensor samples with integer class labels.

    Samples are stacked along the last axis of ``samples`` (shape
    ``sample_shape + (m,)``); ``subjects`` optionally tags each sample with
    an acquisition subject for leave-one-out protocols.
    """

    def __init__(self, samples: np.ndarray, labels, subjects=None):
        samples = np.asarray(samples, dtype=np.float64)
        labels = np.asarray(labels)
        if samples.ndim < 2:
            raise DimensionError("samples array must be sample_shape + (m,)")
        if labels.ndim != 1 or labels.shape[0] != samples.shape[-1]:
            raise DimensionError(
                f"{samples.shape[-1]} samples but {labels.shape} labels"
            )
        if samples.shape[-1] == 0:
            raise DatasetError("empty sample set")
        if subjects is not None:
            subjects = np.asarray(subjects)
            if subjects.shape != labels.shape:
                raise DimensionError("subjects must align with labels")
        self.samples = samples
        self.labels = labels
        self.subjects = subjects

    @classmethod
    def from_samples(cls, samples, labels, subjects=None) -> "LabeledTensorSet":
        """Stack a list of same-shape tensors into a set."""
        arrays = [np.asarray(s, dtype=np.float64) for s in samples]
        if not arrays:
            raise DatasetError("empty sample set")
        shape = arrays[0].shape
        for i, a in enumerate(arrays):
            if a.shape != shape:
                raise DimensionError(
                    f"sample {i} has shape {a.shape}, expected {shape}"
                )
        return cls(np.stack(arrays, axis=-1), labels, subjects)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[-1]

    @property
    def sample_shape(self) -> tuple:
        return self.samples.shape[:-1]

    @property
    def order(self) -> int:
        return self.samples.ndim - 1

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_counts(self) -> np.ndarray:
        """Sample count per class, aligned with ``classes``."""
        return np.array(
            [int(np.sum(self.labels == c)) for c in self.classes]
        )

    def sample(self, i: int) -> np.ndarray:
        return self.samples[..., i]

    def subset(self, indices) -> "LabeledTensorSet":
        indices = np.asarray(indices, dtype=int)
        return LabeledTensorSet(
            self.samples[..., indices],
            self.labels[indices],
            None if self.subjects is None else self.subjects[indices],
        )


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs for the multilinear trainers and the vectorizing baselines.

    ``target_dims`` defaults per mode to ``min(J_k, C - 1)`` where ``J_k``
    is the post-HOSVD extent.  ``theta`` drives HOSVD rank selection unless
    explicit ``hosvd_ranks`` are given.  Convergence is declared when the
    largest per-mode change of the projection operator ``U @ U.T`` drops
    below ``conv_tol`` (Frobenius norm).
    """

    target_dims: tuple | None = None
    theta: float = 0.98
    hosvd_ranks: tuple | None = None
    max_iters: int = 10
    conv_tol: float = 1e-6
    ridge: float = 1e-6
    seed: int = 0
    gram_crossover: int = GRAM_CROSSOVER
    pca_dims: int | None = None
    fisherface_pca_dims: int | None = None
    fisherface_lda_dims: int | None = None

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ConfigurationError(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")
        if self.conv_tol < 0 or self.ridge < 0:
            raise ConfigurationError("conv_tol and ridge must be nonnegative")


@dataclass(frozen=True)
class ScatterPair:
    """Between-class and within-class scatter along one mode."""

    s_b: np.ndarray
    s_w: np.ndarray


@dataclass
class GdaModel:
    """A trained projector set plus the projected training gallery.

    For multilinear kinds (gda/mda/hopca) ``combined[k] = hosvd_factors[k]
    @ disc_factors[k]``; for vectorized kinds (pca/fisherface) ``combined``
    holds a single matrix applied to mean-centered vectorized samples.
    ``stage_seconds`` carries wall-clock stage timings and is never
    serialized.
    """

    kind: str
    sample_shape: tuple
    combined: list
    gallery: np.ndarray
    gallery_labels: np.ndarray
    vectorized: bool = False
    hosvd_factors: list | None = None
    disc_factors: list | None = None
    mean_vector: np.ndarray | None = None
    hosvd_ranks: tuple | None = None
    mode_energy: tuple | None = None
    objective_trace: tuple = ()
    subspace_change_trace: tuple = ()
    config: TrainingConfig | None = None
    warnings: tuple = ()
    stage_seconds: dict = field(default_factory=dict, compare=False)

    @property
    def projected_shape(self) -> tuple:
        if self.vectorized:
            return (self.combined[0].shape[1],)
        return tuple(p.shape[1] for p in self.combined)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Low-dimensional representation of one sample."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.sample_shape:
            raise DimensionError(
                f"sample shape {x.shape} does not match training shape "
                f"{self.sample_shape}"
            )
        if self.vectorized:
            vec = x.ravel(order="F")
            if self.mean_vector is not None:
                vec = vec - self.mean_vector
            return self.combined[0].T @ vec
        return tensor.multi_mode_product(
            x, [(p.T, k) for k, p in enumerate(self.combined)]
        )


def class_means(data: LabeledTensorSet):
    """Per-class mean tensors (ordered by sorted class label) and the
    global mean."""
    means = [
        np.mean(data.samples[..., data.labels == c], axis=-1)
        for c in data.classes
    ]
    return means, np.mean(data.samples, axis=-1)


def scatter_matrices(
    data: LabeledTensorSet, projectors, mode: int, means=None
) -> ScatterPair:
    """Between/within scatter along ``mode`` under the other modes'
    projectors.

    ``projectors`` lists one matrix per mode; the entry at ``mode`` is
    ignored.  Each centered tensor is projected along every other mode
    first, then its mode-``mode`` unfolding contributes an outer product.
    This equals the textbook form that sandwiches the Kronecker product of
    the other projectors, without ever materializing it.
    """
    n = data.order
    if not 0 <= mode < n:
        raise DimensionError(f"mode {mode} invalid for order-{n} data")
    for j in range(n):
        if j != mode and projectors[j].shape[0] != data.sample_shape[j]:
            raise DimensionError(
                f"projector for mode {j} has {projectors[j].shape[0]} rows, "
                f"expected {data.sample_shape[j]}"
            )
    if means is None:
        means = class_means(data)
    per_class, global_mean = means
    others = [(projectors[j].T, j) for j in range(n) if j != mode]

    size = data.sample_shape[mode]
    s_b = np.zeros((size, size))
    s_w = np.zeros((size, size))
    counts = data.class_counts()
    for idx, c in enumerate(data.classes):
        centered = tensor.multi_mode_product(per_class[idx] - global_mean, others)
        flat = tensor.unfold(centered, mode)
        s_b += counts[idx] * (flat @ flat.T)
        for i in np.flatnonzero(data.labels == c):
            dev = tensor.multi_mode_product(
                data.samples[..., i] - per_class[idx], others
            )
            flat = tensor.unfold(dev, mode)
            s_w += flat @ flat.T
    return ScatterPair(s_b=(s_b + s_b.T) / 2.0, s_w=(s_w + s_w.T) / 2.0)


def eval_objective(data: LabeledTensorSet, means, factors) -> float:
    """Ratio of projected between-class to within-class scatter.

    Numerator: sum over classes of ``n_i`` times the squared norm of the
    fully projected class-mean deviation; denominator: squared norms of the
    projected within-class deviations.  Returns ``inf`` when the denominator
    vanishes (all samples equal their class means after projection).
    """
    per_class, global_mean = means
    transposed = [(u.T, k) for k, u in enumerate(factors)]
    counts = data.class_counts()
    numerator = 0.0
    denominator = 0.0
    for idx, c in enumerate(data.classes):
        projected = tensor.multi_mode_product(per_class[idx] - global_mean, transposed)
        numerator += int(counts[idx]) * float(np.sum(projected**2))
        for i in np.flatnonzero(data.labels == c):
            projected = tensor.multi_mode_product(
                data.samples[..., i] - per_class[idx], transposed
            )
            denominator += float(np.sum(projected**2))
    if denominator == 0.0:
        return float("inf")
    return numerator / denominator


@dataclass(frozen=True)
class KModeResult:
    factors: list
    objective_trace: tuple
    subspace_change_trace: tuple
    sweeps: int


def default_target_dims(sample_shape, n_classes: int) -> tuple:
    """Per-mode default: the vector-LDA rank bound ``C - 1``, capped by the
    mode extent."""
    return tuple(min(int(s), max(n_classes - 1, 1)) for s in sample_shape)


def k_mode_optimize(core_data: LabeledTensorSet, config: TrainingConfig) -> KModeResult:
    """Alternating per-mode eigen updates of the discriminant factors.

    Factors start as truncated identities (the top HOSVD directions when a
    HOSVD stage preceded).  Each sweep updates modes in order, each update
    seeing the already-refreshed factors of lower modes.  The objective is
    recorded at initialization and after every sweep; iteration stops at
    ``max_iters`` sweeps or when every mode's projection operator moves
    less than ``conv_tol``.
    """
    n = core_data.order
    shape = core_data.sample_shape
    dims = config.target_dims or default_target_dims(shape, core_data.n_classes)
    if len(dims) != n:
        raise ConfigurationError(f"expected {n} target dims, got {len(dims)}")
    for k, d in enumerate(dims):
        if not 1 <= d <= shape[k]:
            raise ConfigurationError(
                f"target dim {d} out of range for mode {k} of extent {shape[k]}"
            )

    factors = [np.eye(shape[k])[:, : dims[k]] for k in range(n)]
    means = class_means(core_data)
    objective_trace = [eval_objective(core_data, means, factors)]
    change_trace = []
    sweeps = 0
    for _ in range(config.max_iters):
        previous = [u @ u.T for u in factors]
        for k in range(n):
            pair = scatter_matrices(core_data, factors, k, means=means)
            try:
                factors[k] = ratio_trace_eig(pair.s_b, pair.s_w, dims[k], config.ridge)
            except SingularityError as exc:
                raise SingularityError(f"mode {k}: {exc}") from exc
        sweeps += 1
        objective_trace.append(eval_objective(core_data, means, factors))
        change = max(
            float(np.linalg.norm(factors[k] @ factors[k].T - previous[k]))
            for k in range(n)
        )
        change_trace.append(change)
        if change < config.conv_tol:
            break
    return KModeResult(
        factors=factors,
        objective_trace=tuple(objective_trace),
        subspace_change_trace=tuple(change_trace),
        sweeps=sweeps,
    )


def _projected_gallery(model: GdaModel, data: LabeledTensorSet) -> np.ndarray:
    """Project every training sample through the exact query path, so a
    query equal to a gallery sample lands at distance zero."""
    return np.stack(
        [model.project(data.samples[..., i]) for i in range(data.n_samples)],
        axis=-1,
    )


def _singleton_warnings(data: LabeledTensorSet) -> tuple:
    counts = data.class_counts()
    return tuple(
        f"class {c} has a single sample; its within-class scatter is zero"
        for c, n_c in zip(data.classes, counts)
        if n_c == 1
    )


def _train_multilinear(data: LabeledTensorSet, config: TrainingConfig, kind: str) -> GdaModel:
    if data.n_samples < 2 or data.n_classes < 2:
        raise ConfigurationError("training needs at least 2 samples and 2 classes")
    n = data.order
    stage_seconds = {}

    t0 = time.perf_counter()
    if kind in ("gda", "hopca"):
        if config.hosvd_ranks is not None:
            ranks = list(config.hosvd_ranks)
            if len(ranks) != n:
                raise ConfigurationError(
                    f"expected {n} HOSVD ranks, got {len(ranks)}"
                )
            decomposition = hosvd(
                data.samples,
                ranks=ranks + [data.n_samples],
                exempt_modes={n},
                gram_crossover=config.gram_crossover,
            )
        else:
            decomposition = hosvd(
                data.samples,
                theta=config.theta,
                exempt_modes={n},
                gram_crossover=config.gram_crossover,
            )
        hosvd_factors = [decomposition.factors[k] for k in range(n)]
        kept = decomposition.kept_ranks[:n]
        mode_energy = decomposition.mode_energy[:n]
        core_data = LabeledTensorSet(decomposition.core, data.labels, data.subjects)
    else:  # mda: identity stage
        hosvd_factors = [np.eye(s) for s in data.sample_shape]
        kept = data.sample_shape
        mode_energy = tuple(1.0 for _ in range(n))
        core_data = data
    stage_seconds["hosvd"] = time.perf_counter() - t0

    dims = config.target_dims or default_target_dims(kept, data.n_classes)
    for k, d in enumerate(dims):
        if d > kept[k]:
            raise ConfigurationError(
                f"target dim {d} exceeds the {kept[k]} dims kept for mode {k}; "
                "raise theta or the HOSVD ranks"
            )
    core_config = TrainingConfig(
        target_dims=tuple(dims),
        theta=config.theta,
        hosvd_ranks=config.hosvd_ranks,
        max_iters=config.max_iters,
        conv_tol=config.conv_tol,
        ridge=config.ridge,
        seed=config.seed,
        gram_crossover=config.gram_crossover,
    )

    t0 = time.perf_counter()
    if kind == "hopca":
        disc = [np.eye(kept[k])[:, : dims[k]] for k in range(n)]
        objective_trace: tuple = ()
        change_trace: tuple = ()
    else:
        result = k_mode_optimize(core_data, core_config)
        disc = result.factors
        objective_trace = result.objective_trace
        change_trace = result.subspace_change_trace
    stage_seconds["optimize"] = time.perf_counter() - t0

    combined = [hosvd_factors[k] @ disc[k] for k in range(n)]
    model = GdaModel(
        kind=kind,
        sample_shape=data.sample_shape,
        combined=combined,
        gallery=np.empty(0),
        gallery_labels=data.labels.copy(),
        hosvd_factors=hosvd_factors,
        disc_factors=disc,
        hosvd_ranks=tuple(kept),
        mode_energy=tuple(mode_energy),
        objective_trace=objective_trace,
        subspace_change_trace=change_trace,
        config=config,
        warnings=_singleton_warnings(data),
        stage_seconds=stage_seconds,
    )
    model.gallery = _projected_gallery(model, data)
    return model


def train_gda(data: LabeledTensorSet, config: TrainingConfig | None = None) -> GdaModel:
    """HOSVD reduction followed by alternating discriminant optimization."""
    return _train_multilinear(data, config or TrainingConfig(), "gda")


def train_mda(data: LabeledTensorSet, config: TrainingConfig | None = None) -> GdaModel:
    """Discriminant optimization on the raw tensors (no HOSVD stage)."""
    return _train_multilinear(data, config or TrainingConfig(), "mda")


def train_hopca(data: LabeledTensorSet, config: TrainingConfig | None = None) -> GdaModel:
    """Unsupervised multilinear baseline: HOSVD projectors only."""
    return _train_multilinear(data, config or TrainingConfig(), "hopca")


def _vectorized(data: LabeledTensorSet) -> np.ndarray:
    """Samples as columns, each vectorized in column-major order."""
    return data.samples.reshape(-1, data.n_samples, order="F")


def train_pca(data: LabeledTensorSet, dims: int | None = None) -> GdaModel:
    """Vectorizing PCA baseline (top principal directions of the centered
    sample vectors, computed from the thin SVD of the data matrix)."""
    t0 = time.perf_counter()
    vectors = _vectorized(data)
    length, m = vectors.shape
    limit = min(m - 1, length)
    if dims is None:
        dims = limit
    if not 1 <= dims <= limit:
        raise ConfigurationError(
            f"pca dims must lie in [1, {limit}] for {m} samples of length {length}"
        )
    mean_vector = np.mean(vectors, axis=1)
    centered = vectors - mean_vector[:, None]
    basis = svd(centered).u[:, :dims]
    model = GdaModel(
        kind="pca",
        sample_shape=data.sample_shape,
        combined=[basis],
        gallery=np.empty(0),
        gallery_labels=data.labels.copy(),
        vectorized=True,
        mean_vector=mean_vector,
        warnings=_singleton_warnings(data),
        stage_seconds={"optimize": time.perf_counter() - t0},
    )
    model.gallery = _projected_gallery(model, data)
    return model


def train_fisherface(
    data: LabeledTensorSet,
    pca_dims: int | None = None,
    lda_dims: int | None = None,
    ridge: float = 1e-6,
) -> GdaModel:
    """PCA to ``pca_dims`` (default ``m - C``) then vector discriminant
    analysis to ``lda_dims`` (default ``C - 1``) on the reduced vectors."""
    t0 = time.perf_counter()
    vectors = _vectorized(data)
    length, m = vectors.shape
    n_classes = data.n_classes
    if n_classes < 2:
        raise ConfigurationError("fisherface needs at least 2 classes")
    if pca_dims is None:
        pca_dims = m - n_classes
    limit = min(m - 1, length)
    if not 1 <= pca_dims <= limit:
        raise ConfigurationError(
            f"fisherface pca dims must lie in [1, {limit}], got {pca_dims}"
        )
    if lda_dims is None:
        lda_dims = n_classes - 1
    if not 1 <= lda_dims <= min(n_classes - 1, pca_dims):
        raise ConfigurationError(
            f"fisherface lda dims must lie in [1, {min(n_classes - 1, pca_dims)}]"
        )

    mean_vector = np.mean(vectors, axis=1)
    centered = vectors - mean_vector[:, None]
    pca_basis = svd(centered).u[:, :pca_dims]
    reduced = pca_basis.T @ centered

    s_b = np.zeros((pca_dims, pca_dims))
    s_w = np.zeros((pca_dims, pca_dims))
    overall = np.mean(reduced, axis=1)
    for c in data.classes:
        block = reduced[:, data.labels == c]
        mu = np.mean(block, axis=1)
        delta = mu - overall
        s_b += block.shape[1] * np.outer(delta, delta)
        within = block - mu[:, None]
        s_w += within @ within.T
    lda_basis = ratio_trace_eig(s_b, s_w, lda_dims, ridge)

    combined = pca_basis @ lda_basis
    model = GdaModel(
        kind="fisherface",
        sample_shape=data.sample_shape,
        combined=[combined],
        gallery=np.empty(0),
        gallery_labels=data.labels.copy(),
        vectorized=True,
        mean_vector=mean_vector,
        warnings=_singleton_warnings(data),
        stage_seconds={"optimize": time.perf_counter() - t0},
    )
    model.gallery = _projected_gallery(model, data)
    return model
