"""Serialization of trained models and experiment reports.

Model container: a single JSON document (sorted keys, no whitespace) with a
format-version tag.  Arrays are stored as base64 of their raw little-endian
float64 buffers in row-major (C) order, alongside their shapes, so a
save/load round trip is bit-exact and repeated saves of the same model are
byte-identical.  Stage timings are deliberately not serialized.

Report files: a line-oriented text document, ``key = value`` pairs followed
by ``[section]`` tables (tab-separated).  Floats are written with ``repr``
(shortest exact round trip), so reports are byte-reproducible; wall-clock
timings are excluded unless explicitly requested.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import DatasetError
from .evaluation import ExperimentReport
from .training import GdaModel, TrainingConfig

MODEL_FORMAT = "tensorgda-model"
MODEL_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(a.astype("<f8").tobytes(order="C")).decode("ascii"),
    }


def _decode_array(blob: dict) -> np.ndarray:
    buf = base64.b64decode(blob["data"])
    return np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(blob["shape"])


def _encode_labels(labels: np.ndarray) -> list:
    return [int(x) for x in labels]


def model_to_json(model: GdaModel) -> str:
    """Deterministic JSON text for a trained model."""
    document = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": model.kind,
        "vectorized": model.vectorized,
        "sample_shape": list(model.sample_shape),
        "combined": [_encode_array(p) for p in model.combined],
        "hosvd_factors": None
        if model.hosvd_factors is None
        else [_encode_array(f) for f in model.hosvd_factors],
        "disc_factors": None
        if model.disc_factors is None
        else [_encode_array(f) for f in model.disc_factors],
        "mean_vector": None
        if model.mean_vector is None
        else _encode_array(model.mean_vector),
        "gallery": _encode_array(model.gallery),
        "gallery_labels": _encode_labels(model.gallery_labels),
        "hosvd_ranks": None
        if model.hosvd_ranks is None
        else [int(r) for r in model.hosvd_ranks],
        "mode_energy": None
        if model.mode_energy is None
        else [float(e) for e in model.mode_energy],
        "objective_trace": [float(v) for v in model.objective_trace],
        "subspace_change_trace": [float(v) for v in model.subspace_change_trace],
        "config": None if model.config is None else _config_to_dict(model.config),
        "warnings": list(model.warnings),
    }
    return json.dumps(document, sort_keys=True, separators=(",", ":"))


def _config_to_dict(config: TrainingConfig) -> dict:
    return {
        "target_dims": None if config.target_dims is None else list(config.target_dims),
        "theta": config.theta,
        "hosvd_ranks": None if config.hosvd_ranks is None else list(config.hosvd_ranks),
        "max_iters": config.max_iters,
        "conv_tol": config.conv_tol,
        "ridge": config.ridge,
        "seed": config.seed,
        "gram_crossover": config.gram_crossover,
        "pca_dims": config.pca_dims,
        "fisherface_pca_dims": config.fisherface_pca_dims,
        "fisherface_lda_dims": config.fisherface_lda_dims,
    }


def _config_from_dict(blob: dict) -> TrainingConfig:
    def tup(v):
        return None if v is None else tuple(v)

    return TrainingConfig(
        target_dims=tup(blob["target_dims"]),
        theta=blob["theta"],
        hosvd_ranks=tup(blob["hosvd_ranks"]),
        max_iters=blob["max_iters"],
        conv_tol=blob["conv_tol"],
        ridge=blob["ridge"],
        seed=blob["seed"],
        gram_crossover=blob["gram_crossover"],
        pca_dims=blob["pca_dims"],
        fisherface_pca_dims=blob["fisherface_pca_dims"],
        fisherface_lda_dims=blob["fisherface_lda_dims"],
    )


def save_model(model: GdaModel, path) -> None:
    with open(path, "w", encoding="ascii") as handle:
        handle.write(model_to_json(model))
        handle.write("\n")


def load_model(path) -> GdaModel:
    try:
        with open(path, "r", encoding="ascii") as handle:
            document = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot load model from {path}: {exc}") from exc
    if document.get("format") != MODEL_FORMAT:
        raise DatasetError(f"{path} is not a {MODEL_FORMAT} file")
    if document.get("version") != MODEL_VERSION:
        raise DatasetError(
            f"{path} has model version {document.get('version')}, "
            f"expected {MODEL_VERSION}"
        )
    return GdaModel(
        kind=document["kind"],
        sample_shape=tuple(document["sample_shape"]),
        combined=[_decode_array(p) for p in document["combined"]],
        gallery=_decode_array(document["gallery"]),
        gallery_labels=np.array(document["gallery_labels"]),
        vectorized=document["vectorized"],
        hosvd_factors=None
        if document["hosvd_factors"] is None
        else [_decode_array(f) for f in document["hosvd_factors"]],
        disc_factors=None
        if document["disc_factors"] is None
        else [_decode_array(f) for f in document["disc_factors"]],
        mean_vector=None
        if document["mean_vector"] is None
        else _decode_array(document["mean_vector"]),
        hosvd_ranks=None
        if document["hosvd_ranks"] is None
        else tuple(document["hosvd_ranks"]),
        mode_energy=None
        if document["mode_energy"] is None
        else tuple(document["mode_energy"]),
        objective_trace=tuple(document["objective_trace"]),
        subspace_change_trace=tuple(document["subspace_change_trace"]),
        config=None if document["config"] is None else _config_from_dict(document["config"]),
        warnings=tuple(document["warnings"]),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_text(report: ExperimentReport, include_timings: bool = False) -> str:
    """Canonical text form of a report.

    Field names are stable; timings appear only on request because they are
    not reproducible across runs.
    """
    lines = ["# tensorgda experiment report v1"]
    lines.append(f"protocol = {report.protocol}")
    lines.append(f"method = {report.method}")
    lines.append(f"seed = {report.seed}")
    if report.train_per_class is not None:
        lines.append(f"train_per_class = {report.train_per_class}")
    lines.append(f"trials = {len(report.trial_accuracies)}")
    lines.append(f"mean_accuracy = {_fmt(report.mean_accuracy)}")
    if report.macro_accuracy is not None:
        lines.append(f"macro_accuracy = {_fmt(report.macro_accuracy)}")
    lines.append("classes = " + " ".join(str(c) for c in report.classes))

    lines.append("[trials]")
    lines.append("index\taccuracy\tdims\tcompression_fraction")
    for i, acc in enumerate(report.trial_accuracies):
        dims = "x".join(str(d) for d in report.per_trial_dims[i])
        lines.append(
            f"{i}\t{_fmt(acc)}\t{dims}\t{_fmt(report.compression_fractions[i])}"
        )

    lines.append("[confusion]")
    for i, c in enumerate(report.classes):
        row = "\t".join(str(int(v)) for v in report.confusion[i])
        lines.append(f"{c}\t{row}")

    lines.append("[test_counts]")
    for c, count in zip(report.classes, report.test_counts):
        lines.append(f"{c}\t{count}")

    for i, trace in enumerate(report.objective_traces):
        if not trace:
            continue
        lines.append(f"[objective_trace {i}]")
        lines.append(" ".join(_fmt(float(v)) for v in trace))

    if include_timings:
        lines.append("[timings]")
        for key in sorted(report.timings):
            lines.append(f"{key} = {_fmt(report.timings[key])}")
    return "\n".join(lines) + "\n"


def save_report(report: ExperimentReport, path, include_timings: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(report_to_text(report, include_timings=include_timings))
