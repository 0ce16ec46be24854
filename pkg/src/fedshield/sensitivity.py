"""Diagonal Fisher scoring, per-layer min-max normalization, local masks.

Two scoring modes are supported. ``per_sample_avg`` (the default) averages
squared per-sample log-likelihood gradients, (1/N) sum_i g_i^2.
``whole_batch`` squares the gradient of the dataset-mean log-likelihood,
(mean_i g_i)^2, which is never larger per coordinate. The log-likelihood
gradient is the negated cross-entropy gradient, so the square is the same
either way.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .masks import SensitivityMask
from .model import LabeledBatch, ProtocolError, backward, per_sample_gradients
from .params import LayeredParameters, LayerLayout

FISHER_MODES = ("per_sample_avg", "whole_batch")


@dataclass(frozen=True)
class FisherScores:
    raw: np.ndarray
    normalized: np.ndarray
    layout: LayerLayout


def compute_fisher(
    params: LayeredParameters,
    dataset: LabeledBatch,
    mode: str = "per_sample_avg",
    max_samples: int | None = None,
) -> np.ndarray:
    """Raw per-parameter Fisher scores (non-negative, aligned with params)."""
    if mode not in FISHER_MODES:
        raise ValueError(f"unknown fisher mode {mode!r}")
    if len(dataset) == 0:
        raise ProtocolError("cannot score an empty dataset")
    if max_samples is not None and len(dataset) > max_samples:
        dataset = dataset.subset(np.arange(max_samples))
    if mode == "per_sample_avg":
        grads = per_sample_gradients(params, dataset)
        return np.mean(grads * grads, axis=0)
    grad = backward(params, dataset)
    return grad * grad


def normalize_per_layer(raw: np.ndarray, layout: LayerLayout) -> np.ndarray:
    """Min-max normalize within each layer; constant layers map to all zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (layout.total_params,):
        raise ValueError("scores not aligned with layout")
    normalized = np.zeros_like(raw)
    for _, offset, length in layout.layers:
        seg = raw[offset : offset + length]
        lo, hi = seg.min(), seg.max()
        if hi > lo:
            normalized[offset : offset + length] = (seg - lo) / (hi - lo)
    return normalized


def local_mask(normalized: np.ndarray, tau: float) -> SensitivityMask:
    """Indices whose normalized score strictly exceeds tau."""
    normalized = np.asarray(normalized)
    return SensitivityMask(np.flatnonzero(normalized > tau), normalized.shape[0])


def score_and_mask(
    params: LayeredParameters,
    dataset: LabeledBatch,
    tau: float,
    mode: str = "per_sample_avg",
    max_samples: int | None = None,
):
    """Full local pipeline: raw scores -> normalized -> threshold mask."""
    raw = compute_fisher(params, dataset, mode=mode, max_samples=max_samples)
    normalized = normalize_per_layer(raw, params.layout)
    scores = FisherScores(raw=raw, normalized=normalized, layout=params.layout)
    return scores, local_mask(normalized, tau)


def dump_scores_csv(scores: FisherScores, path):
    """`param_index,layer,raw,normalized` rows for histogram tooling."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param_index", "layer", "raw", "normalized"])
        for name, offset, length in scores.layout.layers:
            for j in range(offset, offset + length):
                writer.writerow([j, name, repr(float(scores.raw[j])), repr(float(scores.normalized[j]))])
