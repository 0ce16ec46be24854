"""Dataset synthesis, CSV loading, non-IID partitioning, client sampling."""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ProtocolError
from .model import LabeledBatch


@dataclass(frozen=True)
class LabeledDataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ParameterError("inputs and labels disagree on sample count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ParameterError("labels outside [0, num_classes)")

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> LabeledBatch:
        return LabeledBatch(self.inputs[idx], self.labels[idx])

    def as_batch(self) -> LabeledBatch:
        return LabeledBatch(self.inputs, self.labels)


@dataclass(frozen=True)
class PartitionPlan:
    """Per-client sample index lists; disjoint, every client non-empty."""

    assignments: tuple  # of int64 arrays
    concentration: float

    def sizes(self):
        return [len(a) for a in self.assignments]


def synth_dataset(
    num_classes: int,
    dim: int,
    n: int,
    class_separation: float,
    rng: np.random.Generator,
) -> LabeledDataset:
    """Unit-variance Gaussian blobs, one mean per class.

    Means sit on scaled coordinate axes so every pair is exactly
    ``class_separation`` apart; requires dim >= num_classes.
    """
    if n < num_classes:
        raise ParameterError("need at least one sample per class")
    if dim < num_classes:
        raise ParameterError("mean placement requires dim >= num_classes")
    means = np.zeros((num_classes, dim))
    for c in range(num_classes):
        means[c, c] = class_separation / np.sqrt(2.0)

    counts = np.full(num_classes, n // num_classes)
    counts[: n % num_classes] += 1
    labels = np.repeat(np.arange(num_classes), counts)
    inputs = means[labels] + rng.standard_normal((n, dim))
    order = rng.permutation(n)
    return LabeledDataset(inputs[order], labels[order], num_classes)


def load_csv_dataset(path) -> LabeledDataset:
    """Read `label,f0,...,f{d-1}` rows; num_classes = max label + 1."""
    raw = np.genfromtxt(path, delimiter=",", skip_header=1)
    raw = np.atleast_2d(raw)
    labels = raw[:, 0]
    if np.any(labels < 0) or np.any(labels != np.round(labels)):
        raise ParameterError(f"{path}: labels must be non-negative integers")
    labels = labels.astype(np.int64)
    return LabeledDataset(raw[:, 1:], labels, int(labels.max()) + 1)


def save_csv_dataset(dataset: LabeledDataset, path):
    header = "label," + ",".join(f"f{i}" for i in range(dataset.inputs.shape[1]))
    rows = np.column_stack([dataset.labels.astype(np.float64), dataset.inputs])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")


def _largest_remainder(quota: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to total, proportional to quota."""
    raw = quota * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    if short > 0:
        remainders = raw - counts
        # ties broken by lower client id via stable argsort on -remainder
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(
    dataset: LabeledDataset,
    n_clients: int,
    concentration: float,
    rng: np.random.Generator,
) -> PartitionPlan:
    """Per-class Dirichlet proportions dealt with largest-remainder rounding.

    Clients left with no samples receive one sample moved from whichever
    client currently holds the most.
    """
    if concentration <= 0:
        raise ParameterError("concentration must be > 0")
    if n_clients < 1:
        raise ParameterError("need at least one client")
    if len(dataset) < n_clients:
        raise ParameterError("fewer samples than clients")

    assignments = [[] for _ in range(n_clients)]
    for c in range(dataset.num_classes):
        class_idx = np.flatnonzero(dataset.labels == c)
        if len(class_idx) == 0:
            continue
        class_idx = rng.permutation(class_idx)
        proportions = rng.dirichlet(np.full(n_clients, concentration))
        counts = _largest_remainder(proportions, len(class_idx))
        start = 0
        for client, count in enumerate(counts):
            assignments[client].extend(class_idx[start : start + count])
            start += count

    # repair: donate one sample from the currently largest client to each empty one
    for client in range(n_clients):
        while not assignments[client]:
            donor = max(range(n_clients), key=lambda i: (len(assignments[i]), -i))
            if len(assignments[donor]) <= 1:
                raise ProtocolError("cannot repair empty client: not enough samples")
            assignments[client].append(assignments[donor].pop())

    return PartitionPlan(
        assignments=tuple(np.asarray(sorted(a), dtype=np.int64) for a in assignments),
        concentration=float(concentration),
    )


def poisson_select(n_clients: int, q: float, rng: np.random.Generator) -> list:
    """Independent inclusion with probability q; redraws until non-empty."""
    if not (0.0 < q <= 1.0):
        raise ParameterError("q must be in (0, 1]")
    while True:
        chosen = np.flatnonzero(rng.random(n_clients) < q)
        if len(chosen):
            return [int(c) for c in chosen]
