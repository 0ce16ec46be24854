"""Three-layer ReLU MLP with hand-coded forward/backward passes.

Everything runs in float64 numpy so gradients can be checked against
finite differences to tight tolerances and training is bit-reproducible
under a fixed seed. ReLU uses the subgradient 0 at 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError, ShapeError
from .params import LayeredParameters, LayerLayout


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions of the classifier: input -> hidden1 -> hidden2 -> classes."""

    input_dim: int
    num_classes: int
    hidden1: int = 256
    hidden2: int = 128

    def __post_init__(self):
        for field in ("input_dim", "hidden1", "hidden2"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")

    def layout(self) -> LayerLayout:
        d, h1, h2, c = self.input_dim, self.hidden1, self.hidden2, self.num_classes
        return LayerLayout.from_sizes(
            [
                ("fc1.weight", d * h1),
                ("fc1.bias", h1),
                ("fc2.weight", h1 * h2),
                ("fc2.bias", h2),
                ("fc3.weight", h2 * c),
                ("fc3.bias", c),
            ]
        )

    @classmethod
    def from_layout(cls, layout: LayerLayout) -> "ModelSpec":
        def seg(name):
            sl = layout.slice_of(name)
            return sl.stop - sl.start

        h1, h2, c = seg("fc1.bias"), seg("fc2.bias"), seg("fc3.bias")
        return cls(input_dim=seg("fc1.weight") // h1, num_classes=c, hidden1=h1, hidden2=h2)


@dataclass(frozen=True)
class LabeledBatch:
    inputs: np.ndarray  # (batch, input_dim)
    labels: np.ndarray  # (batch,) int class indices

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError("inputs and labels disagree on batch size")
        if self.inputs.shape[0] < 1:
            raise ShapeError("batch must hold at least one sample")

    def __len__(self):
        return self.inputs.shape[0]

    def subset(self, idx) -> "LabeledBatch":
        return LabeledBatch(self.inputs[idx], self.labels[idx])


def init_params(spec: ModelSpec, rng: np.random.Generator) -> LayeredParameters:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    layout = spec.layout()
    values = np.zeros(layout.total_params)
    fans = {
        "fc1.weight": spec.input_dim,
        "fc2.weight": spec.hidden1,
        "fc3.weight": spec.hidden2,
    }
    for name, fan_in in fans.items():
        sl = layout.slice_of(name)
        bound = 1.0 / np.sqrt(fan_in)
        values[sl] = rng.uniform(-bound, bound, size=sl.stop - sl.start)
    return LayeredParameters(values, layout)


def _unpack(params: LayeredParameters, spec: ModelSpec):
    d, h1, h2, c = spec.input_dim, spec.hidden1, spec.hidden2, spec.num_classes
    w1 = params.view("fc1.weight").reshape(d, h1)
    b1 = params.view("fc1.bias")
    w2 = params.view("fc2.weight").reshape(h1, h2)
    b2 = params.view("fc2.bias")
    w3 = params.view("fc3.weight").reshape(h2, c)
    b3 = params.view("fc3.bias")
    return w1, b1, w2, b2, w3, b3


def _check_batch(spec: ModelSpec, batch: LabeledBatch):
    if batch.inputs.shape[1] != spec.input_dim:
        raise ShapeError(
            f"batch feature dim {batch.inputs.shape[1]} != input_dim {spec.input_dim}"
        )
    if batch.labels.min() < 0 or batch.labels.max() >= spec.num_classes:
        raise ShapeError("labels outside [0, num_classes)")


def _forward_cached(params, spec, batch):
    w1, b1, w2, b2, w3, b3 = _unpack(params, spec)
    z1 = batch.inputs @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ w2 + b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ w3 + b3
    return logits, (z1, a1, z2, a2)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(params: LayeredParameters, batch: LabeledBatch):
    """Logits and mean cross-entropy loss over the batch."""
    spec = ModelSpec.from_layout(params.layout)
    _check_batch(spec, batch)
    logits, _ = _forward_cached(params, spec, batch)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    mean_loss = -log_probs[np.arange(len(batch)), batch.labels].mean()
    return logits, float(mean_loss)


def backward(params: LayeredParameters, batch: LabeledBatch) -> np.ndarray:
    """Gradient of the mean cross-entropy loss w.r.t. the flat parameter vector."""
    spec = ModelSpec.from_layout(params.layout)
    _check_batch(spec, batch)
    logits, (z1, a1, z2, a2) = _forward_cached(params, spec, batch)
    _, _, w2, _, w3, _ = _unpack(params, spec)
    n = len(batch)

    dlogits = softmax(logits)
    dlogits[np.arange(n), batch.labels] -= 1.0
    dlogits /= n

    grad = np.zeros_like(params.values)
    layout = params.layout
    grad[layout.slice_of("fc3.weight")] = (a2.T @ dlogits).ravel()
    grad[layout.slice_of("fc3.bias")] = dlogits.sum(axis=0)

    da2 = dlogits @ w3.T
    dz2 = da2 * (z2 > 0.0)
    grad[layout.slice_of("fc2.weight")] = (a1.T @ dz2).ravel()
    grad[layout.slice_of("fc2.bias")] = dz2.sum(axis=0)

    da1 = dz2 @ w2.T
    dz1 = da1 * (z1 > 0.0)
    grad[layout.slice_of("fc1.weight")] = (batch.inputs.T @ dz1).ravel()
    grad[layout.slice_of("fc1.bias")] = dz1.sum(axis=0)
    return grad


def per_sample_gradients(params: LayeredParameters, batch: LabeledBatch) -> np.ndarray:
    """(batch, total_params) matrix of per-sample cross-entropy gradients.

    Row i equals backward() on the single-sample batch i; vectorized with
    per-sample outer products so Fisher scoring stays cheap.
    """
    spec = ModelSpec.from_layout(params.layout)
    _check_batch(spec, batch)
    logits, (z1, a1, z2, a2) = _forward_cached(params, spec, batch)
    _, _, w2, _, w3, _ = _unpack(params, spec)
    n = len(batch)

    dlogits = softmax(logits)
    dlogits[np.arange(n), batch.labels] -= 1.0

    da2 = dlogits @ w3.T
    dz2 = da2 * (z2 > 0.0)
    da1 = dz2 @ w2.T
    dz1 = da1 * (z1 > 0.0)

    layout = params.layout
    grads = np.zeros((n, layout.total_params))
    grads[:, layout.slice_of("fc3.weight")] = np.einsum("bi,bj->bij", a2, dlogits).reshape(n, -1)
    grads[:, layout.slice_of("fc3.bias")] = dlogits
    grads[:, layout.slice_of("fc2.weight")] = np.einsum("bi,bj->bij", a1, dz2).reshape(n, -1)
    grads[:, layout.slice_of("fc2.bias")] = dz2
    grads[:, layout.slice_of("fc1.weight")] = np.einsum("bi,bj->bij", batch.inputs, dz1).reshape(n, -1)
    grads[:, layout.slice_of("fc1.bias")] = dz1
    return grads


def local_train(
    params: LayeredParameters,
    dataset: LabeledBatch,
    epochs: int,
    lr: float,
    batch_size: int,
    rng: np.random.Generator,
):
    """Plain minibatch SGD; returns (new_params, delta = new - old)."""
    if len(dataset) == 0:
        raise ProtocolError("cannot train on an empty dataset")
    values = params.values.copy()
    current = params.with_values(values)
    n = len(dataset)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            # membership is shuffled; in-batch order is sorted so the mean
            # gradient sums in a reproducible order
            idx = np.sort(order[start : start + batch_size])
            grad = backward(current, dataset.subset(idx))
            values = values - lr * grad
            current = params.with_values(values)
    delta = current.values - params.values
    return current, delta


def evaluate(params: LayeredParameters, dataset: LabeledBatch) -> float:
    """Fraction of argmax-correct predictions; ties go to the lowest class index."""
    if len(dataset) == 0:
        raise ProtocolError("cannot evaluate on an empty dataset")
    logits, _ = forward(params, dataset)
    preds = np.argmax(logits, axis=1)  # np.argmax takes the first max: lowest index
    return float(np.mean(preds == dataset.labels))
