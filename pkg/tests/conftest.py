import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fedshield.model import LabeledBatch, ModelSpec, init_params


@pytest.fixture
def tiny_spec():
    return ModelSpec(input_dim=3, num_classes=3, hidden1=4, hidden2=3)


def random_instance(spec, rng, batch=5):
    """Random (params, batch) pair for a given model spec."""
    params = init_params(spec, rng)
    inputs = rng.standard_normal((batch, spec.input_dim))
    labels = rng.integers(0, spec.num_classes, size=batch)
    return params, LabeledBatch(inputs, labels)


def smooth_instance(spec, rng, batch=5, margin=1e-3):
    """Random (params, batch) pair whose ReLU pre-activations avoid the kink.

    Finite differences are only a valid gradient oracle at differentiable
    points, so draws are rejected until every pre-activation clears the
    kink by `margin`. All parameters (biases included) are drawn randomly,
    otherwise zero biases park dead units exactly at zero.
    """
    from fedshield.model import ModelSpec, _forward_cached  # local import keeps fixture cheap

    while True:
        params = init_params(spec, rng)
        params.values[:] = rng.uniform(-0.7, 0.7, size=len(params))
        inputs = rng.standard_normal((batch, spec.input_dim))
        labels = rng.integers(0, spec.num_classes, size=batch)
        b = LabeledBatch(inputs, labels)
        _, (z1, _, z2, _) = _forward_cached(params, spec, b)
        if min(np.abs(z1).min(), np.abs(z2).min()) > margin:
            return params, b
