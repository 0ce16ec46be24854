"""Honest-but-curious adversary at the aggregation server.

Label restoration exploits the softmax cross-entropy identity: over a
batch of size B, the final-layer bias gradient for class c equals
mean_softmax_c - count_c / B. The attacker knows the broadcast round-start
model, estimates the mean softmax with Gaussian probe inputs, and reads
class counts off whichever bias coordinates the plaintext (noise-zone)
upload exposes. Input reconstruction follows the classic single-sample
gradient-matching objective, restricted to the visible coordinates.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError
from .masks import SensitivityMask
from .model import LabeledBatch, backward, forward, softmax, _forward_cached, ModelSpec
from .params import LayeredParameters, LayerLayout

N_PROBES = 64
_PROBE_SEED = 0x5EED


@dataclass(frozen=True)
class AttackerView:
    """Exactly what the aggregation server stores for one upload."""

    visible_indices: np.ndarray  # plaintext (noise-zone) coordinates, verbatim
    visible_values: np.ndarray
    hidden_indices: SensitivityMask  # enc plus pers, never observed
    layout: LayerLayout
    theta: LayeredParameters  # round-start model, known from the broadcast
    update_scale: float = 1.0  # visible value * scale ~ loss gradient


@dataclass(frozen=True)
class LabelRestoration:
    existence: np.ndarray  # bool per class
    counts: np.ndarray  # int per class

    def __post_init__(self):
        if np.any((self.counts > 0) & ~self.existence):
            raise ProtocolError("positive count for a class flagged absent")


def make_view(upload, zones, theta: LayeredParameters, update_scale: float) -> AttackerView:
    return AttackerView(
        visible_indices=upload.noise_indices,
        visible_values=upload.noise_values,
        hidden_indices=zones.enc.union(zones.pers),
        layout=theta.layout,
        theta=theta,
        update_scale=update_scale,
    )


def probe_class_probs(theta: LayeredParameters, n_probes: int = N_PROBES) -> np.ndarray:
    """Mean softmax over standard-normal probe inputs through theta."""
    spec = ModelSpec.from_layout(theta.layout)
    rng = np.random.default_rng(_PROBE_SEED)
    probes = rng.standard_normal((n_probes, spec.input_dim))
    logits, _ = _forward_cached(theta, spec, LabeledBatch(probes, np.zeros(n_probes, dtype=np.int64)))
    return softmax(logits).mean(axis=0)


def restore_labels(view: AttackerView, batch_size: int) -> LabelRestoration:
    """Existence flags and per-class counts from visible bias gradients.

    A class is flagged present when its estimated batch share exceeds
    1/(2B), halfway between absent and the one-instance share 1/B. Classes
    whose bias coordinate is hidden are scored absent with count zero.
    """
    spec = ModelSpec.from_layout(view.layout)
    c = spec.num_classes
    bias_slice = view.layout.slice_of("fc3.bias")
    existence = np.zeros(c, dtype=bool)
    counts = np.zeros(c, dtype=np.int64)

    visible_pos = {int(j): i for i, j in enumerate(view.visible_indices)}
    if not any(bias_slice.start + k in visible_pos for k in range(c)):
        return LabelRestoration(existence=existence, counts=counts)

    p_hat = probe_class_probs(view.theta)
    threshold = 1.0 / (2.0 * batch_size)
    for k in range(c):
        j = bias_slice.start + k
        if j not in visible_pos:
            continue
        grad = view.visible_values[visible_pos[j]] * view.update_scale
        share = p_hat[k] - grad  # ~ count_k / B
        if share > threshold:
            existence[k] = True
            counts[k] = int(np.clip(round(share * batch_size), 1, batch_size))
    return LabelRestoration(existence=existence, counts=counts)


def le_acc(pred: LabelRestoration, truth_counts: np.ndarray) -> float:
    """Per-class accuracy of the presence/absence call."""
    truth = np.asarray(truth_counts) > 0
    return float(np.mean(pred.existence == truth))


def ln_acc(pred: LabelRestoration, truth_counts: np.ndarray) -> float:
    """Per-class accuracy of the exact instance count (0 vs 0 counts)."""
    truth = np.asarray(truth_counts, dtype=np.int64)
    return float(np.mean(pred.counts == truth))


def _masked_objective(theta, target_grad, visible_flags, x, label):
    batch = LabeledBatch(x.reshape(1, -1), np.array([label]))
    grad = backward(theta, batch)
    diff = (grad - target_grad)[visible_flags]
    return float(diff @ diff)


def infer_label(theta: LayeredParameters, target_grad, visible_flags) -> int:
    """Most likely single-sample label from visible bias gradients."""
    spec = ModelSpec.from_layout(theta.layout)
    bias_slice = theta.layout.slice_of("fc3.bias")
    p_hat = probe_class_probs(theta)
    best, best_share = 0, -math.inf
    for k in range(spec.num_classes):
        j = bias_slice.start + k
        if not visible_flags[j]:
            continue
        share = p_hat[k] - target_grad[j]
        if share > best_share:
            best, best_share = k, share
    return best


def idlg_reconstruct(
    theta: LayeredParameters,
    target_grad: np.ndarray,
    visible,
    label: int | None = None,
    steps: int = 500,
    lr_attack: float = 0.1,
    rng: np.random.Generator | None = None,
):
    """Gradient-matching input reconstruction for a single-sample target.

    Minimizes || grad(theta, x, y) - target ||^2 over the visible
    coordinates by finite-difference descent with a step-halving line
    search, so the objective never increases. Returns (x_hat, objective).
    """
    spec = ModelSpec.from_layout(theta.layout)
    if isinstance(visible, SensitivityMask):
        visible_flags = visible.to_bool()
    else:
        visible_flags = np.asarray(visible, dtype=bool)
    target_grad = np.asarray(target_grad, dtype=np.float64)
    if label is None:
        label = infer_label(theta, target_grad, visible_flags)
    if rng is None:
        rng = np.random.default_rng(_PROBE_SEED)

    x = rng.standard_normal(spec.input_dim)
    objective = _masked_objective(theta, target_grad, visible_flags, x, label)
    if not math.isfinite(objective):
        raise ProtocolError(f"non-finite reconstruction objective {objective!r} at start")

    h = 1e-5
    step = lr_attack
    for _ in range(steps):
        grad_x = np.zeros(spec.input_dim)
        for d in range(spec.input_dim):
            bump = np.zeros(spec.input_dim)
            bump[d] = h
            plus = _masked_objective(theta, target_grad, visible_flags, x + bump, label)
            minus = _masked_objective(theta, target_grad, visible_flags, x - bump, label)
            grad_x[d] = (plus - minus) / (2 * h)
        norm = np.linalg.norm(grad_x)
        if norm == 0.0:
            break
        trial_step = step
        while trial_step > 1e-14:
            candidate = x - trial_step * grad_x
            value = _masked_objective(theta, target_grad, visible_flags, candidate, label)
            if not math.isfinite(value):
                raise ProtocolError(f"non-finite reconstruction objective {value!r}")
            if value < objective:
                x, objective = candidate, value
                step = min(trial_step * 1.5, lr_attack)
                break
            trial_step /= 2
        else:
            break
        if objective == 0.0:
            break
    return x, objective


def attack_round(theta_round_start, uploads, zones, truth_counts, config, round_no, idlg_targets=None):
    """Per-client label restoration (and optional reconstruction) metrics.

    idlg_targets maps client id to (x_true, grad) single-sample fixtures;
    when present, the round's visibility pattern is applied to the gradient
    and the reconstruction error against x_true is reported.
    """
    universe = theta_round_start.layout.total_params
    rows = []
    for upload in sorted(uploads, key=lambda u: u.client_id):
        cid = upload.client_id
        truth = truth_counts[cid]
        batch = int(truth.sum())
        n_steps = config.local_epochs * max(1, math.ceil(batch / config.batch_size))
        scale = -1.0 / (config.lr * n_steps) if config.lr > 0 and n_steps > 0 else 0.0
        view = make_view(upload, zones[cid], theta_round_start, update_scale=scale)
        restoration = restore_labels(view, batch)

        idlg_mse = math.nan
        if idlg_targets and cid in idlg_targets:
            x_true, grad = idlg_targets[cid]
            visible = zones[cid].noise.to_bool()
            x_hat, _ = idlg_reconstruct(
                theta_round_start,
                grad,
                visible,
                steps=200,
                rng=np.random.default_rng(_PROBE_SEED + round_no * 1000 + cid),
            )
            idlg_mse = float(np.mean((x_hat - x_true) ** 2))

        rows.append(
            {
                "client": cid,
                "le_acc": le_acc(restoration, truth),
                "ln_acc": ln_acc(restoration, truth),
                "idlg_mse": idlg_mse,
                "visible_fraction": len(upload.noise_indices) / universe,
            }
        )
    return {
        "round": round_no,
        "per_client": rows,
        "le_acc_mean": float(np.mean([r["le_acc"] for r in rows])),
        "ln_acc_mean": float(np.mean([r["ln_acc"] for r in rows])),
    }
