"""Round orchestration under the two-server trust split.

One round runs: client selection, local training, Fisher mask generation,
server-mediated zone negotiation, selective protection (encrypt the
consensus zone, clip+noise the noise zone, withhold the personalized
zone), ciphertext and plaintext aggregation at the aggregation server,
decryption and the global step at the key server, broadcast, and the
per-client selective merge.

The aggregation server never holds the secret key: its state carries only
the public key, ciphertexts, DP-noised plaintext, and the exchanged masks.
"""

import random
import time
from dataclasses import dataclass, field

import numpy as np

from . import he
from .config import ExperimentConfig
from .data import LabeledDataset, dirichlet_partition, load_csv_dataset, poisson_select, synth_dataset
from .errors import ProtocolError
from .masks import SensitivityMask, mask_to_wire
from .model import (
    LabeledBatch,
    ModelSpec,
    evaluate,
    init_params,
    local_train,
)
from .negotiation import ZonePartition, negotiate
from .params import LayeredParameters
from .privacy import DpParams, PrivacyLedger, clip_l2, gaussian_noise
from .rngs import derive_int_seed, derive_rng
from .sensitivity import FisherScores, score_and_mask


@dataclass
class KeyServerState:
    """Key distribution and decryption server; sole holder of the secret key."""

    secret_key: he.SecretKey
    public_key: he.PublicKey
    global_model: LayeredParameters


@dataclass
class AggServerState:
    """Aggregation server; sees only the public key and protected uploads."""

    public_key: he.PublicKey
    received_masks: list = field(default_factory=list)
    received_uploads: list = field(default_factory=list)

    def reset_round(self):
        self.received_masks = []
        self.received_uploads = []


@dataclass
class ClientState:
    client_id: int
    model: LayeredParameters
    data: LabeledBatch
    tau: float
    dp: DpParams
    current_pers: SensitivityMask | None = None


@dataclass
class ClientUpload:
    """What one client sends: ciphertext for the consensus zone, sparse
    clipped+noised plaintext for the noise zone. Personalized coordinates
    never appear."""

    client_id: int
    ciphertext: he.PackedCiphertext
    noise_indices: np.ndarray
    noise_values: np.ndarray


@dataclass
class AggregateResult:
    ct_sum: he.PackedCiphertext
    noise_sum: np.ndarray
    noise_count: np.ndarray
    n_uploads: int


@dataclass
class RoundReport:
    round: int
    participants: list
    accuracy: float
    zone_ratios: tuple  # mean (enc, pers, noise) across participants
    per_client_ratios: list
    eps_dp: float
    eps_rdp: float
    alpha_star: float
    delta: float
    timings: dict  # train/encrypt/aggregate/decrypt seconds
    attack: dict | None = None


@dataclass
class System:
    config: ExperimentConfig
    spec: ModelSpec
    key_server: KeyServerState
    agg_server: AggServerState
    clients: list
    test_set: LabeledBatch
    ledger: PrivacyLedger
    initial_model: LayeredParameters
    message_log: list = field(default_factory=list)

    @property
    def universe(self) -> int:
        return self.key_server.global_model.layout.total_params


def _build_data(config: ExperimentConfig):
    if config.dataset == "csv":
        full = load_csv_dataset(config.csv_path)
        if len(full) <= config.n_test:
            raise ProtocolError("csv dataset smaller than the requested test split")
        order = derive_rng(config.seed, "data").permutation(len(full))
        test_idx, train_idx = order[: config.n_test], order[config.n_test :]
        train = LabeledDataset(full.inputs[train_idx], full.labels[train_idx], full.num_classes)
        test = full.subset(test_idx)
        return train, test
    train = synth_dataset(
        config.num_classes,
        config.input_dim,
        config.n_train,
        config.class_separation,
        derive_rng(config.seed, "data"),
    )
    test = synth_dataset(
        config.num_classes,
        config.input_dim,
        config.n_test,
        config.class_separation,
        derive_rng(config.seed, "test"),
    ).as_batch()
    return train, test


def init_system(config: ExperimentConfig) -> System:
    """Key generation, model init, data partitioning, client setup."""
    train, test = _build_data(config)
    spec = ModelSpec(
        input_dim=train.inputs.shape[1] if config.dataset == "csv" else config.input_dim,
        num_classes=train.num_classes if config.dataset == "csv" else config.num_classes,
        hidden1=config.hidden1,
        hidden2=config.hidden2,
    )
    public_key, secret_key = he.keygen(
        config.modulus_bits, random.Random(derive_int_seed(config.seed, "keygen"))
    )
    global_model = init_params(spec, derive_rng(config.seed, "init"))

    plan = dirichlet_partition(
        train, config.n_clients, config.dirichlet_alpha, derive_rng(config.seed, "partition")
    )
    dp = DpParams(
        clip_norm=config.clip_norm,
        sigma=config.sigma,
        noise_scaling=config.noise_scaling,
        alpha_grid=config.alpha_grid,
    )
    clients = [
        ClientState(
            client_id=cid,
            model=global_model.copy(),
            data=train.subset(idx),
            tau=config.tau,
            dp=dp,
        )
        for cid, idx in enumerate(plan.assignments)
    ]
    return System(
        config=config,
        spec=spec,
        key_server=KeyServerState(secret_key, public_key, global_model.copy()),
        agg_server=AggServerState(public_key=public_key),
        clients=clients,
        test_set=test,
        ledger=PrivacyLedger(alpha_grid=config.alpha_grid),
        initial_model=global_model.copy(),
    )


def client_update(client: ClientState, config: ExperimentConfig, round_no: int):
    """Local SGD then Fisher mask on the post-training model.

    Returns (trained model, delta, FisherScores, local mask, train seconds).
    """
    start = time.perf_counter()
    rng = derive_rng(config.seed, "train", round_no, client.client_id)
    trained, delta = local_train(
        client.model,
        client.data,
        epochs=config.local_epochs,
        lr=config.lr,
        batch_size=config.batch_size,
        rng=rng,
    )
    scores, mask = score_and_mask(
        trained,
        client.data,
        tau=client.tau,
        mode=config.fisher_mode,
        max_samples=config.fisher_max_samples or None,
    )
    return trained, delta, scores, mask, time.perf_counter() - start


def protect(
    client: ClientState,
    delta: np.ndarray,
    zones: ZonePartition,
    pk: he.PublicKey,
    codec: he.FixedPointCodec,
    n_participants: int,
    config: ExperimentConfig,
    round_no: int,
) -> ClientUpload:
    """Encrypt the consensus slice, clip+noise the noise slice, drop the rest."""
    enc_rng = random.Random(derive_int_seed(config.seed, "encrypt", round_no, client.client_id))
    ciphertext = he.encrypt(pk, delta[zones.enc.indices], codec, enc_rng)

    noise_idx = zones.noise.indices
    clipped = clip_l2(delta[noise_idx], client.dp.clip_norm)
    noised = gaussian_noise(
        clipped,
        client.dp.clip_norm,
        client.dp.sigma,
        n_participants,
        client.dp.noise_scaling,
        derive_rng(config.seed, "noise", round_no, client.client_id),
    )
    return ClientUpload(
        client_id=client.client_id,
        ciphertext=ciphertext,
        noise_indices=noise_idx.copy(),
        noise_values=noised,
    )


def agg_combine(agg: AggServerState, uploads, universe: int) -> AggregateResult:
    """Homomorphic ciphertext sum plus per-index plaintext sums with counts."""
    if not uploads:
        raise ProtocolError("no uploads to aggregate")
    uploads = sorted(uploads, key=lambda u: u.client_id)
    ct_sum = uploads[0].ciphertext
    for upload in uploads[1:]:
        if upload.ciphertext.slot_count != ct_sum.slot_count:
            raise ProtocolError("encrypted-zone shapes differ between uploads")
        ct_sum = he.ct_add(ct_sum, upload.ciphertext)
    noise_sum = np.zeros(universe)
    noise_count = np.zeros(universe, dtype=np.int64)
    for upload in uploads:
        noise_sum[upload.noise_indices] += upload.noise_values
        noise_count[upload.noise_indices] += 1
    return AggregateResult(
        ct_sum=ct_sum, noise_sum=noise_sum, noise_count=noise_count, n_uploads=len(uploads)
    )


def key_finalize(
    key_server: KeyServerState,
    aggregate: AggregateResult,
    enc_mask: SensitivityMask,
    n_participants: int,
    config: ExperimentConfig,
) -> LayeredParameters:
    """Decrypt, recombine the full update vector, apply the global step."""
    if aggregate.ct_sum.summands != n_participants:
        raise ProtocolError(
            f"ciphertext holds {aggregate.ct_sum.summands} contributions, "
            f"round has {n_participants}"
        )
    enc_sums = he.decrypt(key_server.secret_key, aggregate.ct_sum, divisor=n_participants)

    delta_sum = aggregate.noise_sum.copy()
    delta_sum[enc_mask.indices] = enc_sums

    eta_g = config.eta_g_value(n_participants)
    if config.noise_divisor == "contributors":
        divisor = np.ones(len(delta_sum))
        divisor[aggregate.noise_count > 0] = aggregate.noise_count[aggregate.noise_count > 0]
        divisor[enc_mask.indices] = n_participants
        step = eta_g * (delta_sum / divisor)
    else:
        step = eta_g * delta_sum / n_participants
    new_global = key_server.global_model.with_values(key_server.global_model.values + step)
    key_server.global_model = new_global
    return new_global


def client_merge(client: ClientState, trained: LayeredParameters, global_model: LayeredParameters):
    """Keep personalized coordinates local, adopt the global everywhere else."""
    if len(trained) != len(global_model):
        raise ProtocolError("model shapes differ in merge")
    pers_flags = (
        client.current_pers.to_bool()
        if client.current_pers is not None
        else np.zeros(len(global_model), dtype=bool)
    )
    merged = np.where(pers_flags, trained.values, global_model.values)
    client.model = global_model.with_values(merged)
    return client.model


def run_round(system: System, round_no: int) -> RoundReport:
    config = system.config
    codec = he.FixedPointCodec(
        frac_bits=config.frac_bits, int_bits=config.int_bits, guard_bits=config.guard_bits
    )
    if config.q >= 1.0:
        participants = list(range(config.n_clients))
    else:
        participants = poisson_select(
            config.n_clients, config.q, derive_rng(config.seed, "select", round_no)
        )
    k = len(participants)
    system.agg_server.reset_round()

    # local training + mask generation
    t_train = 0.0
    trained, deltas, masks, scores_by_client = {}, {}, [], {}
    for cid in participants:
        client = system.clients[cid]
        model_t, delta, scores, mask, seconds = client_update(client, config, round_no)
        trained[cid] = model_t
        deltas[cid] = delta
        masks.append(mask)
        scores_by_client[cid] = scores
        t_train += seconds

    # negotiation is server-mediated; the aggregation server sees every mask
    system.agg_server.received_masks = list(masks)
    enc_mask, partitions = negotiate(masks, config.rho)
    zones = dict(zip(participants, partitions))

    # selective protection
    t_encrypt = 0.0
    uploads = []
    for cid in participants:
        client = system.clients[cid]
        client.current_pers = zones[cid].pers
        start = time.perf_counter()
        upload = protect(
            client, deltas[cid], zones[cid], system.agg_server.public_key,
            codec, k, config, round_no,
        )
        t_encrypt += time.perf_counter() - start
        uploads.append(upload)
    system.agg_server.received_uploads = list(uploads)

    if config.message_log:
        for mask, upload in zip(masks, uploads):
            system.message_log.append(
                (round_no, upload.client_id, mask_to_wire(mask), he.serialize_ciphertext(upload.ciphertext))
            )

    start = time.perf_counter()
    aggregate = agg_combine(system.agg_server, uploads, system.universe)
    t_aggregate = time.perf_counter() - start

    start = time.perf_counter()
    theta_before = system.key_server.global_model.copy()
    new_global = key_finalize(system.key_server, aggregate, enc_mask, k, config)
    t_decrypt = time.perf_counter() - start

    for cid in participants:
        client_merge(system.clients[cid], trained[cid], new_global)

    system.ledger.compose_round(system.clients[0].dp.sigma_effective(k))
    eps_dp, alpha_star = system.ledger.report_eps(config.delta)

    attack_summary = None
    if config.attack:
        from .attack import attack_round  # runtime import avoids a module cycle
        from .model import backward

        truth = {
            cid: np.bincount(system.clients[cid].data.labels, minlength=system.spec.num_classes)
            for cid in participants
        }
        idlg_targets = None
        if config.attack_idlg:
            idlg_targets = {}
            for cid in participants:
                data = system.clients[cid].data
                single = data.subset(np.array([0]))
                idlg_targets[cid] = (data.inputs[0].copy(), backward(theta_before, single))
        attack_summary = attack_round(
            theta_round_start=theta_before,
            uploads=uploads,
            zones=zones,
            truth_counts=truth,
            config=config,
            round_no=round_no,
            idlg_targets=idlg_targets,
        )

    per_client_ratios = [zones[cid].ratios() for cid in participants]
    mean_ratios = tuple(float(np.mean([r[i] for r in per_client_ratios])) for i in range(3))
    return RoundReport(
        round=round_no,
        participants=participants,
        accuracy=evaluate(new_global, system.test_set),
        zone_ratios=mean_ratios,
        per_client_ratios=per_client_ratios,
        eps_dp=eps_dp,
        eps_rdp=system.ledger.eps_by_alpha[alpha_star],
        alpha_star=alpha_star,
        delta=config.delta,
        timings={
            "train": t_train,
            "encrypt": t_encrypt,
            "aggregate": t_aggregate,
            "decrypt": t_decrypt,
        },
        attack=attack_summary,
    )


def run_experiment(config: ExperimentConfig):
    """Execute all rounds; returns (reports, final system state)."""
    system = init_system(config)
    reports = [run_round(system, t) for t in range(1, config.rounds + 1)]
    return reports, system
