"""Federated learning with Fisher-guided selective protection zones.

Clients score parameter sensitivity with diagonal Fisher information,
negotiate a consensus zone that is protected by additively homomorphic
encryption, keep their client-specific sensitive parameters local, and
cover the remainder with clipped Gaussian noise accounted under Renyi
differential privacy. A two-server split keeps the secret key away from
the aggregation path, and an attack harness measures what the aggregator
can still recover.
"""

from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .data import LabeledDataset, dirichlet_partition, poisson_select, synth_dataset
from .errors import (
    ConfigError,
    EncodingRangeError,
    GuardBitError,
    MaskUniverseError,
    ParameterError,
    ProtocolError,
    ShapeError,
)
from .masks import SensitivityMask, mask_from_wire, mask_to_wire
from .model import (
    LabeledBatch,
    ModelSpec,
    backward,
    evaluate,
    forward,
    init_params,
    local_train,
    per_sample_gradients,
)
from .negotiation import ZonePartition, consensus_mask, negotiate, noise_mask, personalized_mask
from .params import LayeredParameters, LayerLayout
from .privacy import DpParams, PrivacyLedger, clip_l2, gaussian_noise, rdp_per_round, to_eps_delta
from .protocol import (
    AggServerState,
    ClientState,
    ClientUpload,
    KeyServerState,
    RoundReport,
    System,
    init_system,
    run_experiment,
    run_round,
)
from .sensitivity import FisherScores, compute_fisher, local_mask, normalize_per_layer
from .rngs import derive_rng

__version__ = "0.1.0"
