"""Line-oriented `key = value` experiment configuration.

Unknown keys are rejected so typos fail loudly; every error names the
offending key. serialize_config(parse_config(text)) reparses to an equal
config.
"""

from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .privacy import DEFAULT_ALPHA_GRID, NOISE_SCALING_MODES
from .sensitivity import FISHER_MODES

ETA_G_FEDAVG = "fedavg_equiv"
NOISE_DIVISOR_MODES = ("uniform", "contributors")
DATASET_KINDS = ("synth", "csv")


@dataclass
class ExperimentConfig:
    seed: int = 0

    # data
    dataset: str = "synth"
    csv_path: str = ""
    num_classes: int = 10
    input_dim: int = 20
    n_train: int = 4000
    n_test: int = 1000
    class_separation: float = 6.0
    dirichlet_alpha: float = 0.5

    # federation
    n_clients: int = 20
    rounds: int = 10
    local_epochs: int = 5
    batch_size: int = 32
    lr: float = 0.01
    q: float = 1.0
    eta_g: str = ETA_G_FEDAVG  # "fedavg_equiv" or a float literal

    # model
    hidden1: int = 256
    hidden2: int = 128

    # zones
    tau: float = 0.05
    rho: float = 0.5
    fisher_mode: str = "per_sample_avg"
    fisher_max_samples: int = 0  # 0 = score the full local dataset

    # privacy
    clip_norm: float = 1.0
    sigma: float = 1.0
    delta: float = 1e-5
    noise_scaling: str = "standard"
    noise_divisor: str = "uniform"

    # crypto
    modulus_bits: int = 2048
    frac_bits: int = 30
    int_bits: int = 16
    guard_bits: int = 8

    # harness
    attack: bool = False
    attack_idlg: bool = False
    dump_fisher: bool = False
    message_log: bool = False
    figures: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        def require(cond, key, why):
            if not cond:
                raise ConfigError(f"{key}: {why}")

        require(self.dataset in DATASET_KINDS, "dataset", f"must be one of {DATASET_KINDS}")
        if self.dataset == "csv":
            require(bool(self.csv_path), "csv_path", "required when dataset = csv")
        require(self.num_classes >= 2, "num_classes", "must be >= 2")
        require(self.input_dim >= 1, "input_dim", "must be >= 1")
        require(self.n_train >= 1, "n_train", "must be >= 1")
        require(self.n_test >= 1, "n_test", "must be >= 1")
        require(self.class_separation >= 0, "class_separation", "must be >= 0")
        require(self.dirichlet_alpha > 0, "dirichlet_alpha", "must be > 0")
        require(self.n_clients >= 1, "n_clients", "must be >= 1")
        require(self.rounds >= 0, "rounds", "must be >= 0")
        require(self.local_epochs >= 0, "local_epochs", "must be >= 0")
        require(self.batch_size >= 1, "batch_size", "must be >= 1")
        require(self.lr >= 0, "lr", "must be >= 0")
        require(0 < self.q <= 1, "q", "must be in (0, 1]")
        if self.eta_g != ETA_G_FEDAVG:
            try:
                float(self.eta_g)
            except ValueError:
                raise ConfigError(f"eta_g: must be {ETA_G_FEDAVG!r} or a number") from None
        require(self.hidden1 >= 1, "hidden1", "must be >= 1")
        require(self.hidden2 >= 1, "hidden2", "must be >= 1")
        require(self.fisher_mode in FISHER_MODES, "fisher_mode", f"must be one of {FISHER_MODES}")
        require(self.fisher_max_samples >= 0, "fisher_max_samples", "must be >= 0")
        require(self.clip_norm > 0, "clip_norm", "must be > 0")
        require(self.sigma >= 0, "sigma", "must be >= 0")
        require(0 < self.delta < 1, "delta", "must be in (0, 1)")
        require(
            self.noise_scaling in NOISE_SCALING_MODES,
            "noise_scaling",
            f"must be one of {NOISE_SCALING_MODES}",
        )
        require(
            self.noise_divisor in NOISE_DIVISOR_MODES,
            "noise_divisor",
            f"must be one of {NOISE_DIVISOR_MODES}",
        )
        require(self.modulus_bits >= 128, "modulus_bits", "must be >= 128")
        for key in ("frac_bits", "int_bits", "guard_bits"):
            require(getattr(self, key) >= 1, key, "must be >= 1")

    def eta_g_value(self, n_participants: int) -> float:
        if self.eta_g == ETA_G_FEDAVG:
            return float(n_participants)
        return float(self.eta_g)

    @property
    def alpha_grid(self):
        return DEFAULT_ALPHA_GRID


_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _convert(key: str, text: str, kind):
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[lowered]
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse `key = value` lines; '#' starts a comment; unknown keys fail."""
    types = {f.name: type(f.default) for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in types:
            raise ConfigError(f"unknown key {key!r} on line {lineno}")
        if key == "eta_g":
            values[key] = value
        else:
            values[key] = _convert(key, value, types[key])
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
