"""L2 clipping, Gaussian noise, and a per-order RDP ledger.

The Gaussian mechanism with sensitivity C and standard deviation C*sigma
is (alpha, alpha / (2 sigma^2))-RDP for every order alpha > 1; orders
compose additively across rounds, and any order converts to (eps', delta)
via

    eps' = eps + log((alpha - 1) / alpha) - (log(delta) + log(alpha)) / (alpha - 1).

The ledger accounts with the effective multiplier sigma_eff = noise_std / C,
so the alternate noise-scaling mode that inflates the drawn std by sqrt(K)
is charged its correspondingly cheaper per-round cost.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

DEFAULT_ALPHA_GRID = (1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 16.0, 32.0, 64.0)

NOISE_SCALING_MODES = ("standard", "paper_literal")


@dataclass(frozen=True)
class DpParams:
    clip_norm: float = 1.0
    sigma: float = 1.0
    noise_scaling: str = "standard"
    alpha_grid: tuple = DEFAULT_ALPHA_GRID

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise ParameterError("clip_norm must be > 0")
        if self.sigma < 0:
            raise ParameterError("sigma must be >= 0")
        if self.noise_scaling not in NOISE_SCALING_MODES:
            raise ParameterError(f"unknown noise_scaling {self.noise_scaling!r}")
        grid = tuple(float(a) for a in self.alpha_grid)
        if any(a <= 1.0 for a in grid) or list(grid) != sorted(grid):
            raise ParameterError("alpha_grid must be ascending and all > 1")
        object.__setattr__(self, "alpha_grid", grid)

    def noise_std(self, n_participants: int) -> float:
        """Per-coordinate std actually drawn for a round with K participants."""
        std = self.clip_norm * self.sigma
        if self.noise_scaling == "paper_literal":
            std *= math.sqrt(n_participants)
        return std

    def sigma_effective(self, n_participants: int) -> float:
        return self.noise_std(n_participants) / self.clip_norm


def clip_l2(v: np.ndarray, clip_norm: float) -> np.ndarray:
    """Scale v so its L2 norm is at most clip_norm; zero vectors pass through."""
    if clip_norm <= 0:
        raise ParameterError("clip_norm must be > 0")
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return v.copy()
    return v * min(1.0, clip_norm / norm)


def gaussian_noise(
    v_clipped: np.ndarray,
    clip_norm: float,
    sigma: float,
    n_participants: int,
    mode: str,
    rng: np.random.Generator,
) -> np.ndarray:
    """Add N(0, std^2) per coordinate; std per DpParams.noise_std. sigma=0 is identity."""
    params = DpParams(clip_norm=clip_norm, sigma=sigma, noise_scaling=mode)
    v_clipped = np.asarray(v_clipped, dtype=np.float64)
    if sigma == 0.0:
        return v_clipped.copy()
    return v_clipped + rng.normal(0.0, params.noise_std(n_participants), size=v_clipped.shape)


def rdp_per_round(alpha: float, sigma: float) -> float:
    """Single Gaussian release at multiplier sigma: alpha / (2 sigma^2)."""
    if alpha <= 1.0:
        raise ParameterError("alpha must be > 1")
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    if sigma == 0.0:
        return math.inf
    return alpha / (2.0 * sigma * sigma)


def to_eps_delta(alpha: float, eps_rdp: float, delta: float) -> float:
    """Order-alpha RDP budget -> (eps', delta)-DP. Returns the raw, unclamped eps'."""
    if alpha <= 1.0:
        raise ParameterError("alpha must be > 1")
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta must be in (0, 1)")
    if math.isinf(eps_rdp):
        return math.inf
    return eps_rdp + math.log((alpha - 1.0) / alpha) - (math.log(delta) + math.log(alpha)) / (alpha - 1.0)


@dataclass
class PrivacyLedger:
    """Accumulated per-order RDP budget across composed rounds."""

    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    eps_by_alpha: dict = field(default_factory=dict)
    rounds_composed: int = 0

    def __post_init__(self):
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)
        for a in self.alpha_grid:
            self.eps_by_alpha.setdefault(a, 0.0)

    def compose_round(self, sigma_effective: float):
        """Charge one Gaussian release at the given effective multiplier."""
        for a in self.alpha_grid:
            self.eps_by_alpha[a] += rdp_per_round(a, sigma_effective)
        self.rounds_composed += 1

    def best_eps(self, delta: float):
        """(min over the grid of the converted eps', its alpha); ties pick smaller alpha."""
        best_alpha, best = None, math.inf
        for a in self.alpha_grid:
            candidate = to_eps_delta(a, self.eps_by_alpha[a], delta)
            if candidate < best:
                best_alpha, best = a, candidate
        if best_alpha is None:
            best_alpha = self.alpha_grid[0]
        return best, best_alpha

    def report_eps(self, delta: float):
        """best_eps clamped at 0 for reporting; privacy is never better than perfect."""
        eps, alpha = self.best_eps(delta)
        return max(0.0, eps), alpha
