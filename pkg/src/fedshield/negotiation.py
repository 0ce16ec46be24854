"""Mask negotiation: consensus encrypted zone, personalized and noise zones.

The aggregation server collects every participant's local mask, keeps the
indices voted for by at least a fraction rho of participants as the shared
encrypted zone, and broadcasts it. Each client then derives its private
personalized zone (its own votes that missed consensus) and treats the
rest of the parameter space as the noise zone.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import MaskUniverseError, ParameterError
from .masks import SensitivityMask


@dataclass(frozen=True)
class ZonePartition:
    """One client's disjoint cover of the parameter space."""

    enc: SensitivityMask
    pers: SensitivityMask
    noise: SensitivityMask
    universe: int

    def ratios(self):
        return (self.enc.ratio(), self.pers.ratio(), self.noise.ratio())


def _vote_threshold(rho: float, k: int) -> int:
    """Smallest vote count whose fraction of k meets or exceeds rho.

    count/k >= rho  <=>  count >= rho*k, evaluated with an integer snap so
    that float products like 0.1 * 10 land on the intended boundary.
    """
    target = rho * k
    nearest = round(target)
    if abs(target - nearest) <= 1e-9 * max(1.0, k):
        return int(nearest)
    return math.ceil(target)


def consensus_mask(local_masks, rho: float) -> SensitivityMask:
    """Indices marked sensitive by at least a rho fraction of participants."""
    if not local_masks:
        raise ParameterError("need at least one local mask")
    if not (0.0 < rho <= 1.0):
        raise ParameterError("rho must be in (0, 1]")
    universe = local_masks[0].universe
    for m in local_masks:
        if m.universe != universe:
            raise MaskUniverseError("local masks disagree on universe size")
    votes = np.zeros(universe, dtype=np.int64)
    for m in local_masks:
        votes[m.indices] += 1
    needed = max(1, _vote_threshold(rho, len(local_masks)))
    return SensitivityMask(np.flatnonzero(votes >= needed), universe)


def personalized_mask(local: SensitivityMask, enc: SensitivityMask) -> SensitivityMask:
    return local.difference(enc)


def noise_mask(universe: int, enc: SensitivityMask, pers: SensitivityMask) -> SensitivityMask:
    return enc.union(pers).complement()


def negotiate(local_masks, rho: float):
    """Per-client three-zone partitions for one round.

    Returns (enc, [ZonePartition per client]) in the order the masks were given.
    """
    enc = consensus_mask(local_masks, rho)
    partitions = []
    for local in local_masks:
        pers = personalized_mask(local, enc)
        partitions.append(
            ZonePartition(
                enc=enc,
                pers=pers,
                noise=noise_mask(local.universe, enc, pers),
                universe=local.universe,
            )
        )
    return enc, partitions
