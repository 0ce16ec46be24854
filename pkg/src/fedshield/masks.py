"""Index-set masks over the flat parameter space, plus their wire form."""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import MaskUniverseError


@dataclass(frozen=True)
class SensitivityMask:
    """Sorted, duplicate-free parameter indices within a universe of given size."""

    indices: np.ndarray
    universe: int

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64))
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.universe):
            raise MaskUniverseError("index outside universe")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_bool(cls, flags: np.ndarray) -> "SensitivityMask":
        flags = np.asarray(flags, dtype=bool)
        return cls(np.flatnonzero(flags), flags.shape[0])

    @classmethod
    def empty(cls, universe: int) -> "SensitivityMask":
        return cls(np.empty(0, dtype=np.int64), universe)

    @classmethod
    def full(cls, universe: int) -> "SensitivityMask":
        return cls(np.arange(universe, dtype=np.int64), universe)

    def to_bool(self) -> np.ndarray:
        flags = np.zeros(self.universe, dtype=bool)
        flags[self.indices] = True
        return flags

    def _check(self, other: "SensitivityMask"):
        if self.universe != other.universe:
            raise MaskUniverseError(
                f"universe mismatch: {self.universe} vs {other.universe}"
            )

    def union(self, other: "SensitivityMask") -> "SensitivityMask":
        self._check(other)
        return SensitivityMask(np.union1d(self.indices, other.indices), self.universe)

    def intersection(self, other: "SensitivityMask") -> "SensitivityMask":
        self._check(other)
        return SensitivityMask(np.intersect1d(self.indices, other.indices), self.universe)

    def difference(self, other: "SensitivityMask") -> "SensitivityMask":
        self._check(other)
        return SensitivityMask(
            np.setdiff1d(self.indices, other.indices, assume_unique=True), self.universe
        )

    def complement(self) -> "SensitivityMask":
        return SensitivityMask.from_bool(~self.to_bool())

    def ratio(self) -> float:
        return len(self.indices) / self.universe if self.universe else 0.0

    def __len__(self):
        return len(self.indices)

    def __contains__(self, index):
        pos = np.searchsorted(self.indices, index)
        return pos < len(self.indices) and self.indices[pos] == index

    def __eq__(self, other):
        return (
            isinstance(other, SensitivityMask)
            and self.universe == other.universe
            and np.array_equal(self.indices, other.indices)
        )

    def __hash__(self):
        return hash((self.universe, self.indices.tobytes()))


def mask_to_wire(mask: SensitivityMask) -> bytes:
    """Length-prefixed sorted u32 little-endian index list."""
    if mask.universe > 0xFFFFFFFF:
        raise MaskUniverseError("universe too large for 32-bit wire form")
    count = len(mask.indices)
    return struct.pack("<II", mask.universe, count) + mask.indices.astype("<u4").tobytes()


def mask_from_wire(blob: bytes) -> SensitivityMask:
    universe, count = struct.unpack_from("<II", blob, 0)
    idx = np.frombuffer(blob, dtype="<u4", count=count, offset=8).astype(np.int64)
    return SensitivityMask(idx, universe)
