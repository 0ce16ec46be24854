"""Flat parameter vectors with a named layer layout.

The whole pipeline treats a model as one flat float64 vector; the layout
maps contiguous index ranges to layer names so per-layer operations
(min-max score normalization, reporting) can address them.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


@dataclass(frozen=True)
class LayerLayout:
    """Ordered (name, offset, length) segments covering [0, total_params)."""

    layers: tuple  # of (name: str, offset: int, length: int)
    total_params: int

    def __post_init__(self):
        expected = 0
        for name, offset, length in self.layers:
            if offset != expected:
                raise ShapeError(f"layer {name!r} offset {offset} != {expected}")
            if length < 1:
                raise ShapeError(f"layer {name!r} has non-positive length")
            expected = offset + length
        if expected != self.total_params:
            raise ShapeError(
                f"layer lengths sum to {expected}, total_params is {self.total_params}"
            )

    @classmethod
    def from_sizes(cls, named_sizes) -> "LayerLayout":
        layers = []
        offset = 0
        for name, length in named_sizes:
            layers.append((name, offset, int(length)))
            offset += int(length)
        return cls(layers=tuple(layers), total_params=offset)

    def slice_of(self, name: str) -> slice:
        for lname, offset, length in self.layers:
            if lname == name:
                return slice(offset, offset + length)
        raise KeyError(name)

    def layer_of(self, index: int) -> str:
        for name, offset, length in self.layers:
            if offset <= index < offset + length:
                return name
        raise IndexError(index)

    def names(self):
        return [name for name, _, _ in self.layers]


@dataclass
class LayeredParameters:
    """Flat float64 weight vector plus its layer layout."""

    values: np.ndarray
    layout: LayerLayout

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.shape[0] != self.layout.total_params:
            raise ShapeError(
                f"values length {self.values.shape} != layout total {self.layout.total_params}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("parameter vector contains non-finite entries")

    def copy(self) -> "LayeredParameters":
        return LayeredParameters(self.values.copy(), self.layout)

    def view(self, name: str) -> np.ndarray:
        return self.values[self.layout.slice_of(name)]

    def with_values(self, values: np.ndarray) -> "LayeredParameters":
        return LayeredParameters(np.asarray(values, dtype=np.float64), self.layout)

    def __len__(self) -> int:
        return self.layout.total_params
