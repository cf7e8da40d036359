"""
Uniform 1D grids and nodal grid functions.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from errors import InvalidArgumentError


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [a, b] with n_cells cells and n_cells + 1 nodes."""

    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not self.a < self.b:
            raise InvalidArgumentError(f"grid needs a < b, got [{self.a}, {self.b}]")
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise InvalidArgumentError(f"grid needs n_cells >= 4, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @cached_property
    def x(self) -> np.ndarray:
        nodes = self.a + self.h * np.arange(self.n_nodes)
        nodes[-1] = self.b
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid weights: h inside, h/2 at the two boundary nodes."""
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.setflags(write=False)
        return w

    def to_dict(self):
        return {"a": self.a, "b": self.b, "n_cells": self.n_cells}


@dataclass(frozen=True)
class Field:
    """Nodal values of u on a grid at a given time. Values are read-only."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)
    time_stamp: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_nodes,):
            raise InvalidArgumentError(
                f"field needs {self.grid.n_nodes} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def face_gradients(self) -> np.ndarray:
        """(u_{i+1} - u_i)/h on the n_cells faces."""
        return np.diff(self.values) / self.grid.h

    def with_values(self, values: np.ndarray, time_stamp: float) -> "Field":
        return Field(self.grid, values, time_stamp)


def sample(grid: Grid1D, func: Callable[[np.ndarray], np.ndarray], time_stamp: float = 0.0) -> Field:
    """Field of nodal samples func(x)."""
    return Field(grid, np.asarray(func(grid.x), dtype=float), time_stamp)


def constant(grid: Grid1D, value: float, time_stamp: float = 0.0) -> Field:
    return Field(grid, np.full(grid.n_nodes, float(value)), time_stamp)
