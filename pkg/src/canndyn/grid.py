"""Discretization of the truncated size axis.

Everything downstream samples rates and densities on a fixed set of nodes
in [0, s_max] and integrates with composite trapezoid weights.  Trapezoid
is used throughout (rather than a higher-order rule) because cumulative
integrals up to every node are needed constantly, and the composite rule
provides them natively with uniform second-order accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

__all__ = [
    "Grid",
    "GridFunction",
    "build_grid",
    "integrate",
    "cumulative_integral",
    "grid_derivative",
]


def _frozen_array(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    """Nodes 0 = s_0 < ... < s_N = s_max with composite trapezoid weights."""

    nodes: np.ndarray
    weights: np.ndarray
    spacing_mode: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen_array(self.nodes))
        object.__setattr__(self, "weights", _frozen_array(self.weights))
        if self.nodes.ndim != 1 or self.nodes.size < 2:
            raise ValueError("grid needs at least two nodes")
        if self.nodes[0] != 0.0 or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("nodes must start at 0 and increase strictly")
        if self.weights.shape != self.nodes.shape:
            raise ValueError("one quadrature weight per node")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def s_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    def function(self, values) -> "GridFunction":
        """Wrap an array, scalar, or callable of s as a GridFunction."""
        if callable(values):
            values = values(self.nodes)
        values = np.broadcast_to(np.asarray(values, dtype=float), self.nodes.shape)
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros_like(self.nodes))


@dataclass(frozen=True)
class GridFunction:
    """A function sampled at the grid nodes.  Immutable, always finite."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen_array(self.values)
        object.__setattr__(self, "values", vals)
        if vals.shape != self.grid.nodes.shape:
            raise ValueError("values length must equal node count")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function contains non-finite values")

    def l1_norm(self) -> float:
        return float(self.grid.weights @ np.abs(self.values))


def build_grid(s_max: float, n_cells: int, spacing_mode: str = "uniform",
               ratio: float | None = None) -> Grid:
    """Build a grid of n_cells cells on [0, s_max].

    "uniform" spaces nodes evenly; "graded" makes cell widths grow by the
    given ratio, concentrating nodes near s = 0 where steady profiles have
    their boundary layer (ratio > 1 concentrates at 0).
    """
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    if n_cells < 2:
        raise ValueError("need at least 2 cells")
    if spacing_mode == "uniform":
        nodes = np.linspace(0.0, s_max, n_cells + 1)
    elif spacing_mode == "graded":
        if ratio is None or ratio <= 0 or ratio == 1.0:
            raise ValueError("graded spacing needs ratio > 0 and != 1")
        h1 = s_max * (ratio - 1.0) / (ratio ** n_cells - 1.0)
        widths = h1 * ratio ** np.arange(n_cells)
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = s_max  # kill cumulative roundoff at the right end
    else:
        raise ValueError(f"unknown spacing mode {spacing_mode!r}")
    d = np.diff(nodes)
    weights = np.empty_like(nodes)
    weights[0] = d[0] / 2.0
    weights[-1] = d[-1] / 2.0
    weights[1:-1] = (d[:-1] + d[1:]) / 2.0
    return Grid(nodes, weights, spacing_mode)


def integrate(f: GridFunction) -> float:
    """Quadrature of f over [0, s_max]."""
    return float(f.grid.weights @ f.values)


def cumulative_integral(f: GridFunction) -> GridFunction:
    """Trapezoidal cumulative integral; zero at the first node."""
    vals = cumulative_trapezoid(f.values, f.grid.nodes, initial=0.0)
    return GridFunction(f.grid, vals)


def grid_derivative(f: GridFunction) -> GridFunction:
    """Second-order derivative: central interior, one-sided at the ends."""
    if f.grid.n_nodes < 3:
        raise ValueError("derivative needs at least 3 nodes")
    vals = np.gradient(f.values, f.grid.nodes, edge_order=2)
    return GridFunction(f.grid, vals)
