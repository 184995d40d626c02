"""Periodic structured grid, discrete fields, and difference operators.

All six field components live at the nodes of one periodic lattice
(colocated, unstaggered).  Derivatives are central differences with periodic
wraparound, which makes two identities hold to rounding: discrete summation
by parts (sum u * Dv = -sum Du * v) and commutation of stencils along
different axes.  Both are load-bearing for the adjoint construction and the
divergence-redundancy check, which is why colocated central differences are
used instead of a staggered scheme.

The default stencil is the 3-point second-order one; a 5-point fourth-order
stencil is available through the `order` argument wherever a derivative is
taken (the same identities hold for it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry

COMPONENT_NAMES = ("E1", "E2", "E3", "H1", "H2", "H3")

SNAPSHOT_COLUMNS = "x1,x2,x3,E1,E2,E3,H1,H2,H3"


@dataclass(frozen=True)
class Grid3:
    """Periodic box: n_i nodes per axis, node (a,b,c) = origin + (a h1, b h2, c h3)."""

    n1: int
    n2: int
    n3: int
    origin: tuple = (0.0, 0.0, 0.0)
    extent: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for n in (self.n1, self.n2, self.n3):
            if int(n) < 4:
                raise ValueError("grid needs at least 4 points per axis")
        if len(self.origin) != 3 or len(self.extent) != 3:
            raise ValueError("origin and extent must have 3 entries")
        if any(not e > 0 for e in self.extent):
            raise ValueError("extent entries must be positive")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @property
    def spacing(self):
        return tuple(self.extent[a] / self.shape[a] for a in range(3))

    @property
    def cell_volume(self):
        h1, h2, h3 = self.spacing
        return h1 * h2 * h3

    @property
    def num_nodes(self):
        return self.n1 * self.n2 * self.n3

    def axis_points(self, axis: int):
        """Node coordinates along one axis (1-based axis index)."""
        a = axis - 1
        h = self.spacing[a]
        return self.origin[a] + h * np.arange(self.shape[a])

    def coords(self):
        """Full coordinate lattices X1, X2, X3, each of shape (n1,n2,n3)."""
        return np.meshgrid(self.axis_points(1), self.axis_points(2),
                           self.axis_points(3), indexing="ij")


@dataclass
class FieldState:
    """Six contravariant component lattices (E1,E2,E3,H1,H2,H3) on one grid."""

    grid: Grid3
    data: np.ndarray  # (6, n1, n2, n3)

    def __post_init__(self):
        self.data = np.asarray(self.data, float)
        if self.data.shape != (6,) + self.grid.shape:
            raise ValueError(f"field data must have shape {(6,) + self.grid.shape}")

    @classmethod
    def zeros(cls, grid: Grid3):
        return cls(grid, np.zeros((6,) + grid.shape))

    def copy(self):
        return FieldState(self.grid, self.data.copy())

    def validate_finite(self):
        if not np.all(np.isfinite(self.data)):
            comp, *node = np.unravel_index(
                int(np.argmin(np.isfinite(self.data))), self.data.shape)
            raise ValueError(f"non-finite value in component "
                             f"{COMPONENT_NAMES[comp]} at node {tuple(node)}")


def _diff(f, axis0: int, h: float, order: int):
    if order == 2:
        return (np.roll(f, -1, axis0) - np.roll(f, 1, axis0)) / (2.0 * h)
    if order == 4:
        return (8.0 * (np.roll(f, -1, axis0) - np.roll(f, 1, axis0))
                - (np.roll(f, -2, axis0) - np.roll(f, 2, axis0))) / (12.0 * h)
    raise ValueError("stencil order must be 2 or 4")


def partial_deriv(f, axis: int, grid: Grid3, order: int = 2):
    """Periodic central difference of a scalar lattice along axis 1, 2 or 3."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    f = np.asarray(f, float)
    if f.shape != grid.shape:
        raise ValueError(f"lattice shape {f.shape} does not match grid {grid.shape}")
    return _diff(f, axis - 1, grid.spacing[axis - 1], order)


def divergence(B, chart, grid: Grid3, order: int = 2):
    """Weighted divergence (1/sqrt g) sum_a d_a (sqrt g B^a) of contravariant B.

    `chart` may be a Chart (sampled here) or a ChartOnGrid already sampled.
    """
    geom = chart if isinstance(chart, geometry.ChartOnGrid) \
        else geometry.sample_chart(chart, grid)
    B = np.asarray(B, float)
    acc = np.zeros(grid.shape)
    for a in range(3):
        acc += _diff(geom.sqrt_det * B[a], a, grid.spacing[a], order)
    return geom.inv_sqrt_det * acc


def write_snapshot(path, state: FieldState):
    """One node per row: x1,x2,x3,E1..H3; x3 slowest, then x2, x1 fastest."""
    grid = state.grid
    x1, x2, x3 = grid.coords()
    cols = [x1, x2, x3] + [state.data[c] for c in range(6)]
    table = np.column_stack([c.transpose(2, 1, 0).ravel() for c in cols])
    with open(path, "w") as fh:
        fh.write(SNAPSHOT_COLUMNS + "\n")
        np.savetxt(fh, table, fmt="%.17g", delimiter=",")
