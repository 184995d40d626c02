"""Charts, metric samples, and weighted Levi-Civita machinery.

A chart is a symmetric 3x3 matrix of coefficient expressions g_ij(x).  All
curl/divergence building blocks downstream use only sqrt(det g) weights and
partial derivatives in the holonomic basis, so this module never needs
Christoffel symbols.  Everything here is immutable and pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprlang
from .exprlang import Expr

#: condition-number ceiling before a metric is declared degenerate
METRIC_COND_LIMIT = 1e12

# even/odd permutations of (0,1,2) with their signs
PERMUTATIONS = (
    (0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0),
    (0, 2, 1, -1.0), (2, 1, 0, -1.0), (1, 0, 2, -1.0),
)

_PERM_SIGN = {(i, j, k): s for i, j, k, s in PERMUTATIONS}


class DegenerateMetricError(Exception):
    """Metric is not SPD (or is catastrophically ill conditioned) at a point."""

    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message += f" at point {tuple(float(v) for v in point)}"
        super().__init__(message)


@dataclass(frozen=True)
class Chart:
    """Time-independent coordinate chart given by covariant metric components.

    Only the six independent components are stored; symmetry g_ij = g_ji is
    structural.  Component order: (g11, g12, g13, g22, g23, g33).
    """

    name: str
    g_components: tuple  # 6 Expr nodes

    _IDX = {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 3, (1, 2): 4, (2, 2): 5}

    def component(self, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        return self.g_components[self._IDX[(i, j)]]


def cartesian() -> Chart:
    one, zero = exprlang.Num(1.0), exprlang.Num(0.0)
    return Chart("cartesian", (one, zero, zero, one, zero, one))


def cylindrical() -> Chart:
    """g = diag(1, x1^2, 1) with x1 the radius; valid only for x1 > 0."""
    one, zero = exprlang.Num(1.0), exprlang.Num(0.0)
    r2 = exprlang.parse("x1^2")
    return Chart("cylindrical", (one, zero, zero, r2, zero, one))


def chart_from_strings(name, entries) -> Chart:
    """Chart from six expression strings (g11, g12, g13, g22, g23, g33)."""
    return Chart(name, tuple(exprlang.parse(s) for s in entries))


BUILTIN_CHARTS = {"cartesian": cartesian, "cylindrical": cylindrical}


@dataclass(frozen=True)
class MetricSample:
    g_lower: np.ndarray  # (3,3) SPD
    g_upper: np.ndarray  # inverse
    sqrt_det: float


def inv3x3(A):
    """Closed-form adjugate inverse of 3x3 matrices stored as A[i][j][...].

    Works on plain (3,3) matrices and on (3,3,...) stacks of pointwise
    tensors alike.  Returns (inverse, determinant); no conditioning checks.
    """
    a, b, c = A[0]
    d, e, f = A[1]
    g, h, i = A[2]
    c00 = e * i - f * h
    c01 = c * h - b * i
    c02 = b * f - c * e
    c10 = f * g - d * i
    c11 = a * i - c * g
    c12 = c * d - a * f
    c20 = d * h - e * g
    c21 = b * g - a * h
    c22 = a * e - b * d
    det = a * c00 + b * c10 + c * c20
    inv = np.stack([
        np.stack([c00, c01, c02]),
        np.stack([c10, c11, c12]),
        np.stack([c20, c21, c22]),
    ]) / det
    return inv, det


def _spd_or_raise(g, point=None):
    """Sylvester + conditioning test; accepts a (3,3) symmetric matrix."""
    eig = np.linalg.eigvalsh(g)
    if eig[0] <= 0.0 or np.linalg.det(g) <= 0.0:
        raise DegenerateMetricError("metric is not positive definite", point)
    if eig[-1] / eig[0] > METRIC_COND_LIMIT:
        raise DegenerateMetricError(
            f"metric condition number {eig[-1] / eig[0]:.3e} exceeds "
            f"{METRIC_COND_LIMIT:.0e}", point)


def metric_at(chart: Chart, point) -> MetricSample:
    """Evaluate g_ij, its inverse and sqrt(det g) at one point."""
    g = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            g[i, j] = g[j, i] = exprlang.evaluate(chart.component(i, j), point)
    _spd_or_raise(g, point)
    g_up, det = inv3x3(g)
    return MetricSample(g_lower=g, g_upper=g_up, sqrt_det=float(np.sqrt(det)))


def levi_civita(sqrt_det: float, variance: str, i: int, j: int, k: int) -> float:
    """Weighted alternating tensor: sqrt(g)*sgn for 'lower', sgn/sqrt(g) for 'upper'."""
    if not sqrt_det > 0.0:
        raise ValueError("sqrt_det must be positive")
    if variance not in ("upper", "lower"):
        raise ValueError("variance must be 'upper' or 'lower'")
    for idx in (i, j, k):
        if idx not in (1, 2, 3):
            raise ValueError("indices must lie in {1,2,3}")
    sign = _PERM_SIGN.get((i - 1, j - 1, k - 1), 0.0)
    if sign == 0.0:
        return 0.0
    return sqrt_det * sign if variance == "lower" else sign / sqrt_det


def lower_index(v_upper, m: MetricSample):
    """v_i = g_ij v^j."""
    return m.g_lower @ np.asarray(v_upper, float)


def raise_index(v_lower, m: MetricSample):
    """v^i = g^ij v_j."""
    return m.g_upper @ np.asarray(v_lower, float)


@dataclass(frozen=True)
class ChartOnGrid:
    """Chart evaluated on every node of a grid (field-shaped tensors)."""

    chart: Chart
    g_lower: np.ndarray     # (3,3,n1,n2,n3)
    g_upper: np.ndarray     # (3,3,n1,n2,n3)
    sqrt_det: np.ndarray    # (n1,n2,n3)
    inv_sqrt_det: np.ndarray


def sample_chart(chart: Chart, grid) -> ChartOnGrid:
    """Evaluate the metric on all grid nodes, validating SPD-ness everywhere."""
    x1, x2, x3 = grid.coords()
    g = np.empty((3, 3) + x1.shape)
    for i in range(3):
        for j in range(i, 3):
            val = exprlang.evaluate_on_grid(chart.component(i, j), x1, x2, x3)
            g[i, j] = g[j, i] = val

    # vectorized Sylvester criterion
    m1 = g[0, 0]
    m2 = g[0, 0] * g[1, 1] - g[0, 1] ** 2
    g_up, det = inv3x3(g)
    bad = (m1 <= 0) | (m2 <= 0) | (det <= 0)
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), x1.shape)
        pt = (x1[idx], x2[idx], x3[idx])
        raise DegenerateMetricError(
            f"metric is not positive definite at node {tuple(map(int, idx))}", pt)
    eig = np.linalg.eigvalsh(np.moveaxis(g, (0, 1), (-2, -1)))
    cond = eig[..., -1] / eig[..., 0]
    if np.any(cond > METRIC_COND_LIMIT):
        idx = np.unravel_index(int(np.argmax(cond)), x1.shape)
        pt = (x1[idx], x2[idx], x3[idx])
        raise DegenerateMetricError(
            f"metric condition number {cond[idx]:.3e} exceeds "
            f"{METRIC_COND_LIMIT:.0e} at node {tuple(map(int, idx))}", pt)

    sqrt_det = np.sqrt(det)
    return ChartOnGrid(chart=chart, g_lower=g, g_upper=g_up,
                       sqrt_det=sqrt_det, inv_sqrt_det=1.0 / sqrt_det)
