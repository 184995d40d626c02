"""Source-free Maxwell evolution in curvilinear coordinates, plus the
structural verifications that make the Hamiltonian embedding legitimate.

The evolved state is q = (E^1,E^2,E^3,H^1,H^2,H^3), contravariant components
on a periodic grid.  The right-hand side is, per node,

    dE^i/dt =  c (eps^-1)^i_l (1/sqrt g) e^{ljk} d_j (g_km H^m)
    dH^i/dt = -c (mu^-1)^i_l  (1/sqrt g) e^{ljk} d_j (g_km E^m)

with e^{ljk} the permutation symbol (the 1/sqrt g weight written separately,
so no double counting) and d_j the periodic central difference.  Components
under the derivative are lowered with the chart metric first; that is the
only reading under which the contravariant evolution reduces to the familiar
covariant curl equations in a general chart.

Three verifications live here:

* `verify_redundancy`: the discrete time derivative of both weighted
  divergences vanishes identically, computed two ways (chain rule through
  the operator, and the telescoping sum of mixed second differences).  This
  is exact up to rounding because stencils along different axes commute.
* `hessian_of_lagrangian` / `irregularity_report`: the velocity Hessian of
  the vacuum electromagnetic Lagrangian density has an identically zero row
  and column (the scalar-potential velocity never enters), hence zero
  determinant: the standard obstruction to a direct Legendre transform, and
  the reason the doubled construction is used instead.
* `continuum_adjoint_reference`: the continuum variational formula for the
  momentum flow, discretized independently, agrees with the exact discrete
  transpose to O(h^2) on smooth momenta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprlang
from .doubling import EvolutionOperator
from .geometry import PERMUTATIONS, Chart, sample_chart
from .grid import Grid3, _diff
from .media import Medium, sample_medium_on_grid
from .report import CheckReport

FOUR_PI = 4.0 * math.pi


def _matvec(M, V):
    """Pointwise 3x3 times 3-vector over the lattice: out_i = M[i,j] V_j."""
    return np.einsum("ij...,j...->i...", M, V)


def _matvec_t(M, V):
    """Pointwise transposed product: out_i = M[j,i] V_j."""
    return np.einsum("ji...,j...->i...", M, V)


class MaxwellOperator(EvolutionOperator):
    """Matrix-free evolution operator for one chart/medium/grid combination.

    `apply` realizes the curl system above; `apply_transpose` is its exact
    transpose under the flat lattice inner product, assembled by transposing
    each linear stage in reverse order.  The permutation-symbol curl is its
    own flat transpose on a periodic grid (each difference operator is
    antisymmetric and the symbol's antisymmetry supplies the second sign
    flip), so the same curl routine serves both directions.
    """

    def __init__(self, chart: Chart, medium: Medium, grid: Grid3,
                 c: float = 1.0, stencil_order: int = 2):
        if not c > 0:
            raise ValueError("light speed c must be positive")
        if stencil_order not in (2, 4):
            raise ValueError("stencil order must be 2 or 4")
        self.chart = chart
        self.medium = medium
        self.grid = grid
        self.c = float(c)
        self.stencil_order = stencil_order
        self.geom = sample_chart(chart, grid)
        self.med = sample_medium_on_grid(medium, grid)
        # constitutive inverses with c folded in once
        self._eci = self.c * self.med.eps_inv
        self._mci = self.c * self.med.mu_inv

    def _curl(self, X):
        """Permutation-symbol curl: out^l = e_{ljk} d_j X_k (no metric weight)."""
        d = lambda f, a: _diff(f, a, self.grid.spacing[a], self.stencil_order)
        return np.stack([
            d(X[2], 1) - d(X[1], 2),
            d(X[0], 2) - d(X[2], 0),
            d(X[1], 0) - d(X[0], 1),
        ])

    def apply(self, q, t: float = 0.0):
        g = self.geom
        E_cov = _matvec(g.g_lower, q[:3])
        H_cov = _matvec(g.g_lower, q[3:])
        e_dot = _matvec(self._eci, g.inv_sqrt_det * self._curl(H_cov))
        h_dot = -_matvec(self._mci, g.inv_sqrt_det * self._curl(E_cov))
        return np.concatenate([e_dot, h_dot])

    def apply_transpose(self, p, t: float = 0.0):
        g = self.geom
        u_e = g.inv_sqrt_det * _matvec_t(self._eci, p[:3])
        u_h = g.inv_sqrt_det * _matvec_t(self._mci, p[3:])
        out_h = _matvec(g.g_lower, self._curl(u_e))
        out_e = -_matvec(g.g_lower, self._curl(u_h))
        return np.concatenate([out_e, out_h])

    # --- diagnostics ------------------------------------------------------

    def _weighted_divergence(self, V):
        g = self.geom
        acc = np.zeros(self.grid.shape)
        for a in range(3):
            acc += _diff(g.sqrt_det * V[a], a, self.grid.spacing[a],
                         self.stencil_order)
        return g.inv_sqrt_det * acc

    def inductions(self, q):
        """Pointwise constitutive map: D^i = eps^i_j E^j, B^i = mu^i_j H^j."""
        return _matvec(self.med.eps, q[:3]), _matvec(self.med.mu, q[3:])

    def constraint_norms(self, q):
        """Max norms of the weighted divergences of B and of D."""
        D, B = self.inductions(q)
        div_b = float(np.max(np.abs(self._weighted_divergence(B))))
        div_d = float(np.max(np.abs(self._weighted_divergence(D))))
        return div_b, div_d

    def energy(self, q):
        """Field energy (1/8 pi) sum (E_i D^i + H_i B^i) sqrt(g) per cell volume."""
        D, B = self.inductions(q)
        E_cov = _matvec(self.geom.g_lower, q[:3])
        H_cov = _matvec(self.geom.g_lower, q[3:])
        density = np.sum(E_cov * D + H_cov * B, axis=0)
        return self.grid.cell_volume / (2.0 * FOUR_PI) \
            * float(np.sum(self.geom.sqrt_det * density))


def build_maxwell_operator(chart, medium, grid, c=1.0, stencil_order=2):
    return MaxwellOperator(chart, medium, grid, c, stencil_order)


def verify_redundancy(op: MaxwellOperator, q) -> CheckReport:
    """Both divergence constraints are redundant: their time derivative is a
    telescoping sum of commuting mixed differences, hence zero to rounding.

    Route (a) follows the chain rule through the operator (divergence of the
    constitutive image of the evolved blocks); route (b) forms the mixed
    second differences of the covariant components directly.
    """
    q = np.asarray(q, float)
    qd = op.apply(q)
    D_dot, B_dot = op.inductions(qd)
    chain_b = float(np.max(np.abs(op._weighted_divergence(B_dot))))
    chain_d = float(np.max(np.abs(op._weighted_divergence(D_dot))))

    d = lambda f, a: _diff(f, a, op.grid.spacing[a], op.stencil_order)

    def telescope(X):
        return (d(d(X[2], 1), 0) - d(d(X[1], 2), 0)
                + d(d(X[0], 2), 1) - d(d(X[2], 0), 1)
                + d(d(X[1], 0), 2) - d(d(X[0], 1), 2))

    E_cov = _matvec(op.geom.g_lower, q[:3])
    H_cov = _matvec(op.geom.g_lower, q[3:])
    mixed_e = float(np.max(np.abs(telescope(E_cov))))
    mixed_h = float(np.max(np.abs(telescope(H_cov))))

    q_scale = float(np.max(np.abs(q))) if q.size else 0.0
    sqrtg_max = float(np.max(op.geom.sqrt_det))
    tol = 1e-11 * q_scale * max(1.0, sqrtg_max) * max(1.0, op.c)
    worst = max(chain_b, chain_d, mixed_e, mixed_h)
    return CheckReport(
        name="divergence redundancy",
        passed=(worst <= tol),
        metrics={
            "ddt_div_b_chain": chain_b,
            "ddt_div_d_chain": chain_d,
            "mixed_partials_e": mixed_e,
            "mixed_partials_h": mixed_h,
            "tolerance": tol,
        },
        lines=["d/dt of the weighted divergences, chain rule vs telescoping sum"],
    )


# --- Lagrangian velocity-Hessian probe --------------------------------------

@dataclass
class LagrangianProbe:
    """A point in (potential-velocity, potential-gradient) space.

    a_dot holds the four velocities (scalar potential first), a_grad the
    spatial gradients d_i A^alpha as a 4x3 array.  fd_step is the base step
    for the second differences; it is multiplied by c internally because the
    velocities enter the density only through a_dot / c.
    """

    a_dot: np.ndarray
    a_grad: np.ndarray
    fd_step: float = 1e-3

    def __post_init__(self):
        self.a_dot = np.asarray(self.a_dot, float).reshape(4)
        self.a_grad = np.asarray(self.a_grad, float).reshape(4, 3)
        if not (np.all(np.isfinite(self.a_dot)) and np.all(np.isfinite(self.a_grad))):
            raise ValueError("probe entries must be finite")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


def lagrangian_density(a_dot, a_grad, c: float = 1.0) -> float:
    """Vacuum density (E^2 - B^2)/(8 pi) in Cartesian coordinates.

    E_i = -d_i A^0 - a_dot_i / c and B is the curl of the spatial potential,
    assembled from the probe's gradient table.  Quadratic in the velocities,
    and the scalar-potential velocity a_dot[0] never appears.
    """
    a_dot = np.asarray(a_dot, float)
    g = np.asarray(a_grad, float)
    E = -g[0] - a_dot[1:] / c
    B = np.array([
        g[3, 1] - g[2, 2],
        g[1, 2] - g[3, 0],
        g[2, 0] - g[1, 1],
    ])
    return float((E @ E - B @ B) / (2.0 * FOUR_PI))


def hessian_of_lagrangian(probe: LagrangianProbe, c: float = 1.0) -> np.ndarray:
    """4x4 second-derivative matrix of the density in the four velocities.

    Central second differences; exact for this quadratic density up to
    rounding, so the step only controls conditioning.
    """
    steps = np.full(4, probe.fd_step * c)
    base = probe.a_dot
    L0 = lagrangian_density(base, probe.a_grad, c)

    def L_at(delta):
        return lagrangian_density(base + delta, probe.a_grad, c)

    H = np.empty((4, 4))
    for alpha in range(4):
        e_a = np.zeros(4)
        e_a[alpha] = steps[alpha]
        H[alpha, alpha] = (L_at(e_a) - 2.0 * L0 + L_at(-e_a)) / steps[alpha] ** 2
        for beta in range(alpha + 1, 4):
            e_b = np.zeros(4)
            e_b[beta] = steps[beta]
            mixed = (L_at(e_a + e_b) - L_at(e_a - e_b)
                     - L_at(-e_a + e_b) + L_at(-e_a - e_b)) \
                / (4.0 * steps[alpha] * steps[beta])
            H[alpha, beta] = H[beta, alpha] = mixed
    return H


def _fixed_probe():
    a_dot = np.array([0.7, -0.3, 0.5, 0.2])
    a_grad = np.array([
        [0.11, -0.42, 0.23],
        [0.31, 0.05, -0.17],
        [-0.26, 0.44, 0.08],
        [0.14, -0.09, 0.37],
    ])
    return LagrangianProbe(a_dot=a_dot, a_grad=a_grad)


def irregularity_report(c: float = 1.0) -> CheckReport:
    """The electromagnetic Lagrangian is irregular: velocity Hessian row and
    column 0 vanish and the determinant is zero, for every probe point.
    """
    if not c > 0:
        raise ValueError("light speed c must be positive")
    rng = np.random.default_rng(7)
    probes = [_fixed_probe()]
    for _ in range(10):
        probes.append(LagrangianProbe(a_dot=rng.uniform(-1, 1, 4),
                                      a_grad=rng.uniform(-1, 1, (4, 3))))

    expected_block = np.eye(3) / (FOUR_PI * c * c)
    worst_edge = worst_det = worst_block = 0.0
    hessians = []
    for probe in probes:
        H = hessian_of_lagrangian(probe, c)
        hessians.append(H)
        worst_edge = max(worst_edge, float(np.max(np.abs(H[0, :]))),
                         float(np.max(np.abs(H[:, 0]))))
        block = H[1:, 1:]
        block_scale = max(float(np.max(np.abs(block))), 1e-300)
        worst_det = max(worst_det, abs(float(np.linalg.det(H))) / block_scale ** 3)
        worst_block = max(worst_block, float(
            np.max(np.abs(block - expected_block)) / np.max(np.abs(expected_block))))

    passed = worst_edge <= 1e-8 and worst_det <= 1e-8 and worst_block <= 1e-6
    lines = [f"velocity Hessian at the fixed probe (c = {c:g}):"]
    lines += ["  [" + "  ".join(f"{v: .6e}" for v in row) + "]" for row in hessians[0]]
    lines.append("row/column 0 must vanish; spatial block must be I/(4 pi c^2)")
    report = CheckReport(
        name="lagrangian irregularity",
        passed=bool(passed),
        metrics={
            "max_row0_col0_entry": worst_edge,
            "max_scaled_determinant": worst_det,
            "spatial_block_relative_error": worst_block,
        },
        lines=lines,
    )
    report.hessians = hessians
    return report


# --- continuum adjoint consistency ------------------------------------------

def _metric_gradient(chart: Chart, grid: Grid3):
    """Pointwise d_j g_ka lattices via high-accuracy coordinate perturbation.

    These are coefficient derivatives (closed-form functions of position),
    not grid derivatives, so the step is decoupled from the grid spacing.
    """
    coords = grid.coords()
    dg = np.empty((3, 3, 3) + grid.shape)  # [j, k, a]
    for j in range(3):
        delta = 1e-6 * max(1.0, float(np.max(np.abs(coords[j]))))
        hi = list(coords)
        lo = list(coords)
        hi[j] = coords[j] + delta
        lo[j] = coords[j] - delta
        for k in range(3):
            for a in range(k, 3):
                comp = chart.component(k, a)
                val = (exprlang.evaluate_on_grid(comp, *hi)
                       - exprlang.evaluate_on_grid(comp, *lo)) / (2.0 * delta)
                dg[j, k, a] = dg[j, a, k] = val
    return dg


def continuum_adjoint_reference(op: MaxwellOperator, p) -> np.ndarray:
    """Momentum flow from the variational formula, discretized independently.

    For each coordinate slot the continuum momentum equation reads

        p'_n = - p_m (df^m/dq^n) + d_j ( p_m df^m/d(d_j q^n) )

    with the coefficient fields evaluated pointwise (the direct-dependence
    term is nonzero in curvilinear charts, where the metric enters under the
    field derivative).  The outer d_j uses the operator's grid stencil.  On
    smooth p this agrees with -L^T p to O(h^2); the discrete transpose is
    exact, this formula is its continuum shadow.
    """
    p = np.asarray(p, float)
    g = op.geom
    grid = op.grid
    dg = _metric_gradient(op.chart, grid)

    # W[i, a, j] = coeff of d_j q in f^i rows; V[i, a] = direct-dependence coeff
    shape = grid.shape
    W_e = np.zeros((3, 3, 3) + shape)
    V_e = np.zeros((3, 3) + shape)
    W_h = np.zeros((3, 3, 3) + shape)
    V_h = np.zeros((3, 3) + shape)
    for l, j, k, sign in PERMUTATIONS:
        for i in range(3):
            ecoef = op._eci[i, l] * g.inv_sqrt_det * sign
            mcoef = op._mci[i, l] * g.inv_sqrt_det * sign
            for a in range(3):
                W_e[i, a, j] += ecoef * g.g_lower[k, a]
                W_h[i, a, j] -= mcoef * g.g_lower[k, a]
                V_e[i, a] += ecoef * dg[j, k, a]
                V_h[i, a] -= mcoef * dg[j, k, a]

    d = lambda f, a: _diff(f, a, grid.spacing[a], op.stencil_order)
    p_e, p_h = p[:3], p[3:]
    out = np.zeros_like(p)
    for a in range(3):
        flux_h = np.zeros(shape)
        flux_e = np.zeros(shape)
        for j in range(3):
            flux_h += d(np.einsum("i...,i...->...", p_e, W_e[:, a, j]), j)
            flux_e += d(np.einsum("i...,i...->...", p_h, W_h[:, a, j]), j)
        out[3 + a] = flux_h - np.einsum("i...,i...->...", p_e, V_e[:, a])
        out[a] = flux_e - np.einsum("i...,i...->...", p_h, V_h[:, a])
    return out


def adjoint_consistency_report(chart_factory, medium_factory, grid_factory,
                               sizes=(16, 32), c: float = 1.0,
                               min_rate: float = 1.9) -> CheckReport:
    """Refinement study: |(-L^T p) - variational formula| should drop as O(h^2)."""
    errors = []
    for n in sizes:
        grid = grid_factory(n)
        op = MaxwellOperator(chart_factory(), medium_factory(), grid, c=c)
        x1, x2, x3 = grid.coords()
        u = [2.0 * math.pi * (x - o) / e
             for x, o, e in zip((x1, x2, x3), grid.origin, grid.extent)]
        p = np.stack([
            np.sin(u[0]) * np.cos(u[1]),
            np.cos(u[1]) * np.sin(u[2]),
            np.sin(u[0] + u[2]),
            np.cos(u[0]) * np.sin(u[1]),
            np.sin(u[1] + u[2]),
            np.cos(u[2]) * np.cos(u[0]),
        ])
        ref = continuum_adjoint_reference(op, p)
        err = float(np.max(np.abs(-op.apply_transpose(p) - ref)))
        errors.append(err)
    rate = math.log2(errors[0] / errors[-1]) / math.log2(sizes[-1] / sizes[0])
    return CheckReport(
        name="continuum adjoint consistency",
        passed=(rate >= min_rate),
        metrics={f"error_n{n}": e for n, e in zip(sizes, errors)}
        | {"convergence_rate": rate, "required_rate": min_rate},
        lines=["-L^T p vs the discretized variational momentum flow on smooth p"],
    )
