"""Doubled phase space over an arbitrary first-order evolution operator.

Any linear first-order system q' = f(q) on the grid can be embedded as the
coordinate half of a canonical Hamiltonian system on R^(2s): the state is
xi = (q, p), the bracket is the constant canonical one with block form
Omega = ((0, I), (-I, 0)), and the Hamiltonian is H = sum_nodes p . f(q)
times the cell volume.  The coordinate half of Hamilton's equations then
reproduces q' = f(q) through the very same code path, and the momentum half
is p' = -L^T p with L^T the exact transpose of the discrete operator under
the flat lattice inner product sum_nodes sum_n u_n v_n.

Taking the exact discrete transpose (instead of discretizing a continuum
adjoint formula) is what makes the conservation structure exact here; the
continuum formula is recovered as an O(h^2) consistency check in the test
suite and the `adjoint` CLI check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FieldState, Grid3
from .report import CheckReport


@dataclass
class DoubledState:
    """Coordinates q (contravariant field components) and momenta p on one grid."""

    grid: Grid3
    q: np.ndarray  # (6, n1, n2, n3)
    p: np.ndarray  # (6, n1, n2, n3)

    def __post_init__(self):
        shape = (6,) + self.grid.shape
        self.q = np.asarray(self.q, float)
        self.p = np.asarray(self.p, float)
        if self.q.shape != shape or self.p.shape != shape:
            raise ValueError(f"doubled state arrays must have shape {shape}")

    @classmethod
    def zeros(cls, grid: Grid3):
        shape = (6,) + grid.shape
        return cls(grid, np.zeros(shape), np.zeros(shape))

    @classmethod
    def from_field(cls, state: FieldState, p=None):
        p = np.zeros_like(state.data) if p is None else p
        return cls(state.grid, state.data.copy(), np.asarray(p, float).copy())

    @property
    def q_state(self) -> FieldState:
        return FieldState(self.grid, self.q)

    def copy(self):
        return DoubledState(self.grid, self.q.copy(), self.p.copy())


class EvolutionOperator:
    """Matrix-free linear map with an exact flat-inner-product transpose.

    Subclasses provide `apply` (the discretized right-hand side f) and
    `apply_transpose` (L^T under sum_nodes sum_n u_n v_n) plus the metadata
    attributes grid, chart, medium, c.  Both maps must be linear; the
    defining contract is <p, L q> = <L^T p, q> for all p, q.  Operators are
    immutable and safe to share between threads.

    The time argument is threaded through for generality but every shipped
    operator is autonomous and ignores it.
    """

    grid: Grid3
    c: float

    def apply(self, q: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def apply_transpose(self, p: np.ndarray, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError


def flat_inner(u, v) -> float:
    """Unweighted lattice inner product over all nodes and components."""
    return float(np.sum(np.asarray(u) * np.asarray(v)))


def hamiltonian(op: EvolutionOperator, st: DoubledState, t: float = 0.0) -> float:
    """Cell-volume-weighted sum of p . f(q): the discrete Hamiltonian density integral."""
    return st.grid.cell_volume * flat_inner(st.p, op.apply(st.q, t))


def hamilton_rhs(op: EvolutionOperator, st: DoubledState, t: float = 0.0) -> DoubledState:
    """Both Hamilton groups: q' = f(q) (same code path as `apply`), p' = -L^T p."""
    return DoubledState(st.grid, op.apply(st.q, t), -op.apply_transpose(st.p, t))


def check_first_group_identity(op: EvolutionOperator, q: np.ndarray) -> CheckReport:
    """The coordinate half of the doubled system is the original system, bit for bit."""
    st = DoubledState(op.grid, np.asarray(q, float), np.zeros_like(q))
    diff = hamilton_rhs(op, st).q - op.apply(st.q)
    worst = float(np.max(np.abs(diff))) if diff.size else 0.0
    return CheckReport(
        name="first-group identity",
        passed=(worst == 0.0),
        metrics={"max_abs_difference": worst},
        lines=["q' from the doubled system vs. the raw operator (must be exactly 0)"],
    )


# --- Poisson bracket -------------------------------------------------------

def _fd_gradient(fn, st: DoubledState, fd_step: float, q_mask=None, p_mask=None):
    """Central-difference gradient of a functional of the doubled state.

    Components are perturbed in place (and restored exactly), so `fn` must
    read the state it is handed rather than a cached copy.  Steps are scaled
    by component magnitude.  When a mask is given, only those components are
    probed; the rest of the gradient is left at exact zero.  Skipping is
    exact for the bracket contraction because skipped slots are only ever
    multiplied with exact zeros of the partner gradient.
    """
    grads = []
    for buf, mask in ((st.q.reshape(-1), q_mask), (st.p.reshape(-1), p_mask)):
        g = np.zeros(buf.size)
        idx = range(buf.size) if mask is None else np.flatnonzero(mask)
        for i in idx:
            v = buf[i]
            s = fd_step * max(1.0, abs(v))
            buf[i] = v + s
            hi = fn(st)
            buf[i] = v - s
            lo = fn(st)
            buf[i] = v
            g[i] = (hi - lo) / (2.0 * s)
        grads.append(g)
    return grads[0], grads[1]


def poisson_bracket(A, B, st: DoubledState, fd_step: float = 1e-4) -> float:
    """Canonical bracket {A, B} evaluated at `st` with finite-difference gradients.

    A and B are real-valued callables of a DoubledState.  The gradient of B
    is only evaluated where the gradient of A is nonzero, which changes
    nothing in the contraction and keeps brackets of localized functionals
    cheap.  Raises if a probed functional value is non-finite.
    """
    gAq, gAp = _fd_gradient(A, st, fd_step)
    if not (np.all(np.isfinite(gAq)) and np.all(np.isfinite(gAp))):
        raise ValueError("functional produced a non-finite value while probing")
    if B is A:
        gBq, gBp = gAq, gAp
    else:
        gBq, gBp = _fd_gradient(B, st, fd_step,
                                q_mask=(gAp != 0.0), p_mask=(gAq != 0.0))
        if not (np.all(np.isfinite(gBq)) and np.all(np.isfinite(gBp))):
            raise ValueError("functional produced a non-finite value while probing")
    return float(gAq @ gBp - gAp @ gBq)


def coordinate_functional(kind: str, component: int, node):
    """Functional reading one phase-space coordinate: q^n(node) or p_n(node)."""
    if kind not in ("q", "p"):
        raise ValueError("kind must be 'q' or 'p'")
    node = tuple(node)

    def fn(st: DoubledState) -> float:
        buf = st.q if kind == "q" else st.p
        return float(buf[(component,) + node])

    return fn


# --- generic operator checks ----------------------------------------------

def transpose_contract_report(op: EvolutionOperator, n_pairs: int = 100,
                              seed: int = 0, tol: float = 1e-12) -> CheckReport:
    """Dot-product test <p, Lq> = <L^T p, q> on random pairs."""
    rng = np.random.default_rng(seed)
    shape = (6,) + op.grid.shape
    worst = 0.0
    for _ in range(n_pairs):
        q = rng.standard_normal(shape)
        p = rng.standard_normal(shape)
        lq = op.apply(q)
        ltp = op.apply_transpose(p)
        s1 = flat_inner(p, lq)
        s2 = flat_inner(ltp, q)
        scale = np.linalg.norm(p.ravel()) * np.linalg.norm(lq.ravel()) \
            + np.linalg.norm(ltp.ravel()) * np.linalg.norm(q.ravel())
        rel = abs(s1 - s2) / scale if scale > 0 else 0.0
        worst = max(worst, rel)
    return CheckReport(
        name="transpose contract",
        passed=(worst <= tol),
        metrics={"worst_relative_mismatch": worst, "tolerance": tol},
        lines=[f"<p, Lq> vs <L^T p, q> on {n_pairs} random pairs"],
    )


def estimate_operator_norm(op: EvolutionOperator, n_iter: int = 8,
                           seed: int = 0) -> float:
    """Crude spectral-norm estimate via power iteration on L^T L (advisory use)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((6,) + op.grid.shape)
    v /= np.linalg.norm(v.ravel())
    sigma = 0.0
    for _ in range(n_iter):
        w = op.apply_transpose(op.apply(v))
        norm = np.linalg.norm(w.ravel())
        if norm == 0.0:
            return 0.0
        sigma = np.sqrt(norm)
        v = w / norm
    return float(sigma)


def _sparse_quadratic(rng, grid, n_terms=3):
    """Random quadratic functional built from a few phase-space coordinates."""
    size = 6 * grid.num_nodes
    pairs = [(("q", "p")[rng.integers(2)], int(rng.integers(size)),
              ("q", "p")[rng.integers(2)], int(rng.integers(size)),
              float(rng.uniform(0.5, 2.0)) * (1.0 if rng.integers(2) else -1.0))
             for _ in range(n_terms)]

    def fn(st: DoubledState) -> float:
        qf = st.q.reshape(-1)
        pf = st.p.reshape(-1)
        total = 0.0
        for ka, ia, kb, ib, coef in pairs:
            va = qf[ia] if ka == "q" else pf[ia]
            vb = qf[ib] if kb == "q" else pf[ib]
            total += coef * va * vb
        return total

    return fn


def bracket_axioms_report(grid: Grid3, seed: int = 0,
                          fd_step: float = 1e-4) -> CheckReport:
    """Canonical relations, antisymmetry, and the Jacobi identity.

    Canonical relations are checked on coordinate functionals; antisymmetry
    and Jacobi on random quadratic functionals of the doubled state (central
    differences are exact for quadratics up to rounding, so the observed
    Jacobi defect measures only floating-point noise).
    """
    rng = np.random.default_rng(seed)
    st = DoubledState(grid, rng.standard_normal((6,) + grid.shape),
                      rng.standard_normal((6,) + grid.shape))
    lines = []
    metrics = {}
    passed = True

    # canonical relations {q^n(node), p_m(node')} = delta
    shape = grid.shape
    canon_err = 0.0
    for _ in range(4):
        n = int(rng.integers(6))
        node = tuple(int(rng.integers(s)) for s in shape)
        A = coordinate_functional("q", n, node)
        same = poisson_bracket(A, coordinate_functional("p", n, node), st, fd_step)
        canon_err = max(canon_err, abs(same - 1.0))
        m = (n + 1) % 6
        other = poisson_bracket(A, coordinate_functional("p", m, node), st, fd_step)
        canon_err = max(canon_err, abs(other))
        node2 = tuple((i + 1) % s for i, s in zip(node, shape))
        shifted = poisson_bracket(A, coordinate_functional("p", n, node2), st, fd_step)
        canon_err = max(canon_err, abs(shifted))
        qq = poisson_bracket(A, coordinate_functional("q", m, node), st, fd_step)
        canon_err = max(canon_err, abs(qq))
    metrics["canonical_relation_error"] = canon_err
    passed &= canon_err <= 1e-6
    lines.append("pairings {q, p} = delta checked on random coordinate pairs")

    # antisymmetry and {A, A} = 0
    A = _sparse_quadratic(rng, grid)
    B = _sparse_quadratic(rng, grid)
    ab = poisson_bracket(A, B, st, fd_step)
    ba = poisson_bracket(B, A, st, fd_step)
    anti = abs(ab + ba) / max(abs(ab), abs(ba), 1e-300)
    metrics["antisymmetry_relative_defect"] = anti
    passed &= anti <= 1e-12
    aa = poisson_bracket(A, A, st, fd_step)
    metrics["self_bracket"] = abs(aa)
    passed &= aa == 0.0

    # Jacobi identity on three random quadratics
    C = _sparse_quadratic(rng, grid)
    def bracket_fn(X, Y):
        return lambda state: poisson_bracket(X, Y, state, fd_step)
    t1 = poisson_bracket(A, bracket_fn(B, C), st, fd_step)
    t2 = poisson_bracket(B, bracket_fn(C, A), st, fd_step)
    t3 = poisson_bracket(C, bracket_fn(A, B), st, fd_step)
    denom = max(abs(t1), abs(t2), abs(t3), 1e-300)
    jacobi = abs(t1 + t2 + t3) / denom
    metrics["jacobi_relative_defect"] = jacobi
    passed &= jacobi <= 1e-5
    lines.append("Jacobi defect |{A,{B,C}} + {B,{C,A}} + {C,{A,B}}| / max term")

    return CheckReport(name="bracket axioms", passed=bool(passed),
                       metrics=metrics, lines=lines)
