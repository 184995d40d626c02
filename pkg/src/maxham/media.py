"""Anisotropic, inhomogeneous constitutive tensors and pointwise inverses.

The medium is characterized by mixed tensors eps^i_j(x) and mu^i_j(x) acting
as D^i = eps^i_j E^j and B^i = mu^i_j H^j.  No symmetry is imposed; the only
requirement is pointwise invertibility with moderate conditioning.  Media are
time independent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exprlang
from .geometry import inv3x3

#: pointwise conditioning ceiling for eps and mu
MEDIUM_COND_LIMIT = 1e8


class SingularTensorError(Exception):
    def __init__(self, tensor_name, point=None, node=None, detail=""):
        self.tensor_name = tensor_name
        self.point = point
        self.node = node
        message = f"constitutive tensor '{tensor_name}' is singular or ill conditioned"
        if node is not None:
            message += f" at node {tuple(int(i) for i in node)}"
        if point is not None:
            message += f" at point {tuple(float(v) for v in point)}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


@dataclass(frozen=True)
class Medium:
    name: str
    eps_components: tuple  # 3x3 nested tuple of Expr, mixed tensor eps^i_j
    mu_components: tuple   # 3x3 nested tuple of Expr


@dataclass(frozen=True)
class MediumSample:
    eps: np.ndarray
    eps_inv: np.ndarray
    mu: np.ndarray
    mu_inv: np.ndarray


def _const_matrix(diag=(1.0, 1.0, 1.0)):
    return tuple(
        tuple(exprlang.Num(diag[i] if i == j else 0.0) for j in range(3))
        for i in range(3)
    )


def vacuum() -> Medium:
    return Medium("vacuum", _const_matrix(), _const_matrix())


def luneburg(radius: float) -> Medium:
    """Scalar profile eps = (2 - r^2/R^2) * I centered on the coordinate origin.

    Stays positive for r < sqrt(2) R; scenarios must keep the grid inside
    that ball.  mu = I.
    """
    if not radius > 0:
        raise ValueError("luneburg radius must be positive")
    profile = exprlang.parse(f"2 - (x1^2 + x2^2 + x3^2)/{radius * radius!r}")
    zero = exprlang.Num(0.0)
    eps = tuple(tuple(profile if i == j else zero for j in range(3)) for i in range(3))
    return Medium(f"luneburg({radius!r})", eps, _const_matrix())


def uniaxial(eps_perp: float, eps_par: float, axis: int) -> Medium:
    """Diagonal anisotropic permittivity: eps_par on `axis` (1..3), eps_perp else."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    diag = [eps_perp] * 3
    diag[axis - 1] = eps_par
    return Medium(f"uniaxial({eps_perp!r}, {eps_par!r}, {axis})",
                  _const_matrix(tuple(diag)), _const_matrix())


def medium_from_strings(name, eps_entries, mu_entries) -> Medium:
    """Medium from two 3x3 nested sequences of expression strings."""
    eps = tuple(tuple(exprlang.parse(s) for s in row) for row in eps_entries)
    mu = tuple(tuple(exprlang.parse(s) for s in row) for row in mu_entries)
    return Medium(name, eps, mu)


def sample_medium(m: Medium, point) -> MediumSample:
    """Evaluate eps, mu and their inverses at one point."""
    out = {}
    for label, comps in (("eps", m.eps_components), ("mu", m.mu_components)):
        mat = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                mat[i, j] = exprlang.evaluate(comps[i][j], point)
        det = np.linalg.det(mat)
        if det == 0.0 or not np.isfinite(det):
            raise SingularTensorError(label, point=point, detail="zero determinant")
        cond = np.linalg.cond(mat)
        if cond >= MEDIUM_COND_LIMIT:
            raise SingularTensorError(label, point=point,
                                      detail=f"condition number {cond:.3e}")
        inv, _ = inv3x3(mat)
        out[label] = mat
        out[label + "_inv"] = inv
    return MediumSample(**out)


@dataclass(frozen=True)
class MediumOnGrid:
    medium: Medium
    eps: np.ndarray       # (3,3,n1,n2,n3)
    eps_inv: np.ndarray
    mu: np.ndarray
    mu_inv: np.ndarray


def sample_medium_on_grid(m: Medium, grid) -> MediumOnGrid:
    """Evaluate the constitutive tensors and inverses on all grid nodes.

    Conditioning is screened with the Frobenius-norm product estimate
    |A|_F |A^-1|_F, which bounds the 2-norm condition number from above.
    """
    x1, x2, x3 = grid.coords()
    fields = {}
    for label, comps in (("eps", m.eps_components), ("mu", m.mu_components)):
        mat = np.empty((3, 3) + x1.shape)
        for i in range(3):
            for j in range(3):
                mat[i, j] = exprlang.evaluate_on_grid(comps[i][j], x1, x2, x3)
        inv, det = inv3x3(mat)
        bad = (det == 0.0) | ~np.isfinite(det)
        if np.any(bad):
            idx = np.unravel_index(int(np.argmax(bad)), x1.shape)
            raise SingularTensorError(label, node=idx,
                                      point=(x1[idx], x2[idx], x3[idx]),
                                      detail="zero determinant")
        cond_est = (np.sqrt(np.sum(mat * mat, axis=(0, 1)))
                    * np.sqrt(np.sum(inv * inv, axis=(0, 1))))
        if np.any(cond_est >= MEDIUM_COND_LIMIT):
            idx = np.unravel_index(int(np.argmax(cond_est)), x1.shape)
            raise SingularTensorError(label, node=idx,
                                      point=(x1[idx], x2[idx], x3[idx]),
                                      detail=f"condition estimate {cond_est[idx]:.3e}")
        fields[label] = mat
        fields[label + "_inv"] = inv
    return MediumOnGrid(medium=m, **fields)


BUILTIN_MEDIA = {"vacuum": vacuum, "luneburg": luneburg, "uniaxial": uniaxial}
