"""Consistent mass and displacement-based stiffness matrices for the ring.

Assembly loops over Bezier elements (knot spans) and accumulates outer
products of the strain rows at the Gauss points; full integration uses p+1
points per element, selective reduced integration drops to p points for the
membrane stiffness only.  Matrices are dense and immutable once returned.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ring import RingParams, _bending_row_local, _membrane_row_local
from .splines import SplineSpace, gauss_rule

__all__ = [
    "Formulation",
    "FormulationSpec",
    "SystemMatrices",
    "assemble_mass",
    "assemble_stiffness_standard",
    "build_system",
    "count_rigid_modes",
]


class Formulation(enum.Enum):
    STANDARD_FULL = "standard-full"
    STANDARD_REDUCED = "standard-reduced"
    BBAR = "bbar"
    DSG = "dsg"
    HELLINGER_REISSNER = "hellinger-reissner"


@dataclass(frozen=True)
class FormulationSpec:
    """Which formulation to assemble and its quadrature choices.

    Defaults follow the standard rules: membrane with p+1 points (full) or
    p points (reduced); bending and mass always with p+1 points; the
    projected-strain integrals of the B-bar and Hellinger-Reissner variants
    with p points.
    """

    kind: Formulation
    p: int
    n_elem: int
    membrane_quad: int | None = None
    bending_quad: int | None = None

    def membrane_points(self) -> int:
        if self.membrane_quad is not None:
            return self.membrane_quad
        if self.kind is Formulation.STANDARD_REDUCED:
            return self.p
        return self.p + 1

    def bending_points(self) -> int:
        return self.bending_quad if self.bending_quad is not None else self.p + 1


@dataclass(frozen=True)
class SystemMatrices:
    """Assembled (K, M) pair for one formulation on one mesh."""

    K: np.ndarray
    M: np.ndarray
    space: SplineSpace
    params: RingParams
    formulation: FormulationSpec
    K_m: np.ndarray | None = field(default=None, repr=False)
    K_b: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_dof(self) -> int:
        return self.K.shape[0]


def element_quadrature(space: SplineSpace, n_points: int, dtype=None):
    """Per-element Gauss points and weights over the whole domain.

    Returns ``(thetas, weights)`` as flat arrays of length n_elem * n_points;
    the weights include the element Jacobian but not the radius.
    """
    rule = gauss_rule(n_points)
    bp = space.breakpoints
    thetas = np.empty(space.n_elem * n_points, dtype=dtype or float)
    weights = np.empty_like(thetas)
    nodes = rule.nodes.astype(dtype) if dtype else rule.nodes
    wts = rule.weights.astype(dtype) if dtype else rule.weights
    for e in range(space.n_elem):
        a, b = bp[e], bp[e + 1]
        thetas[e * n_points : (e + 1) * n_points] = \
            0.5 * (b - a) * nodes + 0.5 * (a + b)
        weights[e * n_points : (e + 1) * n_points] = 0.5 * (b - a) * wts
    return thetas, weights


def assemble_mass(space: SplineSpace, params: RingParams) -> np.ndarray:
    """Consistent mass, 2x2 block diagonal with M_ij = rho*A int N_i N_j R."""
    n = space.dim
    block = np.zeros((n, n))
    thetas, weights = element_quadrature(space, space.degree + 1)
    coef = params.rho * params.A * params.R
    for t, w in zip(thetas, weights):
        idx, ders = space.eval_basis(t, 0)
        block[np.ix_(idx, idx)] += (coef * w) * np.outer(ders[0], ders[0])
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = block
    M[n:, n:] = block
    return M


def assemble_stiffness_standard(space: SplineSpace, params: RingParams,
                                reduced: bool = False, dtype=None):
    """Membrane and bending stiffness of the displacement-based formulation.

    Returns ``(K_m, K_b)``; the full stiffness is their sum.  ``reduced``
    switches the membrane quadrature from p+1 to p points per element, the
    bending part always uses p+1 points.
    """
    if space.degree < 2:
        raise ValueError("ring stiffness needs degree >= 2")
    n = space.dim
    p = space.degree
    R = params.R

    K_m = np.zeros((2 * n, 2 * n), dtype=dtype or float)
    n_mem = p if reduced else p + 1
    thetas, weights = element_quadrature(space, n_mem, dtype=dtype)
    for t, w in zip(thetas, weights):
        idx, ders = space.eval_basis(t, 1, dtype=dtype)
        bx, by = _membrane_row_local(ders, t, R)
        local = np.concatenate([bx, by])
        gdof = np.concatenate([idx, n + idx])
        K_m[np.ix_(gdof, gdof)] += (params.EA * R * w) * np.outer(local, local)

    K_b = np.zeros((2 * n, 2 * n), dtype=dtype or float)
    thetas, weights = element_quadrature(space, p + 1, dtype=dtype)
    for t, w in zip(thetas, weights):
        idx, ders = space.eval_basis(t, 2, dtype=dtype)
        bx, by = _bending_row_local(ders, t, R)
        local = np.concatenate([bx, by])
        gdof = np.concatenate([idx, n + idx])
        K_b[np.ix_(gdof, gdof)] += (params.EI * R * w) * np.outer(local, local)

    return K_m, K_b


def build_system(spec: FormulationSpec, params: RingParams,
                 space: SplineSpace | None = None) -> SystemMatrices:
    """Assemble (K, M) for any of the five formulations on the periodic ring.

    Bending stiffness and consistent mass are shared by all formulations;
    only the membrane treatment differs.
    """
    from . import locking_free  # local import to keep module layering simple

    if space is None:
        from .splines import make_periodic_space
        space = make_periodic_space(spec.p, spec.n_elem)
    if space.degree != spec.p or space.n_elem != spec.n_elem:
        raise ValueError("space does not match the formulation spec")

    M = assemble_mass(space, params)
    kind = spec.kind
    if kind in (Formulation.STANDARD_FULL, Formulation.STANDARD_REDUCED):
        reduced = kind is Formulation.STANDARD_REDUCED
        K_m, K_b = assemble_stiffness_standard(space, params, reduced=reduced)
        if spec.membrane_quad is not None:
            K_m = _membrane_with_quad(space, params, spec.membrane_points())
        return SystemMatrices(K_m + K_b, M, space, params, spec, K_m=K_m, K_b=K_b)

    _, K_b = assemble_stiffness_standard(space, params, reduced=False)
    if kind is Formulation.BBAR:
        strain_space = locking_free.projected_strain_space(space)
        K_m = locking_free.bbar_membrane_stiffness(space, strain_space, params)
        return SystemMatrices(K_m + K_b, M, space, params, spec, K_m=K_m, K_b=K_b)
    if kind is Formulation.DSG:
        gap_space = locking_free.dsg_gap_space(space)
        K_m = locking_free.dsg_membrane_stiffness(space, gap_space, params)
        return SystemMatrices(K_m + K_b, M, space, params, spec, K_m=K_m, K_b=K_b)
    if kind is Formulation.HELLINGER_REISSNER:
        strain_space = locking_free.projected_strain_space(space)
        K = locking_free.hr_condensed_stiffness(space, strain_space, params)
        return SystemMatrices(K, M, space, params, spec)
    raise ValueError(f"unknown formulation {kind}")


def _membrane_with_quad(space: SplineSpace, params: RingParams,
                        n_points: int) -> np.ndarray:
    n = space.dim
    K_m = np.zeros((2 * n, 2 * n))
    thetas, weights = element_quadrature(space, n_points)
    for t, w in zip(thetas, weights):
        idx, ders = space.eval_basis(t, 1)
        bx, by = _membrane_row_local(ders, t, params.R)
        local = np.concatenate([bx, by])
        gdof = np.concatenate([idx, n + idx])
        K_m[np.ix_(gdof, gdof)] += (params.EA * params.R * w) * np.outer(local, local)
    return K_m


def count_rigid_modes(eigenvalues: np.ndarray, rel_tol: float = 1e-8) -> int:
    """Number of eigenvalues below rel_tol times the largest one."""
    lam_max = float(np.max(eigenvalues))
    return int(np.sum(eigenvalues < rel_tol * lam_max))
