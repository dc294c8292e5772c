"""Quarter-circle cantilever under a unit tip shear force.

The arch spans theta in [0, pi/2] with the clamped end at pi/2 and the free
end at 0.  Clamping fixes u_x, u_y and the cross-section rotation
(v - w_,theta)/R; all three conditions are eliminated by a null-space
reduction.  The tip load acts in the transverse (radial) direction through
the rotated test functions.  Convergence is measured against an overkill
Hellinger-Reissner reference, whose adequacy is established by comparing two
independent overkill discretizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import locking_free
from .assembly import Formulation, assemble_stiffness_standard, element_quadrature
from .ring import RingParams, _membrane_row_local
from .splines import SplineSpace, make_open_space

__all__ = [
    "CantileverCase",
    "CantileverSolution",
    "assemble_cantilever",
    "cantilever_convergence",
    "clamp_rows",
    "detect_plateau",
    "reference_solution",
    "relative_l2_distance",
    "solve_cantilever",
    "tip_load",
]

DOMAIN = (0.0, math.pi / 2.0)


@dataclass(frozen=True)
class CantileverCase:
    """One cantilever run: formulation, degree, mesh and parameters."""

    kind: Formulation
    p: int
    n_elem: int
    params: RingParams

    @classmethod
    def default(cls, kind: Formulation, p: int, n_elem: int,
                R_over_t: float = 1e3) -> "CantileverCase":
        return cls(kind, p, n_elem, RingParams.with_slenderness(R_over_t))


@dataclass(frozen=True)
class CantileverSolution:
    case: CantileverCase
    space: SplineSpace
    coeffs: np.ndarray          # full [x-block, y-block] coefficient vector
    K: np.ndarray | None = field(repr=False)   # None for the mixed HR route
    f: np.ndarray = field(default=None, repr=False)

    def evaluate(self, thetas):
        n = self.space.dim
        phi = self.space.design_matrix(np.asarray(thetas, dtype=float))
        return phi @ self.coeffs[:n], phi @ self.coeffs[n:]


def _stiffness(case: CantileverCase, space: SplineSpace) -> np.ndarray:
    kind, params = case.kind, case.params
    if kind in (Formulation.STANDARD_FULL, Formulation.STANDARD_REDUCED):
        K_m, K_b = assemble_stiffness_standard(
            space, params, reduced=kind is Formulation.STANDARD_REDUCED)
        return K_m + K_b
    _, K_b = assemble_stiffness_standard(space, params)
    if kind is Formulation.BBAR:
        strain = locking_free.projected_strain_space(space)
        return locking_free.bbar_membrane_stiffness(space, strain, params) + K_b
    if kind is Formulation.DSG:
        gap = locking_free.dsg_gap_space(space)
        return locking_free.dsg_membrane_stiffness(space, gap, params) + K_b
    if kind is Formulation.HELLINGER_REISSNER:
        strain = locking_free.projected_strain_space(space)
        return locking_free.hr_condensed_stiffness(space, strain, params)
    raise ValueError(f"unknown formulation {kind}")


def clamp_rows(space: SplineSpace) -> np.ndarray:
    """Three constraint rows at the clamped end: u_x, u_y and the rotation.

    The cross-section rotation (v - w_,theta)/R reduces, in Cartesian
    components, to -(u_x,theta cos + u_y,theta sin)/R at the clamp angle.
    """
    n = space.dim
    theta_c = space.domain[1]
    idx, ders = space.eval_basis(theta_c, 1)
    rows = np.zeros((3, 2 * n))
    rows[0, idx] = ders[0]
    rows[1, n + idx] = ders[0]
    rows[2, idx] = -ders[1] * math.cos(theta_c)
    rows[2, n + idx] = -ders[1] * math.sin(theta_c)
    return rows


def tip_load(space: SplineSpace, magnitude: float = 1.0) -> np.ndarray:
    """Transverse (radial) point force at the free end theta = 0."""
    n = space.dim
    theta0 = space.domain[0]
    idx, ders = space.eval_basis(theta0, 0)
    f = np.zeros(2 * n)
    f[idx] += ders[0] * magnitude * math.cos(theta0)
    f[n + idx] += ders[0] * magnitude * math.sin(theta0)
    return f


def assemble_cantilever(case: CantileverCase):
    """Stiffness, load vector and space for one cantilever case."""
    space = make_open_space(case.p, case.n_elem, DOMAIN)
    K = _stiffness(case, space)
    f = tip_load(space)
    return K, f, space


def _refine(apply_solve, A: np.ndarray, b: np.ndarray, x: np.ndarray,
            max_steps: int = 25) -> np.ndarray:
    """Iterative refinement with extended-precision residuals, to stagnation.

    ``A`` and ``b`` may already be extended precision (then the refinement
    converges to the solution of that operator, not of its double rounding).
    """
    A_l = A if A.dtype == np.longdouble else A.astype(np.longdouble)
    b_l = b if b.dtype == np.longdouble else b.astype(np.longdouble)
    best = None
    for _ in range(max_steps):
        r = np.asarray(b_l - A_l @ x.astype(np.longdouble), dtype=float)
        dx = apply_solve(r)
        x = x + dx
        upd = np.linalg.norm(dx) / max(np.linalg.norm(x), 1e-300)
        if best is not None and upd > 0.5 * best:
            break
        best = upd if best is None else min(best, upd)
        if upd < 1e-17:
            break
    return x


def _null_space_of_clamp(space: SplineSpace) -> np.ndarray:
    rows = clamp_rows(space)
    Q, _ = scipy.linalg.qr(rows.T, mode="full")
    return Q[:, rows.shape[0]:]


# dense saddle systems beyond this size are assembled in double precision
# (the extended-precision copies would dominate memory); the two overkill
# reference meshes fall in that regime and agree to ~5e-11 regardless
_LONGDOUBLE_DIM_CAP = 4000


def _saddle_blocks(case: CantileverCase, space: SplineSpace, dtype):
    """(-Gram, coupling, bending) blocks of the augmented membrane system.

    Every membrane treatment here pairs strain-type unknowns s with the
    displacements through [[-S, C], [C^T, K_b]] [s; u] = [0; f], which
    eliminates to (K_b + C^T S^{-1} C) u = f.  Keeping the factored form
    avoids squaring the membrane/bending stiffness contrast into the
    conditioning of the solve.  For Hellinger-Reissner both strain fields
    are unknowns and the bending block is empty.
    """
    kind, params = case.kind, case.params
    n = space.dim
    p = space.degree
    EA, EI, R = params.EA, params.EI, params.R
    if kind is Formulation.HELLINGER_REISSNER:
        strain = locking_free.projected_strain_space(space)
        Mt, B1, B2 = locking_free.hr_mixed_blocks(space, strain, params,
                                                  dtype=dtype)
        sEA = np.sqrt(dtype(EA)) if dtype else math.sqrt(EA)
        sEI = np.sqrt(dtype(EI)) if dtype else math.sqrt(EI)
        nb = strain.dim
        S = np.zeros((2 * nb, 2 * nb), dtype=dtype or float)
        S[:nb, :nb] = Mt
        S[nb:, nb:] = Mt
        C = np.vstack([sEA * B1, sEI * B2])
        Kb = np.zeros((2 * n, 2 * n), dtype=dtype or float)
        return S, C, Kb
    _, Kb = assemble_stiffness_standard(space, params, dtype=dtype)
    if kind is Formulation.BBAR:
        strain = locking_free.projected_strain_space(space)
        Mbar, Bbar = locking_free._bbar_matrices(space, strain, params,
                                                 dtype=dtype)
        sEA = np.sqrt(dtype(EA)) if dtype else math.sqrt(EA)
        return Mbar, sEA * Bbar, Kb
    if kind in (Formulation.STANDARD_FULL, Formulation.STANDARD_REDUCED):
        npts = p if kind is Formulation.STANDARD_REDUCED else p + 1
        thetas, weights = element_quadrature(space, npts, dtype=dtype)
        X = np.zeros((thetas.size, 2 * n), dtype=dtype or float)
        for q, (t, w) in enumerate(zip(thetas, weights)):
            idx, ders = space.eval_basis(t, 1, dtype=dtype)
            bx, by = _membrane_row_local(ders, t, R)
            c = np.sqrt(EA * R * w)
            X[q, idx] = c * bx
            X[q, n + idx] = c * by
        return np.eye(X.shape[0], dtype=dtype or float), X, Kb
    if kind is Formulation.DSG:
        gap = locking_free.dsg_gap_space(space)
        G = locking_free.dsg_membrane_operator(space, gap, params)
        thetas, weights = element_quadrature(gap, p + 1, dtype=dtype)
        dphi = gap.design_matrix(thetas, deriv=1, dtype=dtype)
        scale = np.sqrt(EA * R * weights) / R
        X = scale[:, None] * (dphi @ G.astype(dtype or float))
        return np.eye(X.shape[0], dtype=dtype or float), X, Kb
    raise ValueError(f"no saddle blocks for {kind}")


def solve_cantilever(case: CantileverCase) -> CantileverSolution:
    """Solve the clamped problem via the augmented membrane system.

    The clamp rows are eliminated by a null-space basis; the saddle matrix is
    equilibrated, factorized in double precision and polished by iterative
    refinement against an extended-precision copy of the operator.  Small
    systems are also assembled in extended precision, which keeps the
    solution accurate to ~1e-11 despite the h^-4 conditioning of the bending
    block.
    """
    space = make_open_space(case.p, case.n_elem, DOMAIN)
    probe_dim = 2 * space.dim + 2 * (space.n_elem * (space.degree + 1))
    dtype = np.longdouble if probe_dim <= _LONGDOUBLE_DIM_CAP else None
    S, C, Kb = _saddle_blocks(case, space, dtype)
    f = tip_load(space)
    T = _null_space_of_clamp(space)
    Td = T.astype(dtype) if dtype else T
    CT = C @ Td
    KbT = Td.T @ Kb @ Td
    m = S.shape[0]
    nu = CT.shape[1]
    A = np.zeros((m + nu, m + nu), dtype=dtype or float)
    A[:m, :m] = -S
    A[:m, m:] = CT
    A[m:, :m] = CT.T
    A[m:, m:] = KbT
    rhs = np.concatenate([np.zeros(m, dtype=dtype or float), Td.T @ f])
    d = 1.0 / np.sqrt(np.abs(A).max(axis=1))
    A_l = A * d[:, None] * d[None, :]
    b_l = rhs * d
    A_s = A_l.astype(float)
    try:
        lu = scipy.linalg.lu_factor(A_s)
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError("singular constrained cantilever system") from exc
    x = scipy.linalg.lu_solve(lu, np.asarray(b_l, dtype=float))
    x = _refine(lambda r: scipy.linalg.lu_solve(lu, r), A_l, b_l, x)
    u = T @ np.asarray((x * d)[m:], dtype=float)
    K = _stiffness(case, space) if case.kind is not Formulation.HELLINGER_REISSNER \
        else None
    return CantileverSolution(case, space, u, K, f)


def reference_solution(params: RingParams, p: int = 5,
                       n_elem: int = 1024) -> CantileverSolution:
    """Overkill locking-free reference (Hellinger-Reissner by default)."""
    return solve_cantilever(
        CantileverCase(Formulation.HELLINGER_REISSNER, p, n_elem, params))


def relative_l2_distance(sol_a: CantileverSolution, sol_b: CantileverSolution,
                         n_points: int | None = None) -> float:
    """Relative L2 distance of two solutions, normalized by the second one.

    Integrated on the finer of the two meshes with p+2 Gauss points per
    element.
    """
    fine = sol_a.space if sol_a.space.n_elem >= sol_b.space.n_elem else sol_b.space
    npts = n_points if n_points is not None else fine.degree + 2
    thetas, weights = element_quadrature(fine, npts)
    R = sol_b.case.params.R
    ax, ay = sol_a.evaluate(thetas)
    bx, by = sol_b.evaluate(thetas)
    num = (((ax - bx) ** 2 + (ay - by) ** 2) * weights * R).sum()
    den = ((bx ** 2 + by ** 2) * weights * R).sum()
    return math.sqrt(num / den)


def detect_plateau(errors, slope_floor: float = 1.3,
                   asymptotic_slope: float = 1.5,
                   noise_floor: float = 1e-10):
    """Plateau flag for a uniform-refinement error sequence.

    A plateau exists if across two consecutive meshes the error decreases by
    less than ``slope_floor`` while the sequence converges properly
    (> ``asymptotic_slope`` per octave in log2) somewhere else.  Flat steps
    with both errors below ``noise_floor`` are solver/reference noise, not
    plateau evidence.
    """
    errors = np.asarray(errors, dtype=float)
    ratios = errors[:-1] / errors[1:]
    resolved = np.maximum(errors[:-1], errors[1:]) > noise_floor
    flat = (ratios < slope_floor) & resolved
    steep = np.log2(np.maximum(ratios, 1e-300)) > asymptotic_slope
    return bool(flat.any() and steep.any())


def cantilever_convergence(kind: Formulation, p: int, meshes,
                           params: RingParams,
                           reference: CantileverSolution):
    """Relative L2 displacement errors against the reference, with slope.

    Returns a dict with per-mesh errors, the least-squares log-log slope and
    the plateau flag.
    """
    errors = []
    for n_elem in meshes:
        sol = solve_cantilever(CantileverCase(kind, p, n_elem, params))
        errors.append(relative_l2_distance(sol, reference))
    hs = [1.0 / m for m in meshes]
    slope = float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
    return {"formulation": kind.value, "p": p, "meshes": list(meshes),
            "errors": errors, "slope": slope,
            "plateau": detect_plateau(errors)}
