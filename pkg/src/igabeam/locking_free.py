"""Locking-free membrane treatments: B-bar projection, discrete strain gap,
and the statically condensed Hellinger-Reissner stiffness.

All three leave the consistent mass matrix untouched; B-bar and DSG replace
only the membrane stiffness (the bending part is reused verbatim), while the
Hellinger-Reissner condensation produces the complete stiffness with both
strain fields discretized one degree lower.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, LinAlgError

from .assembly import element_quadrature
from .ring import RingParams, _membrane_row_local
from .splines import SplineSpace, gauss_rule, make_open_space, make_periodic_space

__all__ = [
    "bbar_membrane_stiffness",
    "dsg_gap_space",
    "dsg_membrane_operator",
    "dsg_membrane_stiffness",
    "hr_condensed_stiffness",
    "hr_mixed_blocks",
    "projected_strain_space",
    "strain_gap_matrices",
]


def projected_strain_space(space: SplineSpace) -> SplineSpace:
    """Periodic or open companion space of degree p-1 for the strain fields."""
    p = space.degree - 1
    if space.periodic:
        if p >= 2:
            return make_periodic_space(p, space.n_elem, space.domain)
        # degree-1 periodic strain space: same cyclic construction, relaxed
        # degree check (it never carries the bending term)
        from .splines import KnotVector, SplineSpace as _S
        a, b = space.domain
        h = (b - a) / space.n_elem
        knots = a + h * np.arange(-p, space.n_elem + p + 1)
        return _S(degree=p, n_elem=space.n_elem, domain=(a, b), periodic=True,
                  knot_vector=KnotVector(p, knots), dim=space.n_elem)
    return make_open_space(p, space.n_elem, space.domain)


def dsg_gap_space(space: SplineSpace) -> SplineSpace:
    """Open space of the same degree on the same partition (gap interpolation)."""
    return make_open_space(space.degree, space.n_elem, space.domain)


# ---------------------------------------------------------------------------
# B-bar strain projection
# ---------------------------------------------------------------------------

def _bbar_matrices(space: SplineSpace, strain_space: SplineSpace,
                   params: RingParams, dtype=None):
    """Projection matrices: Mbar (strain Gram, with R) and Bbar (1 x 2 blocks).

    Bbar_1,ij = -int sin(t) Nbar_i N_j' dt and Bbar_2,ij = +int cos(t)
    Nbar_i N_j' dt; the radius from the measure cancels the 1/R of the
    membrane operator.  All integrals use p points per element.
    """
    n = space.dim
    nb = strain_space.dim
    Mbar = np.zeros((nb, nb), dtype=dtype or float)
    Bbar = np.zeros((nb, 2 * n), dtype=dtype or float)
    thetas, weights = element_quadrature(space, space.degree, dtype=dtype)
    R = params.R
    for t, w in zip(thetas, weights):
        idx_s, ders_s = strain_space.eval_basis(t, 0, dtype=dtype)
        idx_n, ders_n = space.eval_basis(t, 1, dtype=dtype)
        nbar = ders_s[0]
        dn = ders_n[1]
        Mbar[np.ix_(idx_s, idx_s)] += (w * R) * np.outer(nbar, nbar)
        Bbar[np.ix_(idx_s, idx_n)] += (-w * np.sin(t)) * np.outer(nbar, dn)
        Bbar[np.ix_(idx_s, n + idx_n)] += (w * np.cos(t)) * np.outer(nbar, dn)
    return Mbar, Bbar


def bbar_membrane_stiffness(space: SplineSpace, strain_space: SplineSpace,
                            params: RingParams) -> np.ndarray:
    """Modified membrane stiffness EA * Bbar^T Mbar^{-1} Bbar."""
    expected = space.dim if space.periodic else space.n_elem + space.degree - 1
    if strain_space.dim != expected or strain_space.degree != space.degree - 1:
        raise ValueError("strain space must have degree p-1 on the same "
                         "partition as the displacement space")
    Mbar, Bbar = _bbar_matrices(space, strain_space, params)
    try:
        factor = cho_factor(Mbar)
    except LinAlgError as exc:  # pragma: no cover - should never happen
        raise RuntimeError("singular strain-space Gram matrix") from exc
    K = params.EA * (Bbar.T @ cho_solve(factor, Bbar))
    return 0.5 * (K + K.T)


def project_membrane_strain(space: SplineSpace, strain_space: SplineSpace,
                            params: RingParams, u: np.ndarray) -> np.ndarray:
    """Strain-space coefficients of the projected membrane strain of ``u``."""
    Mbar, Bbar = _bbar_matrices(space, strain_space, params)
    return cho_solve(cho_factor(Mbar), Bbar @ np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# Discrete strain gap
# ---------------------------------------------------------------------------

def strain_gap_matrices(space: SplineSpace, gap_space: SplineSpace,
                        params: RingParams, gap_quadrature: str = "collocation"):
    """Collocation matrix A and running-integral gap matrices C, D.

    A_ij = Ntilde_j(t_i) at the Greville abscissae of the gap space;
    C_ij = -int_a^{t_i} sin(t) N_j'(t) dt and D_ij the cosine companion,
    i.e. the arc-length integrated membrane strain produced by a unit
    coefficient.

    ``gap_quadrature`` selects how the running integrals are evaluated:

    * ``"collocation"``: the integrand (strain per unit coefficient) is
      sampled at the collocation points only, interpolated in the gap space,
      and the interpolant is integrated exactly (spline antiderivatives).
      The order-(p+1) interpolation error scales with the size of the strain
      gap, so it vanishes on (near-)inextensional fields but pollutes
      membrane-dominated ones.
    * ``"trapezoid"``: cumulative trapezoid over the collocation points, a
      second-order variant of the same idea.
    * ``"gauss"``: element-wise Gauss accumulation (p+1 points per full
      element plus a partial-element rule), exact up to quadrature for the
      polynomial-times-trigonometric integrands.
    """
    coll = gap_space.greville_abscissae()
    A = gap_space.design_matrix(coll)
    n = space.dim
    m = coll.size
    order = np.argsort(coll)
    sorted_pts = coll[order]

    if gap_quadrature in ("collocation", "trapezoid"):
        F_c = np.zeros((m, n))
        F_d = np.zeros((m, n))
        for k, t in enumerate(sorted_pts):
            idx, ders = space.eval_basis(t, 1)
            F_c[k, idx] = -np.sin(t) * ders[1]
            F_d[k, idx] = np.cos(t) * ders[1]
        if gap_quadrature == "collocation":
            W = _running_basis_integrals(gap_space, sorted_pts)
            Ainv_on_sorted = np.linalg.solve(gap_space.design_matrix(sorted_pts).T,
                                             W.T).T
            rowsC = Ainv_on_sorted @ F_c
            rowsD = Ainv_on_sorted @ F_d
        else:
            dt = np.diff(sorted_pts)[:, None]
            rowsC = np.zeros((m, n))
            rowsD = np.zeros((m, n))
            rowsC[1:] = np.cumsum(0.5 * dt * (F_c[:-1] + F_c[1:]), axis=0)
            rowsD[1:] = np.cumsum(0.5 * dt * (F_d[:-1] + F_d[1:]), axis=0)
    elif gap_quadrature == "gauss":
        rule = gauss_rule(space.degree + 1)
        bp = space.breakpoints

        def increment(lo: float, hi: float):
            dC = np.zeros(n)
            dD = np.zeros(n)
            if hi <= lo:
                return dC, dD
            x, w = rule.mapped(lo, hi)
            for t, wt in zip(x, w):
                idx, ders = space.eval_basis(t, 1)
                dC[idx] += -wt * np.sin(t) * ders[1]
                dD[idx] += wt * np.cos(t) * ders[1]
            return dC, dD

        cumC = np.zeros(n)
        cumD = np.zeros(n)
        k = 0
        rowsC = np.zeros((m, n))
        rowsD = np.zeros((m, n))
        for e in range(space.n_elem):
            lo, hi = bp[e], bp[e + 1]
            while k < m and sorted_pts[k] <= hi + 1e-14:
                dC, dD = increment(lo, min(sorted_pts[k], hi))
                rowsC[k] = cumC + dC
                rowsD[k] = cumD + dD
                k += 1
            dC, dD = increment(lo, hi)
            cumC += dC
            cumD += dD
    else:
        raise ValueError(
            "gap_quadrature must be 'collocation', 'trapezoid' or 'gauss'")

    C = np.zeros((m, n))
    D = np.zeros((m, n))
    C[order] = rowsC
    D[order] = rowsD
    return A, C, D


def _running_basis_integrals(space: SplineSpace, points: np.ndarray) -> np.ndarray:
    """W_ik = integral of basis function k from the domain start to points[i].

    ``points`` must be ascending.  Polynomial integrands, so the per-element
    Gauss rule is exact.
    """
    m = space.dim
    W = np.zeros((points.size, m))
    rule = gauss_rule(space.degree + 1)
    bp = space.breakpoints

    def increment(lo, hi):
        dW = np.zeros(m)
        if hi <= lo:
            return dW
        x, w = rule.mapped(lo, hi)
        for t, wt in zip(x, w):
            idx, ders = space.eval_basis(t, 0)
            dW[idx] += wt * ders[0]
        return dW

    cum = np.zeros(m)
    k = 0
    for e in range(space.n_elem):
        lo, hi = bp[e], bp[e + 1]
        while k < points.size and points[k] <= hi + 1e-14:
            W[k] = cum + increment(lo, min(points[k], hi))
            k += 1
        cum += increment(lo, hi)
    return W


def dsg_membrane_operator(space: SplineSpace, gap_space: SplineSpace,
                          params: RingParams,
                          gap_quadrature: str = "collocation") -> np.ndarray:
    """Factored strain operator G with B_m(t) = (1/R) Ntilde'(t) G.

    G = A^{-1} [C | D]; a singular collocation matrix A indicates a bad
    collocation set and is fatal.
    """
    A, C, D = strain_gap_matrices(space, gap_space, params, gap_quadrature)
    try:
        factor = lu_factor(A)
    except LinAlgError as exc:
        raise RuntimeError("singular DSG collocation matrix") from exc
    if np.min(np.abs(np.diag(factor[0]))) < 1e-14 * np.max(np.abs(factor[0])):
        raise RuntimeError("singular DSG collocation matrix")
    return lu_solve(factor, np.hstack([C, D]))


def dsg_membrane_stiffness(space: SplineSpace, gap_space: SplineSpace,
                           params: RingParams, pairing: str = "gram",
                           gap_quadrature: str = "collocation") -> np.ndarray:
    """DSG membrane stiffness with p+1 point quadrature.

    ``pairing`` fixes how the reconstructed strain enters the energy:

    * ``"gram"``: both sides reconstructed, EA int B^T B R dt, assembled as
      (EA/R) G^T H G with H the derivative Gram matrix of the gap space;
      positive semi-definite by construction.
    * ``"petrov"``: the reconstructed strain replaces the trial strain only
      and is paired against the standard membrane rows, symmetrized.  The
      product is indefinite in general: parts of the membrane-dominated
      spectrum can turn negative, while (near-)inextensional modes are
      untouched at every degree.

    With the default collocation-based gap integration the circumferential
    (membrane-dominated) part of the spectrum carries an integration error
    proportional to the strain-gap size, which reproduces the characteristic
    accuracy loss of the method there; inextensional fields have vanishing
    gaps and stay clean.  Use ``gap_quadrature="gauss"`` for the exact-gap
    variant without that defect.
    """
    if gap_space.periodic or gap_space.degree != space.degree:
        raise ValueError("gap space must be open and of the same degree")
    G = dsg_membrane_operator(space, gap_space, params, gap_quadrature)
    n = space.dim
    m = gap_space.dim
    thetas, weights = element_quadrature(gap_space, space.degree + 1)
    if pairing == "gram":
        H = np.zeros((m, m))
        for t, w in zip(thetas, weights):
            idx, ders = gap_space.eval_basis(t, 1)
            H[np.ix_(idx, idx)] += w * np.outer(ders[1], ders[1])
        K = (params.EA / params.R) * (G.T @ H @ G)
        return 0.5 * (K + K.T)
    if pairing != "petrov":
        raise ValueError("pairing must be 'petrov' or 'gram'")
    # T_kj = sum_q w_q Ntilde'_k B_m,j ; int Bbar^T B_m R dt = G^T T
    T = np.zeros((m, 2 * n))
    for t, w in zip(thetas, weights):
        idx_g, ders_g = gap_space.eval_basis(t, 1)
        idx_n, ders_n = space.eval_basis(t, 1)
        bx, by = _membrane_row_local(ders_n, t, params.R)
        T[np.ix_(idx_g, idx_n)] += w * np.outer(ders_g[1], bx)
        T[np.ix_(idx_g, n + idx_n)] += w * np.outer(ders_g[1], by)
    X = params.EA * (G.T @ T)
    return 0.5 * (X + X.T)


# ---------------------------------------------------------------------------
# Hellinger-Reissner with static condensation
# ---------------------------------------------------------------------------

def hr_mixed_blocks(space: SplineSpace, strain_space: SplineSpace,
                    params: RingParams, dtype=None):
    """Blocks of the two-field system: strain Gram Mt and the couplings.

    Returns ``(Mt, B1, B2)`` with Mt the strain-space Gram matrix (with the
    radius), B1 the membrane coupling (so k13, k14 = EA * B1 blocks) and B2
    the curvature coupling (k23, k24 = EI * B2 blocks).  All integrals use p
    points per element.
    """
    n = space.dim
    nb = strain_space.dim
    R = params.R
    Mt = np.zeros((nb, nb), dtype=dtype or float)
    B1 = np.zeros((nb, 2 * n), dtype=dtype or float)   # membrane, without EA
    B2 = np.zeros((nb, 2 * n), dtype=dtype or float)   # curvature, without EI
    thetas, weights = element_quadrature(space, space.degree, dtype=dtype)
    for t, w in zip(thetas, weights):
        idx_s, ders_s = strain_space.eval_basis(t, 0, dtype=dtype)
        idx_n, ders_n = space.eval_basis(t, 2, dtype=dtype)
        nbar = ders_s[0]
        d1, d2 = ders_n[1], ders_n[2]
        s, c = np.sin(t), np.cos(t)
        Mt[np.ix_(idx_s, idx_s)] += (w * R) * np.outer(nbar, nbar)
        B1[np.ix_(idx_s, idx_n)] += (-w * s) * np.outer(nbar, d1)
        B1[np.ix_(idx_s, n + idx_n)] += (w * c) * np.outer(nbar, d1)
        B2[np.ix_(idx_s, idx_n)] += (w / R) * np.outer(nbar, -c * d2 + s * d1)
        B2[np.ix_(idx_s, n + idx_n)] += (w / R) * np.outer(nbar, -s * d2 - c * d1)
    return Mt, B1, B2


def hr_condensed_stiffness(space: SplineSpace, strain_space: SplineSpace,
                           params: RingParams) -> np.ndarray:
    """Condensed stiffness -K12^T K11^{-1} K12 of the two-field formulation.

    Both the membrane strain and the change of curvature are discretized in
    the degree p-1 companion space; with K11 = -diag(EA, EI) x Gram, the
    condensed matrix is symmetric positive semi-definite by congruence.
    """
    Mt, B1, B2 = hr_mixed_blocks(space, strain_space, params)
    try:
        factor = cho_factor(Mt)
    except LinAlgError as exc:
        raise RuntimeError("singular strain-space Gram matrix (K11 block)") from exc
    K = params.EA * (B1.T @ cho_solve(factor, B1)) \
        + params.EI * (B2.T @ cho_solve(factor, B2))
    return 0.5 * (K + K.T)
