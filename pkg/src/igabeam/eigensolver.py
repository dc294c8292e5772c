"""Dense symmetric-definite generalized eigensolver and phase constraints.

``solve_gevp`` wraps the LAPACK Cholesky-reduction driver (sygvd): the mass
matrix is factorized, the pencil is congruence-reduced to a standard
symmetric problem and solved by tridiagonalization.  Eigenvalues come back
ascending with mass-orthonormal eigenvectors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

__all__ = [
    "ModeSet",
    "apply_phase_constraints",
    "modal_expansion_coefficients",
    "phase_constraint_rows",
    "solve_gevp",
]


@dataclass(frozen=True)
class ModeSet:
    """Ascending eigenvalues with M-orthonormal eigenvectors (columns).

    The per-mode metadata (branch label, matched analytical mode number,
    free-floating flag) is attached by the spectral-analysis pipeline and
    stays ``None`` until then.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    branch: list | None = None
    analytical_n: list | None = None
    free_floating: np.ndarray | None = None

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def take(self, indices) -> "ModeSet":
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            eigenvalues=self.eigenvalues[indices],
            modes=self.modes[:, indices],
            branch=[self.branch[i] for i in indices] if self.branch else None,
            analytical_n=[self.analytical_n[i] for i in indices]
            if self.analytical_n else None,
            free_floating=self.free_floating[indices]
            if self.free_floating is not None else None,
        )


def solve_gevp(K: np.ndarray, M: np.ndarray) -> ModeSet:
    """Solve K U = lambda M U for the full spectrum.

    K must be symmetric positive semi-definite and M symmetric positive
    definite; failure of the mass Cholesky factorization is fatal.
    """
    K = np.asarray(K, dtype=float)
    M = np.asarray(M, dtype=float)
    if K.shape != M.shape or K.shape[0] != K.shape[1]:
        raise ValueError("K and M must be square and of equal size")
    try:
        lam, U = scipy.linalg.eigh(K, M, driver="gvd")
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(
            "generalized eigensolve failed (mass matrix not positive "
            f"definite or iteration did not converge): {exc}") from exc
    return ModeSet(eigenvalues=lam, modes=U)


def phase_constraint_rows(space) -> np.ndarray:
    """The two phase-fixing rows u_x'(0) = 0 and u_y(0) = 0 on [x | y] DOFs."""
    n = space.dim
    a = space.domain[0]
    idx, ders = space.eval_basis(a, 1)
    rows = np.zeros((2, 2 * n))
    rows[0, idx] = ders[1]
    rows[1, n + idx] = ders[0]
    return rows


def apply_phase_constraints(K: np.ndarray, M: np.ndarray, space):
    """Build the constrained pencil with the phase conditions eliminated.

    Returns ``(K_c, M_c, T)`` where T is an orthonormal null-space basis of
    the two constraint rows (from a Householder QR of their transpose), so
    every reconstructed mode U = T u_c satisfies both constraints.
    """
    rows = phase_constraint_rows(space)
    Q, R = scipy.linalg.qr(rows.T, mode="full")
    diag = np.abs(np.diag(R[:2, :2]))
    if np.min(diag) < 1e-12 * max(np.max(diag), 1.0):
        raise RuntimeError("phase constraint rows are rank deficient")
    T = Q[:, 2:]
    K_c = T.T @ K @ T
    M_c = T.T @ M @ T
    return 0.5 * (K_c + K_c.T), 0.5 * (M_c + M_c.T), T


def modal_expansion_coefficients(mode_set: ModeSet, M: np.ndarray,
                                 f: np.ndarray, zero_tol: float = 1e-12) -> np.ndarray:
    """Expansion coefficients c_n = (U_n^T f) / (lambda_n U_n^T M U_n).

    All included modes must have positive eigenvalues; rigid modes are to be
    excluded by the caller.
    """
    lam = mode_set.eigenvalues
    scale = float(np.max(np.abs(lam))) if lam.size else 0.0
    if np.any(lam <= zero_tol * scale) or np.any(lam <= 0.0):
        raise ValueError("modal expansion requires strictly positive eigenvalues")
    U = mode_set.modes
    num = U.T @ np.asarray(f, dtype=float)
    den = np.einsum("ij,ij->j", U, M @ U)
    return num / (lam * den)
