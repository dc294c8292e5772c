"""Closed-form eigensolution of the freely vibrating circular ring.

Follows Soedel (Vibrations of Shells and Plates, ch. 5): the free-floating
mode family v_n = A_1n sin(n t), w_n = A_2n cos(n t) yields an eigenvalue
pair (lambda_1n, lambda_2n) per mode number n.  The lower branch is
transverse-dominated (|A_1n/A_2n| <= 1), the upper circumferential-dominated.
The first 21 pairs at slenderness R/t = 2000/3 ship as a CSV fixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .ring import RingParams, rotate_to_cartesian

__all__ = [
    "AnalyticalMode",
    "analytical_modes",
    "classify_analytical",
    "load_fixture",
    "soedel_amplitude_ratio",
    "soedel_eigenvalues",
    "verify_fixture",
]

_FIXTURE = "ring_eigenvalues.csv"


def soedel_eigenvalues(n: int, params: RingParams) -> tuple[float, float]:
    """Eigenvalue pair (lambda_1n, lambda_2n) for mode number n >= 0.

    With C = (EA R^2 + EI n^2)(n^2 + 1) and B the square-root term, the pair
    is (C -+ B) / (2 R^4 rho A).  The lower branch is evaluated through
    C^2 - B^2 = 4 EA R^2 EI n^2 (n^2 - 1)^2, which avoids the cancellation
    in C - B and makes the n = 0, 1 zeros exact.
    """
    if n < 0:
        raise ValueError("mode number must be nonnegative")
    EA, EI, R = params.EA, params.EI, params.R
    n2 = float(n * n)
    C = (EA * R * R + EI * n2) * (n2 + 1.0)
    B = math.sqrt((EA ** 2 * R ** 4 + EI ** 2 * n2 * n2) * (n2 + 1.0) ** 2
                  + 2.0 * EA * R * R * EI * n2 * (6.0 * n2 - n2 * n2 - 1.0))
    denom = 2.0 * R ** 4 * params.rho * params.A
    k1_num = 4.0 * EA * R * R * EI * n2 * (n2 - 1.0) ** 2
    lam1 = k1_num / ((C + B) * denom)
    lam2 = (C + B) / denom
    return lam1, lam2


def soedel_amplitude_ratio(n: int, i: int, params: RingParams) -> float:
    """Relative amplitude r_in = A_1n / A_2n of branch i in {1, 2}.

    At n = 0 both branches carry a single displacement component and the
    ratio is reported as 0 (the branch-1 formula would be 0/0 there).
    """
    if i not in (1, 2):
        raise ValueError("branch index must be 1 or 2")
    if n < 0:
        raise ValueError("mode number must be nonnegative")
    if n == 0:
        return 0.0
    EA, EI, R = params.EA, params.EI, params.R
    lam = soedel_eigenvalues(n, params)[i - 1]
    nf = float(n)
    num = EA / R ** 2 * nf + EI / R ** 4 * nf ** 3
    den = params.rho * params.A * lam - EA / R ** 2 * nf ** 2 - EI / R ** 4 * nf ** 2
    return num / den


@dataclass(frozen=True)
class AnalyticalMode:
    """One closed-form ring mode, unit L2 norm over the ring.

    ``branch`` is 1 (transverse-dominated) or 2 (circumferential-dominated);
    ``a1``/``a2`` are the normalized circumferential/transverse amplitudes;
    ``free_floating`` marks membership in the cosine-phase family that
    satisfies u_x'(0) = u_y(0) = 0 (only the rigid rotation falls outside).
    """

    n: int
    branch: int
    lam: float
    r: float
    a1: float
    a2: float
    R: float
    free_floating: bool = True

    def curvilinear(self, theta):
        """(v, w) components at the angles ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if self.n == 0 and self.branch == 1:
            return self.a1 * np.ones_like(theta), np.zeros_like(theta)
        return self.a1 * np.sin(self.n * theta), self.a2 * np.cos(self.n * theta)

    def cartesian(self, theta):
        """(U_x, U_y) components at the angles ``theta``."""
        v, w = self.curvilinear(theta)
        return rotate_to_cartesian(w, v, np.asarray(theta, dtype=float))

    def cartesian_derivative(self, theta):
        """d(U_x)/dt and d(U_y)/dt at the angles ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if self.n == 0 and self.branch == 1:
            return -self.a1 * np.cos(theta), -self.a1 * np.sin(theta)
        n = self.n
        s, c = np.sin(theta), np.cos(theta)
        sn, cn = np.sin(n * theta), np.cos(n * theta)
        ux_t = -self.a2 * (n * sn * c + cn * s) - self.a1 * (n * cn * s + sn * c)
        uy_t = self.a2 * (cn * c - n * sn * s) + self.a1 * (n * cn * c - sn * s)
        return ux_t, uy_t


def _normalized_amplitudes(n: int, branch: int, r: float, R: float):
    """Amplitudes (a1, a2) scaled to unit L2 norm of the Cartesian pair."""
    if n == 0:
        if branch == 1:           # rigid rotation: v = const, w = 0
            a1, a2 = 1.0, 0.0
        else:                     # breathing: v = 0, w = const
            a1, a2 = 0.0, 1.0
        norm2 = 2.0 * math.pi * R * (a1 * a1 + a2 * a2)
    else:
        a1, a2 = r, 1.0
        norm2 = math.pi * R * (a1 * a1 + a2 * a2)
    scale = 1.0 / math.sqrt(norm2)
    return a1 * scale, a2 * scale


def analytical_modes(n_max: int, params: RingParams) -> list[AnalyticalMode]:
    """All modes with mode number up to ``n_max``, both branches."""
    out = []
    for n in range(n_max + 1):
        lam1, lam2 = soedel_eigenvalues(n, params)
        for branch, lam in ((1, lam1), (2, lam2)):
            r = soedel_amplitude_ratio(n, branch, params)
            a1, a2 = _normalized_amplitudes(n, branch, r, params.R)
            out.append(AnalyticalMode(
                n=n, branch=branch, lam=lam, r=r, a1=a1, a2=a2, R=params.R,
                free_floating=not (n == 0 and branch == 1)))
    return out


def classify_analytical(n_max: int, params: RingParams, band: float = 1e-12):
    """Mode-number index sets per branch by the amplitude-ratio thresholds.

    Returns a dict with the four lists: transverse/circumferential mode
    numbers on the lambda_1 branch (|r_1n| <= 1 vs > 1) and on the lambda_2
    branch (|r_2n| < 1 vs >= 1).  ``band`` guards the |r| = 1 boundary
    against roundoff.  Note the breathing mode (n = 0, ratio 0) lands in
    ``transverse_lambda2`` by the letter of these thresholds; the discrete
    pipeline therefore assigns branches through mode matching, not through
    these sets.
    """
    t1, c1, t2, c2 = [], [], [], []
    for n in range(n_max + 1):
        r1 = soedel_amplitude_ratio(n, 1, params)
        r2 = soedel_amplitude_ratio(n, 2, params)
        (t1 if abs(r1) <= 1.0 + band else c1).append(n)
        (c2 if abs(r2) >= 1.0 - band else t2).append(n)
    return {"transverse_lambda1": t1, "circumferential_lambda1": c1,
            "transverse_lambda2": t2, "circumferential_lambda2": c2}


# ---------------------------------------------------------------------------
# Fixture handling
# ---------------------------------------------------------------------------

def load_fixture():
    """The shipped eigenvalue table as a structured array (n, lam1, lam2, r1, r2)."""
    with resources.files("igabeam.data").joinpath(_FIXTURE).open() as fh:
        rows = [line.strip() for line in fh
                if line.strip() and not line.startswith("#")]
    data = np.array([[float(x) for x in row.split(",")] for row in rows])
    return data


def verify_fixture(params: RingParams | None = None, rel_tol: float = 1e-12):
    """Recompute the table and compare entry-wise at ``rel_tol`` relative.

    Exact zeros in the table are compared absolutely against rel_tol times
    the column scale.  Returns (all_ok, per-row report lines).
    """
    if params is None:
        params = RingParams.canonical()
    table = load_fixture()
    report = []
    ok_all = True
    col_scale = np.max(np.abs(table[:, 1:]), axis=0)
    for row in table:
        n = int(row[0])
        lam1, lam2 = soedel_eigenvalues(n, params)
        r1 = soedel_amplitude_ratio(n, 1, params)
        r2 = soedel_amplitude_ratio(n, 2, params)
        devs = []
        for j, computed in enumerate((lam1, lam2, r1, r2)):
            expected = row[1 + j]
            if expected == 0.0:
                # zero entries: absolute check against the column scale
                err = abs(computed) / col_scale[j]
            else:
                err = abs(computed - expected) / abs(expected)
            devs.append(err)
            ok_all = ok_all and err <= rel_tol
        status = "ok" if max(devs) <= rel_tol else "FAIL"
        report.append(f"n={n:2d}  max rel dev {max(devs):.3e}  {status}")
    return ok_all, report
