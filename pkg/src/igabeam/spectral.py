"""Full-spectrum error analysis: classify, filter, match and compare discrete
ring modes against the closed-form solution, and measure locking.

The pipeline solves the unconstrained system, rotates each degenerate
eigenvalue cluster onto the combination that satisfies the phase conditions
u_x'(0) = u_y(0) = 0, and assigns every discrete mode to an analytical
candidate by minimal L2 mode error (optimal injective assignment).  The
retained pairs give the relative eigenvalue and mode error curves over the
normalized mode number; comparing a coarse curve against an overkill curve
of the same formulation yields the locking verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .analytical import AnalyticalMode, analytical_modes
from .assembly import (Formulation, FormulationSpec, build_system,
                       element_quadrature)
from .eigensolver import ModeSet, phase_constraint_rows, solve_gevp
from .ring import RingParams, rotate_to_curvilinear
from .splines import SplineSpace, prolongation_matrix

__all__ = [
    "LockingVerdict",
    "SpectrumReport",
    "SpectrumRow",
    "classify_discrete",
    "compute_spectrum_report",
    "eigen_convergence_study",
    "error_spectra",
    "filter_free_floating",
    "locking_metric",
    "match_modes",
    "pythagorean_residuals",
    "rotate_degenerate_clusters",
]

# mode errors at or above this are treated as unmatched (orthogonal shapes
# have error sqrt(2); genuinely resolved modes stay well below)
MATCH_ERROR_CAP = 1.0


# ---------------------------------------------------------------------------
# report containers
# ---------------------------------------------------------------------------

@dataclass
class SpectrumRow:
    branch: str
    n: int
    n_over_N: float
    lambda_h: float
    lambda_exact: float
    ev_err: float               # signed (lambda_h - lambda) / lambda
    mode_err: float
    pyth_residual: float = math.nan
    constraint_residual: float = math.nan
    r_ratio: float = math.nan

    @property
    def ev_err_abs(self) -> float:
        return abs(self.ev_err)


@dataclass
class SpectrumReport:
    formulation: str
    p: int
    n_elem: int
    rows: list[SpectrumRow]
    meta: dict = field(default_factory=dict)

    def branch_rows(self, branch: str) -> list[SpectrumRow]:
        return sorted((r for r in self.rows if r.branch == branch),
                      key=lambda r: r.n)

    def curve(self, branch: str, quantity: str):
        """(n_over_N, |error|) arrays for one branch and quantity."""
        rows = self.branch_rows(branch)
        x = np.array([r.n_over_N for r in rows])
        if quantity == "eigenvalue":
            y = np.array([abs(r.ev_err) for r in rows])
        elif quantity == "mode":
            y = np.array([r.mode_err for r in rows])
        else:
            raise ValueError("quantity must be 'eigenvalue' or 'mode'")
        return x, y

    def write_csv(self, path, header_comment: str | None = None):
        cols = ("formulation,p,n_elem,branch,n,n_over_N,lambda_h,"
                "lambda_exact,ev_err,mode_err_L2,pyth_residual")
        lines = []
        if header_comment:
            lines.append(f"# {header_comment}")
        lines.append(cols)
        for r in sorted(self.rows, key=lambda r: (r.branch, r.n)):
            lines.append(
                f"{self.formulation},{self.p},{self.n_elem},{r.branch},{r.n},"
                f"{r.n_over_N:.17g},{r.lambda_h:.17g},{r.lambda_exact:.17g},"
                f"{r.ev_err:.17g},{r.mode_err:.17g},{r.pyth_residual:.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


@dataclass
class LockingVerdict:
    """Deviation between coarse and overkill normalized error curves."""

    formulation: str
    branch: str
    quantity: str
    metric: float
    verdict: str                # "locking", "locking-free" or "indeterminate"
    locking_threshold: float
    free_threshold: float


# ---------------------------------------------------------------------------
# mode evaluation helpers
# ---------------------------------------------------------------------------

def _quad_grid(space: SplineSpace, params: RingParams, n_points: int | None = None):
    """Quadrature angles and R-weighted weights for mode integrals."""
    npts = n_points if n_points is not None else space.degree + 2
    thetas, weights = element_quadrature(space, npts)
    return thetas, weights * params.R


def _mode_values(space: SplineSpace, modes: np.ndarray, thetas: np.ndarray):
    """Cartesian component values of each mode column at the given angles."""
    n = space.dim
    phi = space.design_matrix(thetas)
    ux = phi @ modes[:n, :]
    uy = phi @ modes[n:, :]
    return ux, uy


# ---------------------------------------------------------------------------
# classification and filtering
# ---------------------------------------------------------------------------

def classify_discrete(mode_set: ModeSet, space: SplineSpace, params: RingParams,
                      ratio_band: float = 1e-3):
    """Branch labels from the curvilinear amplitude ratio of each mode.

    |r| = sqrt(int v^2 / int w^2) with v, w the rotated components; modes with
    |r| < 1 are transverse, |r| > 1 circumferential.  Within ``ratio_band`` of
    1 the label falls back on the eigenvalue (zero -> transverse, else
    circumferential); a vanishing transverse component is circumferential
    outright.  The ratio is diagnostic: the final branch of a matched mode
    comes from its analytical partner.
    """
    thetas, weights = _quad_grid(space, params)
    ux, uy = _mode_values(space, mode_set.modes, thetas)
    w_comp, v_comp = rotate_to_curvilinear(ux.T, uy.T, thetas)
    int_v = (v_comp ** 2) @ weights
    int_w = (w_comp ** 2) @ weights
    lam = mode_set.eigenvalues
    lam_scale = float(np.max(np.abs(lam)))
    labels = []
    ratios = np.full(mode_set.n_modes, np.inf)
    for i in range(mode_set.n_modes):
        if int_w[i] <= 1e-24 * (int_v[i] + int_w[i]):
            labels.append("circumferential")
            continue
        r = math.sqrt(int_v[i] / int_w[i])
        ratios[i] = r
        if abs(r - 1.0) <= ratio_band:
            labels.append("transverse" if lam[i] < 1e-8 * lam_scale
                          else "circumferential")
        elif r < 1.0:
            labels.append("transverse")
        else:
            labels.append("circumferential")
    return labels, ratios


def _normalized_constraint_rows(space: SplineSpace) -> np.ndarray:
    rows = phase_constraint_rows(space)
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def constraint_residuals(mode_set: ModeSet, space: SplineSpace) -> np.ndarray:
    """Angle-type residual of the phase conditions per mode (0 = satisfied)."""
    rows = _normalized_constraint_rows(space)
    U = mode_set.modes / np.linalg.norm(mode_set.modes, axis=0, keepdims=True)
    return np.linalg.norm(rows @ U, axis=0)


def _degenerate_clusters(lam: np.ndarray, rel_gap: float = 1e-6,
                         zero_rel: float = 1e-12):
    """Consecutive index groups of (near-)equal eigenvalues.

    Eigenvalues below ``zero_rel`` times the largest one form one zero
    cluster; positive ones are grouped when the relative gap to the previous
    eigenvalue is below ``rel_gap``.
    """
    scale = float(np.max(np.abs(lam)))
    clusters = []
    current = [0]
    for i in range(1, lam.size):
        both_zero = lam[i] < zero_rel * scale and lam[i - 1] < zero_rel * scale
        close = (lam[i] - lam[i - 1]) <= rel_gap * max(abs(lam[i]), zero_rel * scale)
        if both_zero or close:
            current.append(i)
        else:
            clusters.append(current)
            current = [i]
    clusters.append(current)
    return clusters


def rotate_degenerate_clusters(mode_set: ModeSet, space: SplineSpace,
                               rel_gap: float = 1e-6) -> ModeSet:
    """Rotate each degenerate cluster onto phase-constraint-aligned directions.

    Within a cluster the eigenbasis is arbitrary; the singular vectors of the
    constraint rows restricted to the cluster order the basis from
    constraint-satisfying to constraint-violating without changing the
    eigenspace.  Single modes are left untouched.
    """
    rows = _normalized_constraint_rows(space)
    U = mode_set.modes.copy()
    for cluster in _degenerate_clusters(mode_set.eigenvalues, rel_gap):
        if len(cluster) < 2:
            continue
        block = U[:, cluster]
        scale = np.linalg.norm(block, axis=0)
        L = rows @ (block / scale)
        # right singular vectors, smallest singular value first
        _, _, vt = np.linalg.svd(L, full_matrices=True)
        rot = vt[::-1].T
        U[:, cluster] = block @ rot
    return ModeSet(eigenvalues=mode_set.eigenvalues.copy(), modes=U)


def filter_free_floating(mode_set: ModeSet, space: SplineSpace,
                         tol: float = 1e-4, rotate: bool = True):
    """Retain the modes that satisfy the free-floating phase conditions.

    Degenerate clusters are rotated first so that each cluster exposes its
    constraint-satisfying combination.  Returns ``(retained, kept_indices,
    residuals)`` where ``residuals`` refers to the (rotated) full set.  On a
    solve with the constraints already built into the trial space this keeps
    everything; on an unconstrained ring solve it rejects the sine-phase
    family, about half of the spectrum.
    """
    ms = rotate_degenerate_clusters(mode_set, space) if rotate else mode_set
    res = constraint_residuals(ms, space)
    keep = np.flatnonzero(res < tol)
    retained = ms.take(keep)
    retained = ModeSet(eigenvalues=retained.eigenvalues, modes=retained.modes,
                       free_floating=np.ones(keep.size, dtype=bool))
    return retained, keep, res


# ---------------------------------------------------------------------------
# matching and error spectra
# ---------------------------------------------------------------------------

def match_modes(mode_set: ModeSet, space: SplineSpace, params: RingParams,
                candidates: list[AnalyticalMode] | None = None,
                error_cap: float = MATCH_ERROR_CAP):
    """Optimal injective assignment discrete mode -> analytical (n, branch).

    Both families are unit L2 normalized and the sign of each discrete mode
    is chosen to minimize the error.  The assignment minimizes the total L2
    mode error (rectangular Hungarian), so phase-orthogonal or unresolved
    modes, whose error saturates near sqrt(2), lose every slot; pairs with
    error above ``error_cap`` are discarded.

    Returns a list of ``(mode_index, AnalyticalMode, mode_error, sign)``.
    """
    if candidates is None:
        n_max = space.dim // 2 + 4
        candidates = [m for m in analytical_modes(n_max, params) if m.free_floating]
    thetas, weights = _quad_grid(space, params)
    ux, uy = _mode_values(space, mode_set.modes, thetas)
    norms = np.sqrt((ux ** 2 + uy ** 2).T @ weights)
    ux /= norms
    uy /= norms

    ax = np.empty((len(candidates), thetas.size))
    ay = np.empty_like(ax)
    for j, cand in enumerate(candidates):
        ax[j], ay[j] = cand.cartesian(thetas)

    ip = (ux * weights[:, None]).T @ ax.T + (uy * weights[:, None]).T @ ay.T
    err = np.sqrt(np.maximum(2.0 - 2.0 * np.abs(ip), 0.0))

    rows, cols = scipy.optimize.linear_sum_assignment(err)
    out = []
    for i, j in zip(rows, cols):
        if err[i, j] <= error_cap:
            sign = 1.0 if ip[i, j] >= 0 else -1.0
            out.append((int(i), candidates[j], float(err[i, j]), sign))
    out.sort(key=lambda item: item[0])
    return out


def error_spectra(mode_set: ModeSet, space: SplineSpace, params: RingParams,
                  formulation: str, assignment=None,
                  include_rigid: bool = False) -> SpectrumReport:
    """Relative eigenvalue and L2 mode errors of the matched spectrum.

    Pairs whose analytical eigenvalue is zero (rigid modes) are excluded
    unless ``include_rigid``; the normalized mode number uses the count of
    matched modes N per branch.
    """
    if assignment is None:
        assignment = match_modes(mode_set, space, params)
    res = constraint_residuals(mode_set, space)
    _, ratios = classify_discrete(mode_set, space, params)

    per_branch = {"transverse": [], "circumferential": []}
    for idx, cand, mode_err, _sign in assignment:
        branch = "transverse" if cand.branch == 1 else "circumferential"
        per_branch[branch].append((idx, cand, mode_err))

    rows = []
    counts = {}
    for branch, items in per_branch.items():
        counts[branch] = len(items)
        N = max(len(items), 1)
        for idx, cand, mode_err in items:
            if cand.lam <= 0.0 and not include_rigid:
                continue
            lam_h = float(mode_set.eigenvalues[idx])
            ev = (lam_h - cand.lam) / cand.lam if cand.lam > 0 else math.nan
            rows.append(SpectrumRow(
                branch=branch, n=cand.n, n_over_N=cand.n / N,
                lambda_h=lam_h, lambda_exact=cand.lam, ev_err=ev,
                mode_err=mode_err, constraint_residual=float(res[idx]),
                r_ratio=float(ratios[idx]),
            ))
    meta = {"matched_per_branch": counts,
            "n_modes": mode_set.n_modes,
            "sign_changes_ev": _sign_changes(rows)}
    return SpectrumReport(formulation=formulation, p=space.degree,
                          n_elem=space.n_elem, rows=rows, meta=meta)


def _sign_changes(rows: list[SpectrumRow]) -> dict:
    out = {}
    for branch in ("transverse", "circumferential"):
        errs = [r.ev_err for r in sorted(rows, key=lambda r: r.n)
                if r.branch == branch]
        out[branch] = int(np.sum(np.diff(np.sign(errs)) != 0)) if errs else 0
    return out


def compute_spectrum_report(kind: Formulation, p: int, n_elem: int,
                            params: RingParams,
                            system=None) -> tuple[SpectrumReport, ModeSet, object]:
    """One-call pipeline: assemble, solve, rotate clusters, match, report.

    Returns ``(report, rotated mode set, system)`` so callers can reuse the
    modes for further checks.
    """
    if system is None:
        system = build_system(FormulationSpec(kind, p, n_elem), params)
    ms = solve_gevp(system.K, system.M)
    ms = rotate_degenerate_clusters(ms, system.space)
    report = error_spectra(ms, system.space, params, kind.value)
    return report, ms, system


# ---------------------------------------------------------------------------
# Pythagorean identity check
# ---------------------------------------------------------------------------

def pythagorean_residuals(mode_set: ModeSet, space: SplineSpace,
                          params: RingParams, assignment,
                          overkill_space: SplineSpace,
                          K_overkill: np.ndarray) -> dict[int, float]:
    """Residual of (ev error) + (mode error)^2 = (energy error)^2 per mode.

    Both shapes are unit L2 normalized (the equal-norm proviso).  The energy
    of the discrete mode is evaluated through the overkill standard stiffness
    after exact prolongation; the cross term uses the eigenfunction identity
    a(u, U) = lambda m(u, U), so only L2 inner products of the analytical
    mode are needed.  Rigid pairs are skipped.
    """
    P = prolongation_matrix(space, overkill_space)
    thetas, weights = _quad_grid(overkill_space, params)
    n = space.dim
    rhoA = params.rho * params.A
    out = {}
    for idx, cand, _err, sign in assignment:
        if cand.lam <= 0.0:
            continue
        u = mode_set.modes[:, idx]
        fine = np.concatenate([P @ u[:n], P @ u[n:]])
        ux = overkill_space.evaluate(fine[:overkill_space.dim], thetas)
        uy = overkill_space.evaluate(fine[overkill_space.dim:], thetas)
        norm = math.sqrt(((ux ** 2 + uy ** 2) * weights).sum())
        ux /= norm
        uy /= norm
        fine /= norm
        axv, ayv = cand.cartesian(thetas)
        ip = sign * ((ux * axv + uy * ayv) * weights).sum()
        lam_h = float(mode_set.eigenvalues[idx])
        a_hh = float(fine @ (K_overkill @ fine)) / rhoA
        t1 = (lam_h - cand.lam) / cand.lam
        t2 = 2.0 - 2.0 * ip
        t3 = (a_hh - 2.0 * cand.lam * ip + cand.lam) / cand.lam
        out[idx] = t1 + t2 - t3
    return out


# ---------------------------------------------------------------------------
# locking indicator and convergence study
# ---------------------------------------------------------------------------

def locking_metric(coarse: SpectrumReport, overkill: SpectrumReport,
                   branch: str = "transverse", quantity: str = "eigenvalue",
                   locking_threshold: float = 1.0,
                   free_threshold: float = 0.5,
                   floor: float = 1e-16) -> LockingVerdict:
    """Median decade-distance between coarse and overkill normalized curves.

    The overkill curve is interpolated (in log10 of the error) onto the
    coarse normalized mode numbers; the metric is the median absolute
    log-ratio.  Above ``locking_threshold`` decades the formulation locks,
    below ``free_threshold`` it is locking-free, in between indeterminate.
    """
    if coarse.formulation != overkill.formulation:
        raise ValueError("compare a formulation against its own overkill run")
    xc, yc = coarse.curve(branch, quantity)
    xo, yo = overkill.curve(branch, quantity)
    if xc.size == 0 or xo.size == 0:
        raise ValueError("empty spectrum curve")
    lo, hi = max(xc.min(), xo.min()), min(xc.max(), xo.max())
    mask = (xc >= lo) & (xc <= hi)
    if not np.any(mask):
        raise ValueError("normalized mode ranges do not overlap")
    yo_interp = np.interp(xc[mask], xo, np.log10(np.maximum(yo, floor)))
    diffs = np.abs(np.log10(np.maximum(yc[mask], floor)) - yo_interp)
    metric = float(np.median(diffs))
    if metric > locking_threshold:
        verdict = "locking"
    elif metric < free_threshold:
        verdict = "locking-free"
    else:
        verdict = "indeterminate"
    return LockingVerdict(coarse.formulation, branch, quantity, metric,
                          verdict, locking_threshold, free_threshold)


def eigen_convergence_study(kind: Formulation, p: int, meshes,
                            params: RingParams, target_n: int = 5,
                            branch: str = "transverse"):
    """Eigenvalue and mode errors of one target mode under h-refinement.

    Returns a dict with per-mesh errors and the least-squares log-log slopes
    (positive slope = error decays under refinement).
    """
    ev_errs, mode_errs, hs = [], [], []
    for n_elem in meshes:
        report, _, _ = compute_spectrum_report(kind, p, n_elem, params)
        row = [r for r in report.branch_rows(branch) if r.n == target_n]
        if not row:
            raise RuntimeError(
                f"target mode n={target_n} not matched on mesh {n_elem}")
        ev_errs.append(abs(row[0].ev_err))
        mode_errs.append(row[0].mode_err)
        hs.append(1.0 / n_elem)
    ev_slope = float(np.polyfit(np.log(hs), np.log(ev_errs), 1)[0])
    mode_slope = float(np.polyfit(np.log(hs), np.log(mode_errs), 1)[0])
    return {"meshes": list(meshes), "ev_errors": ev_errs,
            "mode_errors": mode_errs, "ev_slope": ev_slope,
            "mode_slope": mode_slope}
