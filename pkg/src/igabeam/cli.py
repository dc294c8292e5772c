"""Command-line front end: study matrices, CSV/JSON reports, fixture checks.

Subcommands: ``spectrum``, ``locking-indicator``, ``eigen-convergence``,
``cantilever``, ``verify-fixtures``.  A study writes ``report.csv``,
``verdicts.json`` and ``manifest.json`` into its output directory; outputs
are deterministic for a fixed configuration up to the timestamped header
line.  Options may come from an INI config file (``--config``), with command
line flags taking precedence.  ``IGABEAM_WORKERS`` sets the process-pool
width for independent cases (default 1, sequential).

Exit codes: 0 ok, 2 configuration error, 3 numeric failure, 4 fixture
mismatch.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analytical import verify_fixture
from .assembly import Formulation, FormulationSpec, build_system
from .cantilever import (CantileverCase, cantilever_convergence,
                         reference_solution, relative_l2_distance,
                         solve_cantilever)
from .ring import RingParams
from .spectral import (compute_spectrum_report, eigen_convergence_study,
                       locking_metric, pythagorean_residuals, match_modes)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FIXTURE = 4

_ALL_FORMULATIONS = [f.value for f in Formulation]


class ConfigError(Exception):
    pass


@dataclass
class StudyConfig:
    """Resolved configuration of one study run."""

    kind: str
    formulations: list[str]
    degrees: list[int]
    meshes: list[int]
    overkill: int = 2048
    slenderness: float = 2000.0 / 3.0
    target_mode: int = 5
    ref_p: int = 5
    ref_elems: int = 1024
    check_reference: bool = False
    locking_threshold: float = 1.0
    free_threshold: float = 0.5
    outdir: str = "study-out"

    def validate(self):
        if self.kind not in ("spectrum", "locking-indicator",
                             "eigen-convergence", "cantilever"):
            raise ConfigError(f"unknown study kind {self.kind!r}")
        if not self.formulations:
            raise ConfigError("empty formulation list")
        for f in self.formulations:
            if f not in _ALL_FORMULATIONS:
                raise ConfigError(f"unknown formulation {f!r}")
        if not self.degrees or any(p < 2 for p in self.degrees):
            raise ConfigError("degrees must be a nonempty list of p >= 2")
        if not self.meshes or any(m <= 0 for m in self.meshes):
            raise ConfigError("meshes must be positive")
        if self.kind in ("spectrum", "locking-indicator") \
                and self.overkill <= max(self.meshes):
            raise ConfigError("overkill mesh must exceed the coarse meshes")
        if self.slenderness <= 0:
            raise ConfigError("slenderness must be positive")

    def params(self) -> RingParams:
        return RingParams.with_slenderness(self.slenderness)


def _parse_list(text, cast):
    return [cast(tok) for tok in str(text).replace(" ", "").split(",") if tok]


def _formulation_list(text: str) -> list[str]:
    if text.strip() == "all":
        return list(_ALL_FORMULATIONS)
    return _parse_list(text, str)


# ---------------------------------------------------------------------------
# study runners
# ---------------------------------------------------------------------------

def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(cfg: StudyConfig, outdir: Path, extra: dict):
    manifest = {
        "version": __version__,
        "generated": _timestamp(),
        "config": asdict(cfg),
        "parameters": {
            "E": cfg.params().E, "rho": cfg.params().rho,
            "R": cfg.params().R, "t": cfg.params().t, "b": cfg.params().b,
            "provenance": "ratios pinned by the analytical eigenvalue table; "
                          "absolute scale conventional",
        },
        "thresholds": {
            "locking_decades": cfg.locking_threshold,
            "locking_free_decades": cfg.free_threshold,
            "rigid_mode_rel_tol": 1e-8,
            "match_error_cap": 1.0,
        },
    }
    manifest.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _spectrum_case(args):
    """Worker for one (formulation, p) spectrum case."""
    form, p, n_elem, overkill, slenderness = args
    params = RingParams.with_slenderness(slenderness)
    kind = Formulation(form)
    coarse, ms, system = compute_spectrum_report(kind, p, n_elem, params)
    over, _, over_system = compute_spectrum_report(kind, p, overkill, params)
    # energy identity residuals against the standard overkill stiffness
    std = build_system(FormulationSpec(Formulation.STANDARD_FULL, p, overkill),
                       params, space=over_system.space)
    assignment = match_modes(ms, system.space, params)
    pyth = pythagorean_residuals(ms, system.space, params, assignment,
                                 over_system.space, std.K)
    by_idx = {idx: (cand, err) for idx, cand, err, _ in assignment}
    for row in coarse.rows:
        for idx, (cand, _e) in by_idx.items():
            branch = "transverse" if cand.branch == 1 else "circumferential"
            if cand.n == row.n and branch == row.branch and idx in pyth:
                row.pyth_residual = pyth[idx]
    return form, p, coarse, over


def run_spectrum_study(cfg: StudyConfig, outdir: Path) -> dict:
    cases = [(f, p, cfg.meshes[0], cfg.overkill, cfg.slenderness)
             for f in cfg.formulations for p in cfg.degrees]
    results = _map_cases(_spectrum_case, cases)

    rows = []
    verdicts = {}
    for form, p, coarse, over in results:
        for which, rep in (("coarse", coarse), ("overkill", over)):
            for r in sorted(rep.rows, key=lambda r: (r.branch, r.n)):
                rows.append((rep.formulation, rep.p, rep.n_elem, r.branch,
                             r.n, r.n_over_N, r.lambda_h, r.lambda_exact,
                             r.ev_err, r.mode_err, r.pyth_residual))
        key = f"{form}-p{p}"
        verdicts[key] = {}
        for branch in ("transverse", "circumferential"):
            for quantity in ("eigenvalue", "mode"):
                v = locking_metric(coarse, over, branch, quantity,
                                   cfg.locking_threshold, cfg.free_threshold)
                verdicts[key][f"{branch}-{quantity}"] = {
                    "metric_decades": v.metric, "verdict": v.verdict}
        verdicts[key]["sign_changes"] = coarse.meta["sign_changes_ev"]
        verdicts[key]["matched_per_branch"] = coarse.meta["matched_per_branch"]

    _write_report_csv(outdir, rows)
    return verdicts


def _write_report_csv(outdir: Path, rows):
    header = ("formulation,p,n_elem,branch,n,n_over_N,lambda_h,lambda_exact,"
              "ev_err,mode_err_L2,pyth_residual")
    lines = [f"# generated {_timestamp()}", header]
    for row in sorted(rows, key=lambda r: (r[0], r[1], r[2], r[3], r[4])):
        lines.append(",".join(
            f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    (outdir / "report.csv").write_text("\n".join(lines) + "\n")


def run_eigen_convergence_study(cfg: StudyConfig, outdir: Path) -> dict:
    params = cfg.params()
    rows = []
    verdicts = {}
    for form in cfg.formulations:
        for p in cfg.degrees:
            st = eigen_convergence_study(Formulation(form), p, cfg.meshes,
                                         params, target_n=cfg.target_mode)
            for n_elem, ev, md in zip(st["meshes"], st["ev_errors"],
                                      st["mode_errors"]):
                rows.append((form, p, n_elem, "transverse", cfg.target_mode,
                             cfg.target_mode / (n_elem / 2), math_nan(),
                             math_nan(), ev, md, math_nan()))
            verdicts[f"{form}-p{p}"] = {
                "ev_slope": st["ev_slope"], "mode_slope": st["mode_slope"],
                "ev_errors": st["ev_errors"], "mode_errors": st["mode_errors"],
                "meshes": st["meshes"],
            }
    _write_report_csv(outdir, rows)
    return verdicts


def math_nan() -> float:
    return float("nan")


def run_cantilever_study(cfg: StudyConfig, outdir: Path) -> dict:
    params = cfg.params()
    ref = reference_solution(params, p=cfg.ref_p, n_elem=cfg.ref_elems)
    verdicts = {}
    if cfg.check_reference:
        ref2 = reference_solution(params, p=cfg.ref_p - 1,
                                  n_elem=2 * cfg.ref_elems)
        dist = relative_l2_distance(ref, ref2)
        verdicts["reference_independence"] = {
            "distance": dist, "pass": bool(dist < 1e-9)}
    lines = [f"# generated {_timestamp()}",
             "formulation,p,n_elem,R_over_t,rel_L2_err,slope_estimate,plateau_flag"]
    for form in sorted(cfg.formulations):
        for p in cfg.degrees:
            res = cantilever_convergence(Formulation(form), p, cfg.meshes,
                                         params, ref)
            for n_elem, err in zip(res["meshes"], res["errors"]):
                lines.append(f"{form},{p},{n_elem},{cfg.slenderness:.17g},"
                             f"{err:.17g},{res['slope']:.17g},"
                             f"{int(res['plateau'])}")
            verdicts[f"{form}-p{p}"] = {
                "slope": res["slope"], "plateau": res["plateau"],
                "errors": res["errors"], "meshes": res["meshes"]}
    (outdir / "report.csv").write_text("\n".join(lines) + "\n")
    return verdicts


def _map_cases(fn, cases):
    workers = int(os.environ.get("IGABEAM_WORKERS", "1"))
    if workers <= 1 or len(cases) <= 1:
        return [fn(c) for c in cases]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cases))


def run_study(cfg: StudyConfig) -> int:
    """Execute a study and write its report files; returns an exit code."""
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        if cfg.kind in ("spectrum", "locking-indicator"):
            verdicts = run_spectrum_study(cfg, outdir)
        elif cfg.kind == "eigen-convergence":
            verdicts = run_eigen_convergence_study(cfg, outdir)
        else:
            verdicts = run_cantilever_study(cfg, outdir)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    (outdir / "verdicts.json").write_text(json.dumps(verdicts, indent=2,
                                                     default=float) + "\n")
    _write_manifest(cfg, outdir, {"study": cfg.kind})
    print(f"wrote {outdir}/report.csv, verdicts.json, manifest.json")
    return EXIT_OK


def run_verify_fixtures(rel_tol: float) -> int:
    try:
        ok, report = verify_fixture(rel_tol=rel_tol)
    except FileNotFoundError as exc:
        print(f"fixture file missing: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"fixture file unreadable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for line in report:
        print(line)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_FIXTURE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sub, defaults):
    sub.add_argument("--config", help="INI config file; flags override it")
    sub.add_argument("--formulations", "--formulation", dest="formulations",
                     help="comma list or 'all'")
    sub.add_argument("--p", help="comma list of polynomial degrees")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--slenderness", type=float, help="R/t ratio")
    sub.set_defaults(**defaults)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igabeam",
        description="Spectral locking analysis of isogeometric curved "
                    "Euler-Bernoulli beams")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("spectrum", help="full-spectrum error study")
    _add_common(sp, dict(kind="spectrum"))
    sp.add_argument("--elems", help="coarse mesh (elements)")
    sp.add_argument("--overkill", help="overkill mesh (elements)")

    li = subs.add_parser("locking-indicator",
                         help="coarse-vs-overkill locking verdicts")
    _add_common(li, dict(kind="locking-indicator"))
    li.add_argument("--elems", help="coarse mesh (elements)")
    li.add_argument("--overkill", help="overkill mesh (elements)")
    li.add_argument("--locking-threshold", type=float)
    li.add_argument("--free-threshold", type=float)

    ec = subs.add_parser("eigen-convergence",
                         help="h-refinement study of one eigenpair")
    _add_common(ec, dict(kind="eigen-convergence"))
    ec.add_argument("--meshes", help="comma list of element counts")
    ec.add_argument("--target-mode", type=int, help="analytical mode number")

    ca = subs.add_parser("cantilever", help="tip-loaded quarter-circle BVP")
    _add_common(ca, dict(kind="cantilever"))
    ca.add_argument("--meshes", help="comma list of element counts")
    ca.add_argument("--ref-p", type=int, help="reference degree")
    ca.add_argument("--ref-elems", type=int, help="reference mesh")
    ca.add_argument("--check-reference", action="store_true",
                    help="run the reference-independence check")

    vf = subs.add_parser("verify-fixtures",
                         help="recompute the analytical table and compare")
    vf.add_argument("--rel-tol", type=float, default=1e-12)
    return parser


_CONFIG_KEYS = {
    "formulations": ("study", "formulations", str),
    "p": ("study", "p", str),
    "elems": ("study", "elems", str),
    "meshes": ("study", "meshes", str),
    "overkill": ("study", "overkill", str),
    "target_mode": ("study", "target_mode", int),
    "ref_p": ("study", "ref_p", int),
    "ref_elems": ("study", "ref_elems", int),
    "slenderness": ("ring", "slenderness", float),
    "locking_threshold": ("thresholds", "locking", float),
    "free_threshold": ("thresholds", "locking_free", float),
    "out": ("output", "directory", str),
}


def _config_from_args(args) -> StudyConfig:
    file_vals = {}
    if getattr(args, "config", None):
        ini = configparser.ConfigParser()
        read = ini.read(args.config)
        if not read:
            raise ConfigError(f"config file {args.config!r} not found")
        for attr, (section, key, cast) in _CONFIG_KEYS.items():
            if ini.has_option(section, key):
                file_vals[attr] = cast(ini.get(section, key))

    def pick(attr, default):
        v = getattr(args, attr, None)
        if v is not None:
            return v
        return file_vals.get(attr, default)

    kind = args.kind
    meshes_attr = "elems" if kind in ("spectrum", "locking-indicator") else "meshes"
    meshes_raw = pick(meshes_attr, "64" if meshes_attr == "elems" else "32,64,128")
    try:
        cfg = StudyConfig(
            kind=kind,
            formulations=_formulation_list(pick("formulations", "all")),
            degrees=_parse_list(pick("p", "2"), int),
            meshes=_parse_list(meshes_raw, int),
            overkill=int(pick("overkill", 2048)),
            slenderness=float(pick("slenderness", 2000.0 / 3.0)),
            target_mode=int(pick("target_mode", 5)),
            ref_p=int(pick("ref_p", 5)),
            ref_elems=int(pick("ref_elems", 1024)),
            check_reference=bool(getattr(args, "check_reference", False)),
            locking_threshold=float(pick("locking_threshold", 1.0)),
            free_threshold=float(pick("free_threshold", 0.5)),
            outdir=str(pick("out", f"{kind}-out")),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "verify-fixtures":
        return run_verify_fixtures(args.rel_tol)
    try:
        cfg = _config_from_args(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_study(cfg)


if __name__ == "__main__":
    sys.exit(main())
