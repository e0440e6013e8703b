#!/usr/bin/env python3
"""
Command-line entry point for the homogenization toolkit

    python -m cli.homog_cli rates --config study_configs/trig_study.json --out results
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

sys.path.insert(0, str(Path(__file__).parent.parent))

from stokes_homog.core import cell
from stokes_homog.core.errors import ConfigError, HomogError, InsufficientDataError
from stokes_homog.core.executor import StudyExecutor
from stokes_homog.core.mesh import domain_mesh_for
from stokes_homog.core.neumann import (
    duality_pairing, energy_norm, solve_adjoint, solve_homogenized, solve_oscillating,
)
from stokes_homog.core.norms import l2_norm
from stokes_homog.core.rates import boundary_layer_profile, mms_study
from stokes_homog.core.verifier import CheckExecutor
from stokes_homog.models.coefficient import check_ellipticity
from stokes_homog.models.study import StudyConfig, load_config
from stokes_homog.templates.report_templates import (
    CELL_SUMMARY, CHECK_FAILURE, CHECK_ROW, CHECK_SUMMARY, CHECK_TABLE_COLUMNS,
    CHECK_TABLE_HEADER, DUAL_SUMMARY, RATE_FOOTER, RATE_TABLE_COLUMNS, RATE_TABLE_HEADER,
    RATE_TABLE_ROW, SLOPE_ROW,
)
from stokes_homog.tools.export import dump_field, dump_flow, write_error, write_json, write_rate_report
from stokes_homog.tools.manufactured import bump_field
from stokes_homog.tools.oracles import LaminateOracle

logger = logging.getLogger("homog_cli")

SUBCOMMANDS = ("cell", "effective", "dual", "solve", "mms", "rates", "verify")

# diagnostics gated by each cell-stage subcommand
CELL_GATES = {
    "cell": ("div_chi", "mean_chi", "mean_pi"),
    "effective": ("div_chi", "mean_chi", "mean_pi", "mean_b", "ellipticity_floor",
                  "adjoint_symmetry"),
    "dual": None,
}


def print_header(title: str):
    print("\n" + "=" * 80)
    print(f"  {title}")
    print("=" * 80)


# ---------------------------------------------------------------------- #
# Cell stage
# ---------------------------------------------------------------------- #
def _cell_stage(cfg: StudyConfig) -> Dict[str, Any]:
    ex = StudyExecutor(cfg)
    tol = cfg.tolerances
    c, ahat = ex.corrector, ex.ahat
    bf = cell.b_field(ex.A, c, ahat, ex.grid)
    dc = cell.dual_correctors(bf, c, ex.grid, tol.solver)
    diag = cell.verify_cell_identities(ex.A, c, ahat, bf, dc, ex.grid, samples=1000,
                                       seed=cfg.seed, tol=tol.solver)
    return {"executor": ex, "corrector": c, "ahat": ahat, "dual": dc, "diagnostics": diag}


def _dump_correctors(c: cell.Corrector, out_dir: Path):
    d = c.grid.dim
    for j in range(d):
        for b in range(d):
            dump_field(c.chi_field(j, b), out_dir / "fields", f"chi_{j + 1}{b + 1}")
            dump_field(c.pi_field(j, b), out_dir / "fields", f"pi_{j + 1}{b + 1}")


def cmd_cell_stage(name: str, cfg: StudyConfig, out_dir: Path) -> int:
    stage = _cell_stage(cfg)
    ex, c, ahat, diag = stage["executor"], stage["corrector"], stage["ahat"], stage["diagnostics"]

    failures = diag.failures(cfg.tolerances)
    gated = CELL_GATES[name]
    if gated is not None:
        failures = [f for f in failures if f in gated]

    payload: Dict[str, Any] = {
        "family": ex.A.to_dict(),
        "cell_n": ex.grid.n,
        "config_hash": cfg.config_hash(),
        "corrector": {"residual": c.residual, **c.norms()},
        "diagnostics": diag.to_dict(),
        "failures": failures,
    }
    if name in ("effective", "dual"):
        payload["effective_tensor"] = ahat.to_dict()
        payload["ellipticity"] = check_ellipticity(ex.A, seed=cfg.seed,
                                                   tol=cfg.tolerances.ellipticity).to_dict()
        if ex.A.name.startswith("laminate"):
            oracle = LaminateOracle.from_coefficient(ex.A)
            gap = float(np.abs(ahat.a_hat - oracle.a_hat).max())
            payload["oracle"] = {**oracle.to_dict(), "a_hat_gap": gap}
            if gap > cfg.tolerances.oracle:
                failures.append("laminate_oracle")
    if name == "dual":
        dc = stage["dual"]
        payload["dual"] = {"residual": dc.residual, "q_l2": diag.q_l2, "phi_l2": diag.phi_l2}

    write_json(out_dir / f"{name}.json", payload)
    if cfg.dump_fields:
        _dump_correctors(c, out_dir)

    norms = c.norms()
    print(CELL_SUMMARY.format(
        family=ex.A.name, params=list(ex.A.params), n=ex.grid.n, residual=c.residual,
        chi_l2=norms["chi_l2"], pi_l2=norms["pi_l2"],
        a_hat=np.array2string(ahat.a_hat, precision=8),
        eigenvalues=np.array2string(ahat.symmetric_eigenvalues(), precision=6),
    ))
    if name == "dual":
        print(DUAL_SUMMARY.format(failures=failures or "none", **diag.to_dict()))
    elif failures:
        print(f"failures: {failures}")
    return 0 if not failures else 1


# ---------------------------------------------------------------------- #
# Solves
# ---------------------------------------------------------------------- #
def cmd_solve(cfg: StudyConfig, out_dir: Path) -> int:
    ex = StudyExecutor(cfg)
    tol = cfg.tolerances
    eps = cfg.solve.eps
    m = cfg.solve.m or cfg.mesh_rule.m_for(eps)
    mesh = domain_mesh_for(eps, m)
    data = ex.problem_data(mesh)

    ue = solve_oscillating(ex.A, eps, data, mesh, tol.solver, tol.compat)
    u0 = solve_homogenized(ex.ahat, data, mesh, tol.solver, tol.compat)
    payload: Dict[str, Any] = {
        "eps": eps,
        "m": m,
        "config_hash": cfg.config_hash(),
        "oscillating": {**ue.to_dict(), "energy_norm": energy_norm(ue)},
        "homogenized": {**u0.to_dict(), "energy_norm": energy_norm(u0)},
        "l2_u_err": l2_norm(ue.u - u0.u),
        "boundary_layer": boundary_layer_profile(ue, u0, eps, mesh).to_dict(),
    }
    if cfg.solve.adjoint:
        H = bump_field(cfg.data_spec.center, cfg.data_spec.width)
        adj = solve_adjoint(ex.A, eps, H, mesh, tol.solver)
        pairing = duality_pairing(adj, ue.u, ex.A, eps, H, mesh)
        payload["adjoint"] = {
            **adj.to_dict(),
            "pairing": pairing.to_dict(),
            "boundary_layer": boundary_layer_profile(adj, None, eps, mesh).to_dict(),
        }
        if cfg.dump_fields:
            dump_flow(adj, out_dir / "fields", "adjoint")

    write_json(out_dir / "solve.json", payload)
    if cfg.dump_fields:
        dump_flow(ue, out_dir / "fields", "u_eps")
        dump_flow(u0, out_dir / "fields", "u_0")

    print_header(f"SOLVE: {ex.A.name} eps={eps:g} m={m}")
    print(f"  residuals: oscillating {ue.residual:.2e}, homogenized {u0.residual:.2e}")
    print(f"  ||u_eps - u_0||_L2 = {payload['l2_u_err']:.4e}")
    if "adjoint" in payload:
        print(f"  duality pairing gap: {payload['adjoint']['pairing']['relative_gap']:.3e}")
    return 0


def cmd_mms(cfg: StudyConfig, out_dir: Path) -> int:
    ex = StudyExecutor(cfg)
    report = mms_study(ex.A, cfg.mms.m_list, cfg.mms.u, cfg.mms.p, tol=cfg.tolerances.solver)
    write_json(out_dir / "mms.json", {"config_hash": cfg.config_hash(), **report.to_dict()})

    print_header(f"MMS: {ex.A.name}")
    for row in report.rows:
        print(f"  m={row.m:<4d} l2_u {row.l2_u:.3e}  h1_u {row.h1_u:.3e}  l2_p {row.l2_p:.3e}")
    for col, fit in report.orders.items():
        print(f"  order {col}: {fit.slope:.3f}")
    return 0


# ---------------------------------------------------------------------- #
# Rate study
# ---------------------------------------------------------------------- #
def _fmt(value: Optional[float], spec: str = ".3f") -> str:
    return "-" if value is None else format(value, spec)


def _verdict(ok: Optional[bool]) -> str:
    return "-" if ok is None else ("PASS" if ok else "FAIL")


def cmd_rates(cfg: StudyConfig, out_dir: Path) -> int:
    ex = StudyExecutor(cfg)
    report = ex.run_study()
    if cfg.flux_field is not None:
        flux = ex.flux_convergence()
        report.flux, report.flux_decreasing = flux["rows"], flux["decreasing"]
    write_rate_report(report, out_dir)
    if cfg.dump_fields:
        for eps, (ue, u0) in sorted(ex.flows.items(), reverse=True):
            dump_flow(ue, out_dir / "fields", f"u_eps_{eps:g}")
            dump_flow(u0, out_dir / "fields", f"u_0_{eps:g}")

    meta = report.metadata
    print(RATE_TABLE_HEADER.format(family=ex.A.name, params=list(ex.A.params),
                                   config_hash=meta["config_hash"], cell_n=meta["cell_n"],
                                   cell_residual=meta["cell_residual"]))
    print(RATE_TABLE_COLUMNS)
    for row in report.rows:
        print(RATE_TABLE_ROW.format(**row.to_dict()))
    print()
    for column, s in report.slopes.items():
        verdict = s.flag or ("PASS" if s.passed else "FAIL")
        print(SLOPE_ROW.format(column=column, slope=_fmt(s.slope), r2=_fmt(s.r2),
                               gate=_fmt(s.gate, ".2f"), verdict=verdict))
    print(RATE_FOOTER.format(gates="PASS" if report.gates_passed else "FAIL",
                             div_identity="PASS" if report.div_identity_passed else "FAIL",
                             flux=_verdict(report.flux_decreasing),
                             n_warnings=len(report.warnings)))
    for w in report.warnings:
        print(f"  warning: {w}")

    if meta.get("insufficient_data"):
        raise InsufficientDataError(
            f"{len(report.rows)} eps values; slopes need at least 3", key="eps_list"
        )
    return 0 if report.passed else 1


# ---------------------------------------------------------------------- #
# Verification suite
# ---------------------------------------------------------------------- #
def cmd_verify(out_dir: Path, config_dir: Optional[str] = None,
               modules: Sequence[str] = (), check_ids: Sequence[str] = ()) -> int:
    executor = CheckExecutor(config_dir)
    results = executor.execute_all(modules, check_ids)
    write_json(out_dir / "verify.json", {"results": [r.to_dict() for r in results]})

    print(CHECK_TABLE_HEADER)
    print(CHECK_TABLE_COLUMNS)
    for r in results:
        print(CHECK_ROW.format(**r.to_dict()))
        for failure in r.failures:
            print(CHECK_FAILURE.format(failure=failure))
    failed = sum(1 for r in results if not r.passed)
    skipped = sum(1 for r in results if r.skipped)
    print(CHECK_SUMMARY.format(passed=len(results) - failed - skipped, failed=failed,
                               skipped=skipped))
    return 0 if failed == 0 else 1


# ---------------------------------------------------------------------- #
# Entry point
# ---------------------------------------------------------------------- #
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homog", description="Periodic Neumann Stokes homogenization")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=Path, default=None, help="JSON or YAML StudyConfig")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="dotted-path override, repeatable")
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--dump-fields", action="store_true")
    parser.add_argument("--log-level", default=None)
    parser.add_argument("--checks-dir", default=None, help="verify: check configuration directory")
    parser.add_argument("--module", action="append", default=[], help="verify: restrict to a module")
    parser.add_argument("--check", action="append", default=[], help="verify: restrict to a check id")
    return parser


def _workers(args: argparse.Namespace) -> Optional[int]:
    if args.workers is not None:
        return args.workers
    env = os.getenv("HOMOG_WORKERS")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"HOMOG_WORKERS must be an integer, got '{env}'", key="workers")


def _fail(error: HomogError, out_dir: Path) -> int:
    try:
        write_error(error, out_dir)
    except OSError as e:
        logger.error("could not write error.json: %s", e)
    print(json.dumps(error.to_dict()))
    return error.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv(override=False)
    parser = build_parser()
    args = parser.parse_args(argv)

    level = (args.log_level or os.getenv("HOMOG_LOG_LEVEL", "WARNING")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    out_dir = Path(args.out or os.getenv("HOMOG_OUT_DIR", "homog_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.subcommand == "verify":
            return cmd_verify(out_dir, args.checks_dir, args.module, args.check)

        overrides = list(args.overrides)
        if args.dump_fields:
            overrides.append("dump_fields=true")
        cfg = load_config(args.config, overrides, _workers(args))
        logger.info("config %s (hash %s)", args.config or "<defaults>", cfg.config_hash())

        if args.subcommand in CELL_GATES:
            return cmd_cell_stage(args.subcommand, cfg, out_dir)
        if args.subcommand == "solve":
            return cmd_solve(cfg, out_dir)
        if args.subcommand == "mms":
            return cmd_mms(cfg, out_dir)
        return cmd_rates(cfg, out_dir)
    except HomogError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        return _fail(e, out_dir)


if __name__ == "__main__":
    sys.exit(main())
