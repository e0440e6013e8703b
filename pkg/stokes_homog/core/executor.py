"""
Study Executor - runs eps sweeps of the oscillating and homogenized problems
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .cell import Corrector, EffectiveTensor, effective_tensor, solve_cell
from .mesh import CellGrid, DomainMesh, domain_mesh_for
from .neumann import OscillatingCoefficient, solve_homogenized, solve_oscillating
from .norms import integrate, l2_norm
from .rates import MIN_POINTS, boundary_layer_profile, fit_slope
from .twoscale import assemble_residuals, extend
from ..models.coefficient import CoefficientField, builtin_family
from ..models.fields import FlowField, ProblemData
from ..models.report import ERROR_COLUMNS, RateReport, RateRow, SlopeEntry
from ..models.study import StudyConfig
from ..tools.manufactured import (
    bump_problem, default_problem, flux_test_field, manufactured_problem,
)

logger = logging.getLogger(__name__)

INVERSION_TOL = 0.05


class StudyExecutor:
    """
    Main study engine
    Solves the cell problems once, then runs one pipeline per eps
    """

    def __init__(self, cfg: StudyConfig):
        self.cfg = cfg
        self.A: CoefficientField = builtin_family(cfg.family, cfg.params)
        self.grid = CellGrid(n=cfg.cell_n)
        self._corrector: Optional[Corrector] = None
        self._ahat: Optional[EffectiveTensor] = None
        self.flows: Dict[float, Tuple[FlowField, FlowField]] = {}
        self.timings: Dict[str, float] = {}

    # ---------------------------------------------------------------------- #
    # Cell stage
    # ---------------------------------------------------------------------- #
    @property
    def corrector(self) -> Corrector:
        if self._corrector is None:
            start_time = time.time()
            self._corrector = solve_cell(self.A, self.grid, self.cfg.tolerances.solver)
            self._ahat = effective_tensor(self.A, self._corrector, self.grid)
            self.timings["cell"] = time.time() - start_time
        return self._corrector

    @property
    def ahat(self) -> EffectiveTensor:
        if self._ahat is None:
            _ = self.corrector
        return self._ahat

    # ---------------------------------------------------------------------- #
    # Data
    # ---------------------------------------------------------------------- #
    def problem_data(self, mesh: DomainMesh) -> ProblemData:
        spec = self.cfg.data_spec
        if spec.kind == "manufactured":
            # u_0 = u* for the homogenized operator
            constant = builtin_family("constant", self.ahat.a_hat.ravel().tolist(), mesh.dim)
            return manufactured_problem(constant, 1.0, mesh, spec.u, spec.p)
        if spec.kind == "bump":
            return bump_problem(mesh, spec.center, spec.width)
        return default_problem(mesh)

    def mesh_for(self, eps: float) -> DomainMesh:
        return domain_mesh_for(eps, self.cfg.mesh_rule.m_for(eps))

    def solve_pair(self, eps: float) -> Tuple[FlowField, FlowField]:
        """Oscillating and homogenized solutions with identical data"""
        if eps in self.flows:
            return self.flows[eps]
        tol = self.cfg.tolerances
        mesh = self.mesh_for(eps)
        data = self.problem_data(mesh)
        ue = solve_oscillating(self.A, eps, data, mesh, tol.solver, tol.compat)
        u0 = solve_homogenized(self.ahat, data, mesh, tol.solver, tol.compat)
        self.flows[eps] = (ue, u0)
        return ue, u0

    # ---------------------------------------------------------------------- #
    # Per-eps pipeline
    # ---------------------------------------------------------------------- #
    def _run_eps(self, eps: float) -> RateRow:
        start_time = time.time()
        ue, u0 = self.solve_pair(eps)
        mesh = ue.mesh
        solved = time.time()

        ext = extend(u0.u, mesh, eps)
        res = assemble_residuals(ue, u0, self.corrector, eps, mesh, ext)
        layer = boundary_layer_profile(ue, u0, eps, mesh)

        row = RateRow(
            eps=eps,
            m=mesh.m,
            l2_u_err=l2_norm(ue.u - u0.u),
            h1_v_err=res.h1_v,
            l2_p_err=res.l2_p,
            div_v=res.div_v_l2,
            u0_h2=float(u0.h2_norm),
            residual_eps=ue.residual,
            residual_0=u0.residual,
            div_identity_raw=res.div_identity_raw,
            div_identity_weak=res.div_identity_weak,
            corrector_gradient_l2=res.corrector_gradient_l2,
            grad_v_l2=res.grad_v_l2,
            c_ext=ext.c_ext,
            div_identity_tol=self.cfg.tolerances.div_identity,
            boundary_layer=layer.to_dict(),
            timings={"solve": solved - start_time, "residuals": time.time() - solved},
        )
        logger.info("eps=%g m=%d: l2_u %.3e h1_v %.3e l2_p %.3e",
                    eps, mesh.m, row.l2_u_err, row.h1_v_err, row.l2_p_err)
        return row

    def _map_eps(self, fn: Callable[[float], Any]) -> List[Any]:
        """Apply fn to every eps; results in eps_list order"""
        if self.cfg.workers <= 1:
            return [fn(eps) for eps in self.cfg.eps_list]
        with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
            return list(pool.map(fn, self.cfg.eps_list))

    # ---------------------------------------------------------------------- #
    # Study operations
    # ---------------------------------------------------------------------- #
    def run_study(self) -> RateReport:
        """Rows for every eps, slopes for every error column, metadata"""
        start_time = time.time()
        _ = self.corrector
        report = RateReport()
        report.rows = self._map_eps(self._run_eps)

        for column in ERROR_COLUMNS:
            report.slopes[column] = self._fit_column(report, column)
        self._flag_inversions(report)

        report.metadata = {
            "config_hash": self.cfg.config_hash(),
            "coefficient": self.A.to_dict(),
            "a_hat": self.ahat.a_hat.tolist(),
            "cell_n": self.grid.n,
            "cell_residual": self.corrector.residual,
            "insufficient_data": any(s.flag == "insufficient-data" for s in report.slopes.values()),
            "timings": {**self.timings, "total": time.time() - start_time,
                        "per_eps": {str(r.eps): r.timings for r in report.rows}},
        }
        return report

    def _noise_floor(self, residual: float, u0_h2: float) -> float:
        return max(10.0 * residual, self.cfg.tolerances.noise_floor) * max(1.0, u0_h2)

    def _fit_column(self, report: RateReport, column: str) -> SlopeEntry:
        gates = self.cfg.gates
        gate = getattr(gates, column)
        entry = SlopeEntry(column=column, gate=gate)

        if len(report.rows) < MIN_POINTS:
            entry.flag = "insufficient-data"
            report.warnings.append(
                f"{column}: slope fit needs at least {MIN_POINTS} points, got {len(report.rows)}")
            return entry
        if any(getattr(r, column) < self._noise_floor(r.residual, r.u0_h2) for r in report.rows):
            entry.flag = "noise-floor"
            msg = f"{column}: errors at the solver noise floor; slope not fitted"
            logger.warning(msg)
            report.warnings.append(msg)
            return entry
        fit = fit_slope([(r.eps, getattr(r, column)) for r in report.rows])

        entry.slope, entry.intercept, entry.r2 = fit.slope, fit.intercept, fit.r2
        entry.passed = fit.slope >= gate
        if column == "l2_u_err":
            entry.passed = entry.passed and fit.r2 >= gates.r2
        return entry

    def _flag_inversions(self, report: RateReport):
        for column in ERROR_COLUMNS:
            values = report.column(column)
            for k in range(1, len(values) - 1):
                if values[k + 1] > (1.0 + INVERSION_TOL) * values[k]:
                    msg = (f"{column}: inversion at eps={report.rows[k + 1].eps:g} "
                           f"({values[k + 1]:.3e} > {values[k]:.3e})")
                    logger.warning(msg)
                    report.warnings.append(msg)

    def flux_convergence(self, psi: Optional[Callable[[np.ndarray], np.ndarray]] = None
                         ) -> Dict[str, Any]:
        """e(eps) = |int (A^eps grad u_eps - A_hat grad u_0) : Psi| for each eps"""
        psi = psi or flux_test_field(self.cfg.flux_field)
        _ = self.corrector

        def pairing(eps: float) -> Dict[str, float]:
            ue, u0 = self.solve_pair(eps)
            mesh = ue.mesh
            X = mesh.quadrature_points
            A_eps = OscillatingCoefficient(self.A, eps)(X)
            flux_e = np.einsum('eqijab,eqbj->eqai', A_eps, ue.u.at_quadrature(1))
            flux_0 = np.einsum('ijab,eqbj->eqai', self.ahat.a_hat, u0.u.at_quadrature(1))
            value = integrate(mesh, np.einsum('eqai,eqai->eq', flux_e - flux_0, psi(X)))
            floor = self._noise_floor(max(ue.residual, u0.residual), float(u0.h2_norm))
            return {"eps": eps, "error": float(abs(value)), "floor": floor}

        rows = self._map_eps(pairing)
        # a step counts as decreasing when the error shrinks or already sits at the floor
        decreasing = all(b["error"] <= a["error"] or b["error"] <= b["floor"]
                         for a, b in zip(rows, rows[1:]))
        errors = [r["error"] for r in rows]
        if not decreasing:
            logger.warning("flux pairing errors are not decreasing: %s", errors)
        return {"rows": rows, "decreasing": decreasing}
