"""Newton solve for the flat-singularity parameter lambda*.

For n >= 2 the intermediate derivatives f_n = (d^i_x eta~_x(x*, T*)),
i = 1..2n-2, vanish exactly on a codimension-(2n-2) set of initial data;
this module evaluates f_n through the full solver pipeline and drives it
to zero over the basis coefficients lambda.  The default Jacobian is the
scaled identity (1+alpha) T* / 2 * Id, which is within a small factor of
the true one on the admissible box, with a finite-difference verification
pass on the final iterate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import Field, Grid, Params
from .errors import LeftParameterBox, ManifoldNewtonStalled
from .initial_data import InitialData, PerturbationBasis, assemble, build_basis, build_wbar
from .singularity import BlowupReport, DG, build_report, extend
from .solver import initialize, run_to_near_blowup, sensitivity_run


@dataclass(frozen=True)
class PipelineConfig:
    """Run/locate knobs shared by every f_n evaluation."""

    delta_stop: float = 5e-3
    cfl: float = 0.4
    kz_cfl: float = 0.8
    newton_tol: float = 1e-10
    rel_tol: float = 3e-8

    def run_kwargs(self):
        return dict(delta_stop=self.delta_stop, cfl=self.cfl, kz_cfl=self.kz_cfl)


def evaluate_pipeline(data: InitialData, config: PipelineConfig = PipelineConfig(),
                      flatness_required: bool = False):
    """data -> (stop state, extended flow, blowup report)."""
    state = initialize(data)
    stop, _ = run_to_near_blowup(state, **config.run_kwargs())
    flow = extend(stop)
    report = build_report(flow, newton_tol=config.newton_tol,
                          rel_tol=config.rel_tol,
                          flatness_required=flatness_required)
    return stop, flow, report


def f_n(data: InitialData, config: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """The derivative vector d^i_x eta~_x(x*, T*), i = 1..2n-2."""
    if data.params.n < 2:
        raise ValueError("f_n is defined for n >= 2")
    _, _, report = evaluate_pipeline(data, config)
    return np.array(report.f_n)


@dataclass(frozen=True)
class ManifoldPoint:
    lambda_star: tuple[float, ...]
    residual: float
    residual_history: tuple[float, ...]
    jacobian: tuple[tuple[float, ...], ...]  # FD verification at lambda*
    scaled_jacobian_defect: float            # ||2/((1+a)T) J - Id||_inf
    data: InitialData
    report: BlowupReport

    def to_json(self) -> str:
        doc = {
            "lambda_star": list(self.lambda_star),
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "jacobian": [list(r) for r in self.jacobian],
            "scaled_jacobian_defect": self.scaled_jacobian_defect,
            "report": json.loads(self.report.to_json()),
        }
        return json.dumps(doc, sort_keys=True)


def _lambda_box_ok(lam, basis: PerturbationBasis, eps: float) -> bool:
    return basis.Ln * float(np.sum(np.abs(lam))) < eps / 2.0


def _sensitivity_jacobian(data: InitialData, report: BlowupReport,
                          config: PipelineConfig) -> np.ndarray:
    """Exact Jacobian via the variational solver, one run per direction."""
    p = data.params
    n = p.n
    m = 2 * n - 2
    J = np.empty((m, m))
    from .core import FourierEval
    for j in range(m):
        direction = data.basis.fields[j]
        base, sens, _ = sensitivity_run(data, direction,
                                        delta_stop=config.delta_stop,
                                        cfl=config.cfl, kz_cfl=config.kz_cfl)
        flow = extend(base)
        # variational extension: d_lambda eta_x and d_lambda eta_xt at stop
        V = sens.block
        Y = base.block
        a = p.alpha
        g2 = 0.5 * a / p.gamma
        exl = V[4]
        Al = V[5]
        Zl = V[0]
        Kl = V[1]
        Sl = V[2]
        ext_l = (0.5 * (1 + a) * Al
                 + exl * (0.5 * (1 - a) * Y[0] + g2 * Y[2] * Y[1])
                 + g2 * Y[4] * (Sl * Y[1] + Y[2] * Kl)
                 + 0.5 * (1 - a) * Y[4] * Zl)
        ex_l_hat = FourierEval(exl)
        ext_l_hat = FourierEval(ext_l)
        x0, T0 = report.x_star, report.T_star
        dt_off = T0 - base.t

        def var_eta(x, order):
            return ex_l_hat.deriv(x, order) + dt_off * ext_l_hat.deriv(x, order)

        f2n = math.factorial(2 * n)
        dG = np.array([var_eta(x0, 2 * n - 1) / f2n,
                       -2.0 / (1.0 + a) * var_eta(x0, 0)])
        shift = np.linalg.solve(DG(x0, T0, flow), -dG)
        dxs, dTs = shift
        for i in range(1, m + 1):
            J[i - 1, j] = (var_eta(x0, i)
                           + flow.eta_x_tilde(x0, T0, i + 1) * dxs
                           + flow.eta_xt_tilde(x0, T0, i) * dTs)
    return J


def _fd_jacobian(wtilde0, z0, k0, lam, params, grid, wbar, basis,
                 config: PipelineConfig, h: float,
                 wtilde_radius: float) -> np.ndarray:
    m = len(lam)
    J = np.empty((m, m))
    for j in range(m):
        shift = np.zeros(m)
        shift[j] = h
        # difference probes may step past the open lambda box edge; they are
        # evaluation points of f_n, not members of the data class
        dplus = assemble(wtilde0, z0, k0, tuple(lam + shift), params, grid,
                         wbar=wbar, basis=basis, wtilde_radius=wtilde_radius,
                         enforce_lambda_box=False)
        dminus = assemble(wtilde0, z0, k0, tuple(lam - shift), params, grid,
                          wbar=wbar, basis=basis, wtilde_radius=wtilde_radius,
                          enforce_lambda_box=False)
        J[:, j] = (f_n(dplus, config) - f_n(dminus, config)) / (2.0 * h)
    return J


def solve_lambda(wtilde0: Field, z0: Field, k0: Field, params: Params,
                 grid: Grid, jacobian_mode: str = "scaled_identity",
                 manifold_tol: float = 1e-8, max_iter: int = 30,
                 config: PipelineConfig = PipelineConfig(),
                 wtilde_radius: float | None = None,
                 lambda0=None) -> ManifoldPoint:
    """Drive f_n(lambda) to zero inside the admissible box Lambda_n.

    The contraction guarantee holds for perturbation data in the shrunken
    epsilon^2 box; wtilde_radius defaults to epsilon^2 accordingly, and a
    run that converges from data outside that ball is still returned (the
    box membership of lambda itself is always enforced).
    """
    n = params.n
    if n == 1:
        data = assemble(wtilde0, z0, k0, (), params, grid,
                        wtilde_radius=wtilde_radius)
        _, _, report = evaluate_pipeline(data, config, flatness_required=True)
        return ManifoldPoint(lambda_star=(), residual=0.0,
                             residual_history=(), jacobian=(),
                             scaled_jacobian_defect=0.0, data=data,
                             report=report)
    radius = params.epsilon**2 if wtilde_radius is None else wtilde_radius
    wbar = build_wbar(n, params.C0, grid)
    basis = build_basis(n, params.C0, grid)
    m = 2 * n - 2
    lam = np.zeros(m) if lambda0 is None else np.array(lambda0, dtype=float)
    history = []
    report = None
    data = None
    for it in range(max_iter):
        if not _lambda_box_ok(lam, basis, params.epsilon):
            raise LeftParameterBox(
                f"lambda left Lambda_n at iteration {it}: {lam}")
        data = assemble(wtilde0, z0, k0, tuple(lam), params, grid,
                        wbar=wbar, basis=basis, wtilde_radius=radius)
        _, _, report = evaluate_pipeline(data, config)
        f = np.array(report.f_n)
        res = float(np.max(np.abs(f)))
        history.append(res)
        if res <= manifold_tol:
            break
        scale = 0.5 * (1.0 + params.alpha) * report.T_star
        if jacobian_mode == "scaled_identity":
            lam = lam - f / scale
        elif jacobian_mode == "finite_difference":
            h = max(1e-7, 1e-3 * params.epsilon)
            J = _fd_jacobian(wtilde0, z0, k0, lam, params, grid, wbar, basis,
                             config, h, radius)
            lam = lam - np.linalg.solve(J, f)
        elif jacobian_mode == "sensitivity":
            J = _sensitivity_jacobian(data, report, config)
            lam = lam - np.linalg.solve(J, f)
        else:
            raise ValueError(f"unknown jacobian_mode {jacobian_mode!r}")
    else:
        raise ManifoldNewtonStalled(
            f"|f_n| = {history[-1]:.3g} after {max_iter} iterations")

    # finite-difference verification pass at the final iterate
    h = max(1e-7, 1e-3 * params.epsilon)
    J = _fd_jacobian(wtilde0, z0, k0, lam, params, grid, wbar, basis,
                     config, h, radius)
    scale = 0.5 * (1.0 + params.alpha) * report.T_star
    defect = float(np.max(np.abs(J / scale - np.eye(m))))
    return ManifoldPoint(lambda_star=tuple(float(v) for v in lam),
                         residual=history[-1],
                         residual_history=tuple(history),
                         jacobian=tuple(tuple(float(v) for v in row) for row in J),
                         scaled_jacobian_defect=defect,
                         data=data, report=report)
