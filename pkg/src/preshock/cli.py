"""Experiment driver: subcommands wiring the pipeline to files on disk.

Every run writes into <outdir>/<run-id>/ where the run id is a hash of the
resolved configuration, so identical configs map to identical paths and
byte-identical JSON/CSV payloads (no wall-clock anywhere in the outputs).

Config files are flat ``key = value`` documents (strings, numbers,
booleans; ``#`` comments); command-line flags override file values, which
override the defaults below.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import burgers as bg
from . import cusp as cusp_mod
from . import initial_data as idata
from . import manifold as mf
from . import singularity as sing
from . import solver
from .core import Grid, Params
from .errors import BadArtifact, PreshockError


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 2.0
    n: int = 1
    epsilon: float = 1e-3
    C0: float = 16.0
    grid: int = 4096
    delta_stop: float = 5e-3
    cfl: float = 0.4
    kz_cfl: float = 0.8
    newton_tol: float = 1e-10
    manifold_tol: float = 1e-8
    rel_tol: float = 3e-8
    seed: int = 1
    jacobian_mode: str = "scaled_identity"
    data: str = "random"          # "random" | "reduction" | path to JSON
    burgers_profile: str = "prototype"  # "prototype" | "monotone"
    out: str = ""
    workers: int = 2
    sweep_epsilons: str = "1e-3,1e-4"
    sweep_ns: str = "1,2"

    def validate(self):
        if self.grid & (self.grid - 1):
            raise ValueError("grid must be a power of two")
        for name in ("delta_stop", "cfl", "kz_cfl", "newton_tol",
                     "manifold_tol", "rel_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        return self

    def params(self) -> Params:
        return Params(gamma=self.gamma, n=self.n, epsilon=self.epsilon,
                      C0=self.C0)

    def pipeline(self) -> mf.PipelineConfig:
        return mf.PipelineConfig(delta_stop=self.delta_stop, cfl=self.cfl,
                                 kz_cfl=self.kz_cfl,
                                 newton_tol=self.newton_tol,
                                 rel_tol=self.rel_tol)

    def run_id(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return "run-" + hashlib.sha256(payload.encode()).hexdigest()[:12]


def parse_config_file(path) -> dict:
    """Flat key = value document; strings, numbers, booleans."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadArtifact(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if val.startswith(('"', "'")) and val.endswith(val[0]) and len(val) >= 2:
            out[key] = val[1:-1]
        elif val.lower() in ("true", "false"):
            out[key] = val.lower() == "true"
        else:
            try:
                out[key] = int(val)
            except ValueError:
                try:
                    out[key] = float(val)
                except ValueError:
                    out[key] = val
    return out


def resolve_config(args) -> RunConfig:
    values = {}
    if args.config:
        file_values = parse_config_file(args.config)
        unknown = set(file_values) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise BadArtifact(f"unknown config keys: {sorted(unknown)}")
        values.update(file_values)
    for key in ("n", "epsilon", "gamma", "grid", "delta_stop",
                "jacobian_mode", "seed", "out"):
        v = getattr(args, key.replace("-", "_"), None)
        if v is not None:
            values[key] = v
    cfg = replace(RunConfig(), **values)
    if not cfg.out:
        cfg = replace(cfg, out=os.environ.get("PRESHOCK_OUT", "preshock-out"))
    return cfg.validate()


def _rundir(cfg: RunConfig) -> Path:
    d = Path(cfg.out) / cfg.run_id()
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "config.json", "w") as fh:
        json.dump(asdict(cfg), fh, sort_keys=True, indent=1)
        fh.write("\n")
    return d


def _write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_burgers(cfg: RunConfig) -> int:
    out = _rundir(cfg)
    n = cfg.n
    if cfg.burgers_profile == "monotone":
        def w0(x):
            x = np.asarray(x, dtype=float)
            return x + x ** (2 * n + 1) / (2 * n + 1)

        def w0p(x):
            x = np.asarray(x, dtype=float)
            return 1.0 + x ** (2 * n)
        problem = bg.BurgersProblem(w0=w0, w0_prime=w0p, c=1.0)
    else:
        problem = bg.prototype_problem(n, c=1.0)
    tstar = bg.blowup_time(problem)  # raises NoBlowup for the monotone profile
    alpha = cfg.params().alpha
    fast = bg.prototype_problem(n, c=0.5 * (1.0 + alpha)) \
        if cfg.burgers_profile != "monotone" else problem
    tstar_fast = bg.blowup_time(fast)
    cuspfn = bg.exact_cusp(n)
    ys = np.linspace(1e-6, 1e-3, 101)
    ys = np.concatenate([-ys[::-1], ys])
    errs = []
    rows = []
    for y in ys:
        we = bg.evaluate(float(y), tstar, problem)
        wx = float(cuspfn(y))
        errs.append(abs(we - wx))
        rows.append((float(y), we, wx))
    with open(out / "burgers.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y", "w_evaluated", "w_exact_cusp"])
        for row in rows:
            writer.writerow([repr(v) for v in row])
    summary = {"n": n, "T_star": tstar, "T_star_fast": tstar_fast,
               "fast_factor_check": tstar_fast * (1.0 + alpha) / 2.0,
               "max_cusp_error": max(errs)}
    _write_json(out / "summary.json", summary)
    print(f"burgers: T*={tstar} T*_fast={tstar_fast} "
          f"max cusp err={max(errs):.3e} -> {out}")
    return 0


def _build_data(cfg: RunConfig):
    params = cfg.params()
    grid = Grid(cfg.grid)
    if cfg.data == "reduction" or cfg.epsilon == 0.0:
        return idata.reduction_data(params, grid)
    if cfg.data == "random":
        wt, z0, k0 = idata.random_admissible(params, grid, cfg.seed)
        lam = (0.0,) * (2 * params.n - 2)
        return idata.assemble(wt, z0, k0, lam, params, grid)
    with open(cfg.data) as fh:
        return idata.InitialData.from_json(fh.read())


def _pipeline_outputs(out: Path, cfg: RunConfig, data, stop, log, report):
    log.to_csv(out / "trajectory.csv")
    with open(out / "blowup.json", "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
    profile = cusp_mod.eulerian_profile(stop, report)
    profile.to_csv(out / "profile.csv")
    fit = cusp_mod.fit_cusp(profile)
    with open(out / "cusp.json", "w") as fh:
        fh.write(fit.to_json())
        fh.write("\n")
    return profile, fit


def cmd_simulate(cfg: RunConfig) -> int:
    out = _rundir(cfg)
    data = _build_data(cfg)
    state = solver.initialize(data)
    stop, log = solver.run_to_near_blowup(state, delta_stop=cfg.delta_stop,
                                          cfl=cfg.cfl, kz_cfl=cfg.kz_cfl)
    flow = sing.extend(stop)
    report = sing.build_report(flow, newton_tol=cfg.newton_tol,
                               rel_tol=cfg.rel_tol, flatness_required=False)
    _, fit = _pipeline_outputs(out, cfg, data, stop, log, report)
    alpha = cfg.params().alpha
    print(f"simulate: T*={report.T_star:.8f} "
          f"((1+a)T*/2-1 = {(1 + alpha) * report.T_star / 2 - 1:+.2e}) "
          f"x*={report.x_star:+.2e} flatness={report.flatness} "
          f"b1={fit.b1:.5f} exponent={fit.holder_exponent_fit:.4f} -> {out}")
    return 0


def cmd_manifold(cfg: RunConfig) -> int:
    out = _rundir(cfg)
    params = cfg.params()
    grid = Grid(cfg.grid)
    pipeline = cfg.pipeline()
    if params.n == 1:
        data = _build_data(cfg)
        point = mf.solve_lambda(data.wtilde0, data.z0, data.k0, params, grid,
                                jacobian_mode=cfg.jacobian_mode,
                                manifold_tol=cfg.manifold_tol,
                                config=pipeline,
                                wtilde_radius=params.epsilon)
    else:
        wt, z0, k0 = idata.random_admissible(
            params, grid, cfg.seed, box_epsilon=params.epsilon**2, margin=0.05)
        point = mf.solve_lambda(wt, z0, k0, params, grid,
                                jacobian_mode=cfg.jacobian_mode,
                                manifold_tol=cfg.manifold_tol,
                                config=pipeline)
    with open(out / "manifold.json", "w") as fh:
        fh.write(point.to_json())
        fh.write("\n")
    state = solver.initialize(point.data)
    stop, log = solver.run_to_near_blowup(state, **pipeline.run_kwargs())
    _, fit = _pipeline_outputs(out, cfg, point.data, stop, log, point.report)
    print(f"manifold: lambda*={point.lambda_star} |f_n|={point.residual:.2e} "
          f"flatness={point.report.flatness} b1={fit.b1:.5f} -> {out}")
    return 0


def cmd_cusp_fit(cfg: RunConfig, run_path: str) -> int:
    run_dir = Path(run_path)
    prof_path = run_dir / "profile.csv"
    blow_path = run_dir / "blowup.json"
    if not prof_path.exists() or not blow_path.exists():
        raise BadArtifact(f"{run_dir} lacks profile.csv / blowup.json")
    try:
        rows = np.loadtxt(prof_path, delimiter=",", skiprows=1)
        report = sing.BlowupReport.from_json(blow_path.read_text())
    except (ValueError, KeyError) as exc:
        raise BadArtifact(f"corrupt artifacts under {run_dir}") from exc
    y, w, z, k = rows.T
    order = np.argsort(y)
    x = np.linspace(-0.5, 0.5, y.size, endpoint=False)  # placeholder abscissa
    dx = float(np.median(np.diff(np.sort(y))))
    profile = cusp_mod.EulerianProfile(
        x=x, y=y[order], w=w[order], z=z[order], k=k[order],
        dy_z=np.zeros_like(y), dy_k=np.zeros_like(y),
        y_star=_ystar_from_report(report, y, w), x_star=report.x_star,
        T_star=report.T_star, n=report.n, C0=report.C0, dx=dx)
    fit = cusp_mod.fit_cusp(profile, window=_stored_window(report, profile))
    with open(run_dir / "cusp.json", "w") as fh:
        fh.write(fit.to_json())
        fh.write("\n")
    print(f"cusp-fit: b0={fit.b0:.6f} b1={fit.b1:.6f} "
          f"exponent={fit.holder_exponent_fit:.5f} -> {run_dir / 'cusp.json'}")
    return 0


def _ystar_from_report(report, y, w):
    # the profile alone pins y* as the image of the steepest point
    grad = np.gradient(w, y)
    return float(y[int(np.argmax(np.abs(grad)))])


def _stored_window(report, profile):
    # the stored CSV carries no Lagrangian abscissa, so the smear guard is
    # replaced by its rounding-floor component
    d_out = cusp_mod.theorem_window(report.n, report.C0)
    return (2e-12 * (1.0 + abs(profile.y_star)), d_out)


def _sweep_worker(cfg_dict: dict) -> dict:
    cfg = RunConfig(**cfg_dict)
    data = _build_data(cfg)
    state = solver.initialize(data)
    stop, _ = solver.run_to_near_blowup(state, delta_stop=cfg.delta_stop,
                                        cfl=cfg.cfl, kz_cfl=cfg.kz_cfl)
    flow = sing.extend(stop)
    report = sing.build_report(flow, newton_tol=cfg.newton_tol,
                               rel_tol=cfg.rel_tol, flatness_required=False)
    profile = cusp_mod.eulerian_profile(stop, report)
    fit = cusp_mod.fit_cusp(profile)
    alpha = cfg.params().alpha
    return {"n": cfg.n, "epsilon": cfg.epsilon, "gamma": cfg.gamma,
            "T_star": float(report.T_star),
            "T_err": float((1 + alpha) * report.T_star / 2.0 - 1.0),
            "b1": float(fit.b1), "exponent": float(fit.holder_exponent_fit),
            "y_star": float(profile.y_star % 1.0)}


def cmd_sweep(cfg: RunConfig) -> int:
    out = _rundir(cfg)
    eps_list = [float(v) for v in cfg.sweep_epsilons.split(",") if v]
    n_list = [int(v) for v in cfg.sweep_ns.split(",") if v]
    configs = [asdict(replace(cfg, epsilon=e, n=n))
               for n in n_list for e in eps_list]
    results = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        for res in ex.map(_sweep_worker, configs):
            results.append(res)
    results.sort(key=lambda r: (r["n"], r["epsilon"]))
    cols = ["n", "epsilon", "gamma", "T_star", "T_err", "b1", "exponent",
            "y_star"]
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for r in results:
            writer.writerow([repr(r[c]) for c in cols])
    print(f"sweep: {len(results)} runs -> {out / 'sweep.csv'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="preshock",
        description="1D Euler gradient-blowup laboratory")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", help="output directory (default $PRESHOCK_OUT)")
    parser.add_argument("--n", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--grid", type=int)
    parser.add_argument("--delta-stop", dest="delta_stop", type=float)
    parser.add_argument("--jacobian-mode", dest="jacobian_mode",
                        choices=["scaled_identity", "finite_difference",
                                 "sensitivity"])
    parser.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("burgers")
    sub.add_parser("simulate")
    sub.add_parser("manifold")
    p_fit = sub.add_parser("cusp-fit")
    p_fit.add_argument("run_dir", help="existing run directory to refit")
    sub.add_parser("sweep")

    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "burgers":
            return cmd_burgers(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "manifold":
            return cmd_manifold(cfg)
        if args.command == "cusp-fit":
            return cmd_cusp_fit(cfg, args.run_dir)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        parser.error(f"unknown command {args.command}")
    except PreshockError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": "InvalidConfig", "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
