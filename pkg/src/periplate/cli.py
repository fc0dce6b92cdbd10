"""Command-line driver: single solves, fixed-point searches, ladders, studies.

    periplate --config run.toml [--mode MODE] [--out DIR] [--seed N]
              [--deterministic true|false]

Every run writes a JSON report and an RFC-4180 CSV of the time series into
the output directory, renders the matching PNG figures next to them, and
exits 0 only if all assertions enabled by the mode hold.
"""

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config
from .diagnostics import build_report
from .fields import PlateProfile
from .figures import (render_convergence_figure, render_ladder_figure,
                      render_report_figures, render_study_figure)
from .fixedpoint import (find_fixed_point, refinement_ladder,
                         trajectory_defects, warm_start)
from .geometry import GeometryTrajectory
from .integrator import DecoupledSystem, integrate
from .reporting import (ensure_dir, load_checkpoint, save_checkpoint,
                        write_json, write_report_json, write_series_csv)
from .selftest import run_selftest


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="periplate",
        description="Time-periodic fluid/plate channel solver (spectral Galerkin).",
    )
    parser.add_argument("--config", required=True, help="TOML configuration file")
    parser.add_argument("--mode", default=None,
                        help="override run.mode (solve|fixpoint|ladder|study|selftest)")
    parser.add_argument("--out", default=None, help="override run.out_dir")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized invariant checks")
    parser.add_argument("--deterministic", default=None, choices=("true", "false"),
                        help="force the deterministic-reduction flag")
    return parser.parse_args(argv)


def prescribed_geometry(cfg, nt=None):
    """Analytic geometry trajectory from the [geometry] config table."""
    nt = cfg.nt if nt is None else nt
    times = np.linspace(0.0, cfg.T, nt + 1)
    k_geo = max([cfg.k_max] + [m["space_k"] for m in cfg.geometry_modes])
    profiles = []
    for t in times:
        prof = PlateProfile.constant(cfg.mean, k_geo)
        for mode in cfg.geometry_modes:
            if mode["time_phase"] == "const":
                tau = 1.0
            else:
                arg = 2.0 * np.pi * mode["time_k"] * t / cfg.T
                tau = np.cos(arg) if mode["time_phase"] == "cos" else np.sin(arg)
            amp = mode["amplitude"] * tau
            kw = {"amplitude_cos" if mode["space_phase"] == "cos"
                  else "amplitude_sin": amp}
            prof = prof + PlateProfile.single_mode(mode["space_k"], k_max=k_geo, **kw)
        profiles.append(prof)
    return GeometryTrajectory(times, profiles)


def _emit_run_artifacts(out_dir, stem, report, cfg, extra=None, result=None):
    if result is not None:
        extra = dict(extra or {})
        extra.update({
            "converged": result.converged,
            "iterations": result.iterations,
            "fixed_point_residual": result.residual,
            "coupling_defect": result.coupling_defect,
        })
    write_report_json(f"{out_dir}/{stem}_report.json", report,
                      config_echo=cfg.echo(), extra=extra)
    write_series_csv(f"{out_dir}/{stem}_series.csv", report)
    render_report_figures(report, out_dir, stem=stem)


def mode_solve(cfg, out_dir):
    """One decoupled solve on the prescribed geometry, from rest."""
    problem = cfg.build_problem()
    geometry = prescribed_geometry(cfg)
    system = DecoupledSystem(
        problem.basis, geometry, problem.forcing, problem.grid,
        options=problem.options, mean_profile=problem.mean_profile(),
    )
    n = problem.n
    traj, series = integrate(system, (np.zeros(n), np.zeros(n)), cfg.nt,
                             energy_ceiling=cfg.energy_ceiling)
    per, _ = trajectory_defects(problem, traj, geometry)
    report = build_report(series, problem.forcing, geometry, problem.grid,
                          cfg.mean, cfg.kappa, periodicity_defect=per)
    _emit_run_artifacts(out_dir, "solve", report, cfg)
    save_checkpoint(f"{out_dir}/solve_checkpoint.bin", traj,
                    meta={"mode": "solve"})
    return 0


def _fixpoint_report(cfg, problem, result):
    report = build_report(
        result.series, problem.forcing, result.geometry, problem.grid,
        cfg.mean, cfg.kappa, periodicity_defect=result.periodicity_defect,
        extras={
            "converged": result.converged,
            "iterations": result.iterations,
            "fixed_point_residual": result.residual,
            "coupling_defect": result.coupling_defect,
            "history": result.history,
        },
    )
    return report


def mode_fixpoint(cfg, out_dir):
    problem = cfg.build_problem()
    fp_cfg = cfg.build_fp_config()
    initial = None
    resume = cfg.raw.get("fixed_point", {}).get("resume")
    if resume:
        initial, _ = load_checkpoint(resume)

    def on_iteration(it, a, res):
        save_checkpoint(f"{out_dir}/checkpoint.bin", a,
                        meta={"iteration": it, "residual": res})

    result = find_fixed_point(problem, fp_cfg, initial=initial,
                              on_iteration=on_iteration)
    report = _fixpoint_report(cfg, problem, result)
    _emit_run_artifacts(out_dir, "fixpoint", report, cfg, result=result)
    render_convergence_figure(result.history, out_dir, stem="fixpoint")
    save_checkpoint(f"{out_dir}/fixpoint_solution.bin", result.trajectory,
                    meta={"converged": result.converged,
                          "residual": result.residual})
    if not result.converged:
        print(f"fixpoint: {result.message}", file=sys.stderr)
        return 2
    return 0


def mode_ladder(cfg, out_dir):
    if len(cfg.ladder_levels) < 1:
        raise ConfigError("ladder.levels", "ladder mode needs at least one level")
    fp_cfg = cfg.build_fp_config()
    grid = cfg.build_grid()

    def make_problem(n, nt):
        return cfg.build_problem(n=n, nt=nt, grid=grid)

    results, distances = refinement_ladder(cfg.ladder_levels, make_problem, fp_cfg)
    all_ok = all(r.converged for r in results)
    payload = {
        "levels": [lv.as_dict() for lv in cfg.ladder_levels],
        "converged": [r.converged for r in results],
        "residuals": [r.residual for r in results],
        "sup_energies": [r.series.max_energy() for r in results],
        "distances": distances,
    }
    write_json(f"{out_dir}/ladder.json", payload)
    for i, result in enumerate(results):
        problem = make_problem(cfg.ladder_levels[i].n, cfg.ladder_levels[i].nt)
        report = _fixpoint_report(cfg, problem, result)
        _emit_run_artifacts(out_dir, f"level{i}", report, cfg, result=result)
    render_ladder_figure(distances, out_dir)
    return 0 if all_ok else 2


def mode_study(cfg, out_dir):
    factors = sorted(cfg.study_factors, reverse=True)
    fp_cfg = cfg.build_fp_config()
    grid = cfg.build_grid()
    rows = []
    prev_traj = None
    prev_factor = None
    all_ok = True
    for factor in factors:
        problem = cfg.build_problem(grid=grid, scale=factor)
        initial = None
        if prev_traj is not None:
            initial = warm_start(prev_traj, cfg.nt, cfg.n)
            ratio = factor / prev_factor
            initial.values *= ratio
            initial.derivatives *= ratio
        result = find_fixed_point(problem, fp_cfg, initial=initial)
        all_ok &= result.converged
        report = _fixpoint_report(cfg, problem, result)
        stem = f"study_{factor:g}".replace(".", "p")
        _emit_run_artifacts(out_dir, stem, report, cfg, result=result)
        rows.append({
            "factor": factor,
            "converged": result.converged,
            "c_forcing": report.c_forcing,
            "sup_energy": report.sup_energy,
            "sup_eta": float(np.max(report.sup_eta)),
            "bound_constant": report.bound_constant,
        })
        prev_traj = result.trajectory
        prev_factor = factor

    amps = [r["factor"] for r in rows]
    sup_e = [r["sup_energy"] for r in rows]
    sup_eta = [r["sup_eta"] for r in rows]
    payload = {"runs": rows}
    from .diagnostics import check_smallness_regime
    payload["smallness"] = check_smallness_regime(amps, sup_eta, kappa=cfg.kappa)
    if all(v > 0 for v in sup_e):
        payload["energy_exponent"] = float(np.polyfit(
            np.log(amps), np.log(sup_e), 1)[0])
    if all(v > 0 for v in sup_eta):
        payload["eta_exponent"] = float(np.polyfit(
            np.log(amps), np.log(sup_eta), 1)[0])
    constants = [r["bound_constant"] for r in rows if r["bound_constant"] > 0]
    if constants:
        payload["bound_constant_spread"] = max(constants) / min(constants)
        payload["shared_bound_constant"] = max(constants)
    write_json(f"{out_dir}/study.json", payload)
    render_study_figure(amps, sup_e, sup_eta, out_dir)
    return 0 if all_ok else 2


def mode_selftest(cfg, out_dir):
    results = run_selftest(seed=cfg.seed)
    write_json(f"{out_dir}/selftest.json", {"results": results, "seed": cfg.seed})
    return 0 if all(r["passed"] for r in results) else 1


def main(argv=None):
    args = _parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.mode:
        if args.mode not in ("solve", "fixpoint", "ladder", "study", "selftest"):
            print(f"error: unknown mode {args.mode!r}", file=sys.stderr)
            return 2
        cfg.mode = args.mode
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.deterministic is not None:
        cfg.deterministic = args.deterministic == "true"

    out_dir = ensure_dir(cfg.out_dir)
    dispatch = {
        "solve": mode_solve,
        "fixpoint": mode_fixpoint,
        "ladder": mode_ladder,
        "study": mode_study,
        "selftest": mode_selftest,
    }
    try:
        return dispatch[cfg.mode](cfg, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
