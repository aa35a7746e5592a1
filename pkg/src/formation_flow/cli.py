"""``formation-flow`` command line interface.

Exit codes: 0 success, 1 config error, 2 infeasible distances,
3 integration failure, 4 refinement failure, 5 a locked Monte Carlo run
found an incorrect equilibrium.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, dynamics, energy, geometry
from .config import PRESETS, Scenario, edge_key
from .exceptions import ConfigError, FormationError, RefinementFailedError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_INTEGRATION = 3
EXIT_REFINEMENT = 4
EXIT_INCORRECT = 5


def _load_scenario(args) -> Scenario:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset")
    if args.preset:
        try:
            scenario = PRESETS[args.preset]
        except KeyError:
            raise ConfigError(f"unknown preset {args.preset!r}; have {sorted(PRESETS)}") from None
    elif args.config:
        scenario = Scenario.load(args.config)
    else:
        raise ConfigError("a scenario is required (--config PATH or --preset NAME)")
    try:
        return scenario.with_overrides(t_max=getattr(args, "tmax", None), dt=getattr(args, "dt", None))
    except FormationError as exc:
        raise ConfigError(str(exc)) from exc


def _dump_json(doc, path: Path | None):
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def cmd_check(args, out) -> int:
    scenario = _load_scenario(args)
    spec = scenario.spec()
    if args.alpha is not None:
        spec = geometry.lift_distances(spec, args.alpha, scenario.virtual_vertex or spec.num_vertices)
    if spec.num_vertices != 4 or not spec.graph.is_complete():
        raise ConfigError("check needs K4 distances (all six edges of four agents)")
    for face in geometry.K4_FACES:
        verdict = "ok" if geometry.triangle_feasible(spec, face) else "violated"
        print(f"triangle {face}: {verdict}", file=out)
    det = geometry.cayley_menger_det(spec)
    kind = geometry.classify_realizability(spec)
    print(f"{kind}, det C = {det:.10g}", file=out)
    return EXIT_INFEASIBLE if kind is geometry.Realizability.INFEASIBLE else EXIT_OK


def cmd_lift(args, out) -> int:
    scenario = _load_scenario(args)
    alpha = args.alpha if args.alpha is not None else scenario.alpha
    if alpha is None:
        raise ConfigError("lift needs --alpha")
    try:
        lifted = geometry.lift_distances(scenario.spec(), alpha,
                                         scenario.virtual_vertex or scenario.num_agents)
    except FormationError as exc:
        raise ConfigError(str(exc)) from exc
    lines = [f"# tetrahedral targets, alpha = {alpha!r}", "distances_are_squared = true", "",
             "[distances]"]
    lines += [f'"{edge_key(e)}" = {v!r}' for e, v in lifted.sq_distances.items()]
    text = "\n".join(lines) + "\n"
    if args.out:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    out.write(text)
    return EXIT_OK


def _edge_error_dict(sys_, x):
    return {edge_key(e.edge): e.value for e in energy.edge_errors(sys_, x)}


def simulate(scenario: Scenario, seed: int | None, out_dir: Path | None):
    """Run one scenario; returns (system, trajectory, report dict)."""
    sys_ = scenario.system()
    x0 = scenario.initial_state(seed)
    traj = dynamics.integrate(sys_, x0, scenario.integrator)
    x = traj.final_state
    report = {
        "scenario": scenario.name,
        "law": scenario.law,
        "terminal_reason": traj.terminal_reason.value,
        "final_time": float(traj.times[-1]),
        "final_potential": traj.final_potential,
        "final_grad_norm": traj.final_grad_norm,
        "samples": len(traj),
        "edge_errors": _edge_error_dict(sys_, x),
    }
    if sys_.is_locked:
        report["planar_errors"] = {edge_key(e): float(v) for e, v in
                                   zip(sys_.spec.graph.edges, energy.planar_errors(sys_, x))}
    if traj.terminal_reason is dynamics.TerminalReason.GRADIENT_BELOW_TOL:
        try:
            x_eq = analysis.refine_equilibrium(sys_, x)
            report["classification"] = analysis.classify(sys_, x_eq).classification.value
        except RefinementFailedError:
            report["classification"] = None
    if out_dir is not None:
        name = scenario.trajectory_path or f"{scenario.name}.csv"
        dynamics.write_trajectory_csv(sys_, traj, out_dir / name)
        _dump_json(report, out_dir / (scenario.report_path or f"{scenario.name}_report.json"))
    return sys_, traj, report


def cmd_simulate(args, out) -> int:
    scenario = _load_scenario(args)
    out_dir = Path(args.out) if args.out else Path(".")
    _, traj, report = simulate(scenario, args.seed, out_dir)
    print(f"terminal reason: {report['terminal_reason']} at t = {report['final_time']:.6g}", file=out)
    print(f"final potential: {report['final_potential']:.6g}", file=out)
    for edge, err in report["edge_errors"].items():
        print(f"  e[{edge}] = {err:.6g}", file=out)
    if traj.terminal_reason is not dynamics.TerminalReason.GRADIENT_BELOW_TOL:
        return EXIT_INTEGRATION
    if report.get("classification") == analysis.Classification.CORRECT.value:
        print("correct formation reached", file=out)
    else:
        print(f"incorrect equilibrium (v = {report['final_potential']:.6g})", file=out)
    return EXIT_OK


def _read_state(path) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in csv.reader(io.StringIO(text.replace(" ", ","))) if any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path} holds no state")
    header = rows[0][0].strip() == "t"
    last = [c for c in rows[-1] if c.strip()]
    try:
        values = np.array([float(c) for c in last])
    except ValueError:
        raise ConfigError(f"{path}: last row is not numeric") from None
    return values[1:-1] if header else values


def cmd_classify(args, out) -> int:
    scenario = _load_scenario(args)
    sys_ = scenario.system()
    x = _read_state(args.state)
    if x.size != sys_.state_size:
        raise ConfigError(f"state has {x.size} entries, scenario needs {sys_.state_size}")
    report_path = Path(args.out) / "classify_report.json" if args.out else None
    try:
        x_eq = analysis.refine_equilibrium(sys_, x)
    except (RefinementFailedError, FormationError) as exc:
        best = getattr(exc, "best", x)
        doc = {"error": str(exc), "best_state": [float(v) for v in best],
               "grad_norm": float(np.linalg.norm(energy.gradient(sys_, best)))}
        out.write(_dump_json(doc, report_path))
        return EXIT_REFINEMENT
    report = analysis.classify(sys_, x_eq)
    out.write(_dump_json(report.to_dict(), report_path))
    return EXIT_OK


def cmd_montecarlo(args, out) -> int:
    scenario = _load_scenario(args)
    sys_ = scenario.system()
    seed = args.seed if args.seed is not None else scenario.init.seed
    stats = analysis.monte_carlo_basin(sys_, scenario.sampler(), args.trials, scenario.integrator,
                                       seed=seed, jobs=args.jobs)
    doc = stats.to_dict()
    doc["scenario"] = scenario.name
    out.write(_dump_json(doc, Path(args.out) / "montecarlo.json" if args.out else None))
    if scenario.is_locked and stats.n_incorrect > 0:
        return EXIT_INCORRECT
    return EXIT_OK


REPRODUCE_RUNS = ("k4-locked", "five-agent-correct", "five-agent-incorrect")


def reproduce(out_dir: Path) -> list[dict]:
    rows = []
    reports = []
    for name in REPRODUCE_RUNS:
        sys_, traj, report = simulate(PRESETS[name], None, out_dir)
        reports.append(report)
        errors = report.get("planar_errors", report["edge_errors"])
        for edge, err in errors.items():
            rows.append([name, edge, format(err, ".17g")])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", "edge", "final_planar_sq_error"])
    writer.writerows(rows)
    (out_dir / "summary.csv").write_text(buf.getvalue())
    return reports


def cmd_reproduce(args, out) -> int:
    out_dir = Path(args.out) if args.out else Path("out")
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = reproduce(out_dir)
    for rep in reports:
        print(f"{rep['scenario']:15s} {rep['terminal_reason']:17s} t = {rep['final_time']:9.3f} "
              f"V = {rep['final_potential']:.6g} -> {rep.get('classification')}", file=out)
    print(f"artifacts written to {out_dir}", file=out)
    ok = all(r["terminal_reason"] == "GradientBelowTol" for r in reports)
    return EXIT_OK if ok else EXIT_INTEGRATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formation-flow",
                                     description="Distance-based formation control experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p):
        p.add_argument("--config", help="scenario TOML file")
        p.add_argument("--preset", help=f"built-in scenario ({', '.join(sorted(PRESETS))})")

    p = sub.add_parser("check", help="triangle and Cayley-Menger realizability check")
    scenario_args(p)
    p.add_argument("--alpha", type=float, help="lift the targets before checking")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lift", help="print tetrahedral targets for the locked law")
    scenario_args(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out", help="also write the fragment to this file")
    p.set_defaults(func=cmd_lift)

    for name, func, helptext in (("simulate", cmd_simulate, "integrate one run"),
                                 ("classify", cmd_classify, "refine and classify an equilibrium"),
                                 ("montecarlo", cmd_montecarlo, "basin-of-attraction estimate")):
        p = sub.add_parser(name, help=helptext)
        scenario_args(p)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory")
        p.add_argument("--tmax", type=float)
        p.add_argument("--dt", type=float)
        p.set_defaults(func=func)
        if name == "classify":
            p.add_argument("--state", required=True, help="trajectory CSV (last row used) or state row")
        if name == "montecarlo":
            p.add_argument("--trials", type=int, default=100)
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("reproduce", help="rerun the built-in presets into --out (default ./out)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
