"""Command-line entry point: ``beliefslap <command> ...``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ScenarioError, SlapError
from .geometry import mvee
from .plot import render_plot
from .scenario import load_scenario
from .sim import plan_first_step, run_comparison, run_simulation

COST_KEYS = ("info", "effort", "obstacle", "terminal", "boundary", "total")


def _scenario(args):
    s = load_scenario(args.scenario)
    info = False if getattr(args, "no_info", False) else None
    return s.with_overrides(seed=args.seed, info_cost=info, horizon=args.horizon)


def _cost_line(cost):
    return "  ".join(f"{k}={cost[k]:.6g}" for k in COST_KEYS)


def cmd_plan(args):
    s = _scenario(args)
    _, plan = plan_first_step(s)
    print(f"scenario {s.name}  seed {s.seed}  K={plan.controls.shape[0]}")
    print(f"signature {plan.signature}" if plan.signature is not None else "signature -")
    print(_cost_line(plan.cost.to_dict()))
    print(f"iterations {plan.iterations}  outer {plan.outer_iterations}  "
          f"terminal_error {plan.terminal_error:.3g}  kkt {plan.kkt_residual:.3g}  "
          f"barrier_violation {plan.barrier_violation}")
    return 1 if plan.barrier_violation else 0


def cmd_homotopy(args):
    s = _scenario(args)
    policy, _ = plan_first_step(s)
    rows = sorted(policy.candidates, key=lambda c: c[1].total)
    print(f"{'rank':>4}  {'seed signature':<20} {'result signature':<20} {'total':>10} "
          f"{'info':>9} {'effort':>9} {'obstacle':>9} {'preserved':>9} {'violation':>9}")
    for i, (seed, r) in enumerate(rows, 1):
        c = r.cost.to_dict()
        print(f"{i:>4}  {str(seed.signature):<20} {str(r.signature):<20} {c['total']:>10.4f} "
              f"{c['info']:>9.4f} {c['effort']:>9.4f} {c['obstacle']:>9.4f} "
              f"{str(r.homotopy_preserved):>9} {str(r.barrier_violation):>9}")
    return 0


def _finish_run(log, s, args, stem=None):
    paths = log.write(args.out, stem)
    for p in paths:
        print(f"wrote {p}")
    if args.plot:
        svg = render_plot(log, s, Path(args.out) / f"{stem or f'{s.name}_seed{s.seed}'}.svg")
        print(f"wrote {svg}")


def cmd_simulate(args):
    s = _scenario(args)
    log = run_simulation(s)
    _finish_run(log, s, args)
    print(f"status {log.status}  steps {log.steps}  goal_probability {log.final_goal_probability:.4f}  "
          f"collision {log.collided}")
    if log.message:
        print(log.message, file=sys.stderr)
    return 0 if log.reached else 1


def cmd_compare(args):
    s = _scenario(args)
    on, off, summary = run_comparison(s)
    _finish_run(on, s.with_overrides(info_cost=True), args, f"{s.name}_seed{on.seed}_info_on")
    _finish_run(off, s.with_overrides(info_cost=False), args, f"{s.name}_seed{off.seed}_info_off")
    out = Path(args.out) / f"{s.name}_seed{on.seed}_comparison.json"
    out.write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(f"wrote {out}")
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0 if on.reached and off.reached else 1


def _read_points(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return np.loadtxt(path, ndmin=2)
    if isinstance(data, dict):
        data = data.get("points", data.get("polygon"))
    return np.asarray(data, dtype=float)


def cmd_mvee(args):
    e = mvee(_read_points(args.vertices))
    c, P = e.center, e.P
    print(f"c=({c[0]:.6f}, {c[1]:.6f})")
    print(f"P=[[{P[0, 0]:.6f}, {P[0, 1]:.6f}], [{P[1, 0]:.6f}, {P[1, 1]:.6f}]]")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="beliefslap",
                                 description="Belief-space planning with receding-horizon control.")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, helptext, func, outputs=False):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("scenario", help="scenario JSON file or bundled scenario name")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--no-info", action="store_true", help="disable the information cost")
        p.add_argument("--horizon", type=int, default=None, help="override the planning horizon K")
        if outputs:
            p.add_argument("--out", default="runs", help="output directory (default: runs)")
            p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                           help="write an SVG plot next to the logs")
        p.set_defaults(func=func)

    scenario_cmd("plan", "single open-loop solve, prints the cost breakdown", cmd_plan)
    scenario_cmd("homotopy", "optimize one seed per homotopy class, print a ranked table", cmd_homotopy)
    scenario_cmd("simulate", "closed-loop run, writes logs and a plot", cmd_simulate, outputs=True)
    scenario_cmd("compare", "paired runs with the info cost on and off", cmd_compare, outputs=True)
    p = sub.add_parser("mvee", help="minimum-volume enclosing ellipse of a vertex file")
    p.add_argument("vertices", help="JSON list of [x, y] points or a whitespace-separated text file")
    p.set_defaults(func=cmd_mvee)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except (SlapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
