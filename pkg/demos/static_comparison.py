"""Three-obstacle scene with and without the information cost.

Runs both arms with the same seed, prints the comparison summary and writes
one SVG per arm.  Usage: python3 demos/static_comparison.py [--seed N] [--out DIR]
"""
import argparse
import json
from pathlib import Path

from beliefslap import load_scenario, render_plot, run_comparison
from beliefslap.sim import plan_first_step


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="demo_output")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    s = load_scenario("three_obstacles").with_overrides(seed=args.seed)
    policy, best = plan_first_step(s)
    print("first-step candidates:")
    for seed, r in policy.candidates:
        mark = "*" if r is best else " "
        print(f" {mark} {str(r.signature):<10} total {r.total:9.3f}  info {r.cost.info:8.3f}  "
              f"effort {r.cost.effort:8.3f}  obstacle {r.cost.obstacle:8.3f}")

    on, off, summary = run_comparison(s)
    print(json.dumps(summary, indent=1, sort_keys=True))
    for log, info in ((on, True), (off, False)):
        path = render_plot(log, s.with_overrides(info_cost=info),
                           out / f"three_obstacles_info_{'on' if info else 'off'}.svg")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
