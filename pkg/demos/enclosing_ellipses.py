"""Minimum-volume enclosing ellipses of the bundled obstacle polygons.

For every polygon obstacle prints the fitted ellipse, the inflated planning
ellipse and the area ratio ellipse/polygon.  Usage: python3 demos/enclosing_ellipses.py
"""
import numpy as np

from beliefslap.scenario import bundled_scenarios, load_scenario
from beliefslap.geometry import mvee


def polygon_area(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ellipse_area(e):
    return np.pi / np.sqrt(np.linalg.det(e.P))


def main():
    for name in bundled_scenarios():
        s = load_scenario(name)
        for o in s.obstacles:
            if o.polygon is None:
                continue
            e = mvee(o.polygon)
            plan = o.planning.base
            print(f"{name:<16} {o.name:<10} c=({e.center[0]:.3f}, {e.center[1]:.3f})  "
                  f"P=[[{e.P[0, 0]:.3f}, {e.P[0, 1]:.3f}], [{e.P[1, 0]:.3f}, {e.P[1, 1]:.3f}]]  "
                  f"area ratio {ellipse_area(e) / polygon_area(o.polygon):.2f}  "
                  f"inflated area {ellipse_area(plan):.3f}")


if __name__ == "__main__":
    main()
