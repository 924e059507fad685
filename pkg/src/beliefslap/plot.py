"""Static SVG rendering of a scenario and a run log.

Scene geometry is written in world coordinates (meters) inside a group whose
transform flips the y axis, so every plotted point can be read back and
checked against the ellipse it came from.  Output depends only on its inputs.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .geometry import Ellipsoid

PX_PER_M = 100.0
PAD = 60.0
LEGEND_W = 190.0
N_BOUNDARY = 72

COLORS = {
    "obstacle": "#8c8c8c",
    "inflated": "#d62728",
    "landmark": "#2ca02c",
    "goal": "#9467bd",
    "seed": "#1f9e3a",
    "planned": "#e6b800",
    "executed": "#1f77b4",
    "map": "#17becf",
    "initial_particles": "#ff7f0e",
    "final_particles": "#1f77b4",
    "moving": "#7f7f7f",
}


def _num(v):
    text = f"{float(v):.9f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-0") else text


def _pts(P):
    return " ".join(f"{_num(x)},{_num(y)}" for x, y in np.asarray(P, dtype=float)[:, :2])


def _ellipse(e: Ellipsoid, cls, stroke, fill="none", dash=None, opacity=1.0):
    attrs = [f'class="{cls}"', f'points="{_pts(e.boundary(N_BOUNDARY))}"',
             f'data-center="{_num(e.center[0])} {_num(e.center[1])}"',
             'data-P="' + " ".join(_num(v) for v in e.P.ravel()) + '"',
             f'stroke="{stroke}"', f'fill="{fill}"', 'vector-effect="non-scaling-stroke"']
    if dash:
        attrs.append(f'stroke-dasharray="{dash}"')
    if opacity != 1.0:
        attrs.append(f'opacity="{_num(opacity)}"')
    return "<polygon " + " ".join(attrs) + "/>"


def _polyline(P, cls, stroke, width=1.5, dash=None):
    if len(P) < 2:
        return ""
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline class="{cls}" points="{_pts(P)}" stroke="{stroke}" fill="none" '
            f'stroke-width="{_num(width)}" vector-effect="non-scaling-stroke"{d}/>')


def _dots(P, cls, color, r):
    return "\n".join(f'<circle class="{cls}" cx="{_num(x)}" cy="{_num(y)}" r="{_num(r)}" '
                     f'fill="{color}" fill-opacity="0.5"/>' for x, y in np.asarray(P)[:, :2])


def _bounds(s, log):
    if s.workspace is not None:
        lo, hi = np.asarray(s.workspace[0], float), np.asarray(s.workspace[1], float)
        return lo, hi
    pts = [s.goal[:2][None], np.asarray(s.true_state, float)[:2][None]]
    if s.landmarks is not None and len(s.landmarks):
        pts.append(np.asarray(s.landmarks, float).reshape(-1, 2))
    for o in s.obstacles:
        pts.append(o.planning.ellipsoid_at(0.0).boundary(16))
    if log is not None and log.records:
        pts.append(log.trajectory[:, :2])
    P = np.vstack(pts)
    return P.min(axis=0) - 0.5, P.max(axis=0) + 0.5


def _ticks(lo, hi):
    span = hi - lo
    step = 0.5 if span <= 5 else 1.0 if span <= 10 else 2.0
    return np.arange(np.ceil(lo / step) * step, hi + 1e-9, step)


def _robot_boxes(s, X):
    """Rectangles with a heading line for a heading-carrying model."""
    proc = s.process
    if proc.heading_index is None or len(X) == 0:
        return []
    off = float(np.max(np.abs(proc.body_offsets[:, 0]))) if len(proc.body_offsets) else 0.0
    hl, hw = off + proc.body_radius, proc.body_radius
    out = []
    every = max(1, len(X) // 8)
    for x in X[::every]:
        c, sn = np.cos(x[2]), np.sin(x[2])
        R = np.array([[c, -sn], [sn, c]])
        corners = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]]) @ R.T + x[:2]
        tip = x[:2] + R @ np.array([hl, 0.0])
        out.append(f'<polygon class="robot" points="{_pts(corners)}" stroke="#333333" '
                   'fill="none" vector-effect="non-scaling-stroke"/>')
        out.append(_polyline(np.array([x[:2], tip]), "heading", "#333333", 1.0))
    return out


def render_svg(log, s) -> str:
    """SVG text for scenario ``s`` and (possibly empty or None) run ``log``."""
    lo, hi = _bounds(s, log)
    w = (hi[0] - lo[0]) * PX_PER_M + 2 * PAD + LEGEND_W
    h = (hi[1] - lo[1]) * PX_PER_M + 2 * PAD
    tx, ty = PAD - lo[0] * PX_PER_M, PAD + hi[1] * PX_PER_M

    def screen(x, y):
        return tx + x * PX_PER_M, ty - y * PX_PER_M

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(w)}" height="{_num(h)}" '
           f'viewBox="0 0 {_num(w)} {_num(h)}" font-family="sans-serif" font-size="12">',
           f"<title>{escape(s.name)}</title>",
           '<rect x="0" y="0" width="100%" height="100%" fill="white"/>']

    # axes and grid, in screen coordinates so the text is upright
    x0, y0 = screen(lo[0], lo[1])
    x1, y1 = screen(hi[0], hi[1])
    out.append(f'<rect class="frame" x="{_num(x0)}" y="{_num(y1)}" width="{_num(x1 - x0)}" '
               f'height="{_num(y0 - y1)}" fill="none" stroke="black"/>')
    for v in _ticks(lo[0], hi[0]):
        sx, _ = screen(v, 0)
        out.append(f'<line x1="{_num(sx)}" y1="{_num(y0)}" x2="{_num(sx)}" y2="{_num(y1)}" '
                   'stroke="#eeeeee"/>')
        out.append(f'<text x="{_num(sx)}" y="{_num(y0 + 16)}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(lo[1], hi[1]):
        _, sy = screen(0, v)
        out.append(f'<line x1="{_num(x0)}" y1="{_num(sy)}" x2="{_num(x1)}" y2="{_num(sy)}" '
                   'stroke="#eeeeee"/>')
        out.append(f'<text x="{_num(x0 - 6)}" y="{_num(sy + 4)}" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{_num((x0 + x1) / 2)}" y="{_num(y0 + 36)}" text-anchor="middle">x [m]</text>')
    out.append(f'<text x="{_num(x0 - 40)}" y="{_num((y0 + y1) / 2)}" text-anchor="middle" '
               f'transform="rotate(-90 {_num(x0 - 40)} {_num((y0 + y1) / 2)})">y [m]</text>')

    # world group: y up, units in meters
    out.append(f'<g class="world" transform="translate({_num(tx)} {_num(ty)}) '
               f'scale({_num(PX_PER_M)} {_num(-PX_PER_M)})">')
    t_end = log.records[-1].time if log is not None and log.records else 0.0
    dynamic = s.mode == "dynamic"
    for o in s.obstacles:
        if o.polygon is not None and o.truth.is_static:
            out.append(f'<polygon class="obstacle" points="{_pts(o.polygon)}" '
                       f'fill="{COLORS["obstacle"]}" fill-opacity="0.6" stroke="none"/>')
        if dynamic and not o.truth.is_static:
            times = np.linspace(max(o.appears_at, 0.0), max(t_end, o.appears_at), 5)
            centers = np.array([o.truth.pose(t)[0] for t in np.linspace(times[0], times[-1], 40)])
            out.append(_polyline(centers, "obstacle-path", COLORS["moving"], 1.0, "0.03 0.03"))
            for i, t in enumerate(times):
                out.append(_ellipse(o.truth.ellipsoid_at(t), "ellipsoid", COLORS["moving"],
                                    COLORS["moving"], opacity=0.2 + 0.6 * i / (len(times) - 1)))
        else:
            out.append(_ellipse(o.truth.ellipsoid_at(0.0), "ellipsoid", COLORS["obstacle"]))
            out.append(_ellipse(o.planning.ellipsoid_at(0.0), "ellipsoid inflated",
                                COLORS["inflated"], dash="0.05 0.03"))
    goal = Ellipsoid.circle(s.goal[:2], s.stopping.radius)
    out.append(_ellipse(goal, "ellipsoid goal", COLORS["goal"], dash="0.04 0.04"))
    if s.landmarks is not None:
        for x, y in np.asarray(s.landmarks, float).reshape(-1, 2):
            star = np.array([[x + 0.08 * np.cos(a), y + 0.08 * np.sin(a)] if k % 2 == 0 else
                             [x + 0.035 * np.cos(a), y + 0.035 * np.sin(a)]
                             for k, a in enumerate(np.pi / 2 + np.arange(10) * np.pi / 5)])
            out.append(f'<polygon class="landmark" points="{_pts(star)}" fill="{COLORS["landmark"]}"/>')
    if log is not None:
        if log.initial_particles:
            out.append(_dots(log.initial_particles, "particle initial", COLORS["initial_particles"], 0.012))
        if log.records and log.final_particles:
            out.append(_dots(log.final_particles, "particle final", COLORS["final_particles"], 0.012))
        if log.seed_path:
            out.append(_polyline(log.seed_path, "seed", COLORS["seed"], 1.5, "0.08 0.05"))
        if log.records:
            out.append(_polyline(log.records[0].planned, "planned", COLORS["planned"], 2.0))
            out.append(_polyline(log.trajectory, "executed", COLORS["executed"], 1.5))
            maps = np.array([log.initial_map] + [r.map_estimate for r in log.records])
            out.append(_polyline(maps, "map", COLORS["map"], 1.0, "0.02 0.03"))
            out.extend(_robot_boxes(s, log.trajectory))
    out.append("</g>")

    # legend
    entries = [("obstacle", COLORS["obstacle"], None), ("inflated ellipsoid", COLORS["inflated"], "6 3"),
               ("goal region", COLORS["goal"], "4 4"), ("landmark", COLORS["landmark"], None)]
    if log is not None:
        entries += [("initial trajectory", COLORS["seed"], "8 5"),
                    ("planned trajectory", COLORS["planned"], None),
                    ("executed trajectory", COLORS["executed"], None),
                    ("MAP estimate", COLORS["map"], "2 3"),
                    ("initial particles", COLORS["initial_particles"], None),
                    ("final particles", COLORS["final_particles"], None)]
    lx = x1 + 20
    out.append(f'<g class="legend"><rect x="{_num(lx)}" y="{_num(y1)}" width="{_num(LEGEND_W - 30)}" '
               f'height="{_num(18 * len(entries) + 10)}" fill="white" stroke="#999999"/>')
    for i, (label, color, dash) in enumerate(entries):
        yy = y1 + 16 + 18 * i
        d = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{_num(lx + 8)}" y1="{_num(yy - 4)}" x2="{_num(lx + 32)}" '
                   f'y2="{_num(yy - 4)}" stroke="{color}" stroke-width="3"{d}/>')
        out.append(f'<text x="{_num(lx + 38)}" y="{_num(yy)}">{escape(label)}</text>')
    out.append("</g>")
    status = f"{log.status}, {log.steps} steps" if log is not None else "scene only"
    out.append(f'<text x="{_num(x0)}" y="{_num(y1 - 12)}">{escape(s.name)}: {escape(status)}</text>')
    out.append("</svg>")
    return "\n".join(line for line in out if line) + "\n"


def render_plot(log, s, out_path) -> Path:
    """Write the SVG for ``log`` over scenario ``s``; returns the path."""
    path = Path(out_path)
    try:
        path.write_text(render_svg(log, s))
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc}") from exc
    return path
