import xml.etree.ElementTree as ET

import numpy as np
import pytest

from beliefslap.plot import render_plot, render_svg
from beliefslap.scenario import load_scenario
from beliefslap.sim import RunLog, run_simulation

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def run():
    s = load_scenario("three_obstacles")
    d = dict(s.data)
    d["stopping"] = dict(d["stopping"], max_steps=5)
    s = load_scenario(d)
    return s, run_simulation(s)


def ellipses(svg):
    root = ET.fromstring(svg)
    return [el for el in root.iter(SVG + "polygon") if "ellipsoid" in el.get("class", "").split()]


def quadric_errors(svg):
    errs = []
    for el in ellipses(svg):
        c = np.array(el.get("data-center").split(), float)
        P = np.array(el.get("data-P").split(), float).reshape(2, 2)
        pts = np.array([p.split(",") for p in el.get("points").split()], float)
        d = pts - c
        errs.append(np.abs(np.einsum("ni,ij,nj->n", d, P, d) - 1.0).max())
    return np.array(errs)


def test_same_log_gives_byte_identical_files(run, tmp_path):
    s, log = run
    a = render_plot(log, s, tmp_path / "a.svg").read_bytes()
    b = render_plot(RunLog.from_json(log.to_json()), s, tmp_path / "b.svg").read_bytes()
    assert a == b


@pytest.mark.parametrize("name", ["three_obstacles", "four_moving", "spiral", "youbot"])
def test_plotted_ellipse_points_lie_on_their_quadric(name):
    s = load_scenario(name)
    errs = quadric_errors(render_svg(None, s))
    assert errs.size > 0 and errs.max() < 1e-6


def test_run_plot_quadric_and_layers(run):
    s, log = run
    svg = render_svg(log, s)
    assert quadric_errors(svg).max() < 1e-6
    classes = {el.get("class") for el in ET.fromstring(svg).iter() if el.get("class")}
    assert {"planned", "executed", "seed", "map", "particle initial", "landmark", "legend"} <= classes
    assert "x [m]" in svg and "y [m]" in svg


def test_empty_log_gives_scene_only(run):
    s, _ = run
    empty = RunLog("three_obstacles", 0, True)
    for log in (None, empty):
        svg = render_svg(log, s)
        ET.fromstring(svg)
        assert 'class="executed"' not in svg and 'class="planned"' not in svg
        assert len(ellipses(svg)) > 0


def test_unwritable_path_raises(run, tmp_path):
    s, log = run
    with pytest.raises(OSError):
        render_plot(log, s, tmp_path / "missing" / "dir" / "x.svg")
