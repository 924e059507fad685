import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefslap.errors import DegenerateGeometryError
from beliefslap.geometry import (Ellipsoid, Keyframe, ObstacleTrack, Polygon, axis_endpoints,
                                 ball_intersects, contains, distance_to, inflate, inflate_ellipsoid,
                                 mvee, predict_obstacle, rotation, segment_intersects,
                                 segments_intersect)


def cvxpy_mvee(X):
    cp = pytest.importorskip("cvxpy")
    A = cp.Variable((2, 2), PSD=True)
    b = cp.Variable(2)
    cons = [cp.norm(A @ x + b) <= 1 for x in X]
    cp.Problem(cp.Maximize(cp.log_det(A)), cons).solve()
    Av, bv = A.value, b.value
    return -np.linalg.solve(Av, bv), Av.T @ Av


# -- mvee ---------------------------------------------------------------------

def test_mvee_unit_square_is_circumcircle():
    e = mvee([[1, 1], [-1, 1], [-1, -1], [1, -1]])
    np.testing.assert_allclose(e.center, [0, 0], atol=1e-6)
    np.testing.assert_allclose(e.P, 0.5 * np.eye(2), atol=1e-6)


@pytest.mark.parametrize("pts", [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2], [3, 3]]])
def test_mvee_degenerate_inputs(pts):
    with pytest.raises(DegenerateGeometryError):
        mvee(pts)


def test_mvee_matches_convex_program_oracle():
    rng = np.random.default_rng(0)
    for _ in range(5):
        X = rng.normal(size=(8, 2)) * [2.0, 0.7]
        e = mvee(X)
        c, P = cvxpy_mvee(X)
        np.testing.assert_allclose(e.center, c, atol=1e-3)
        np.testing.assert_allclose(e.P, P, rtol=1e-3, atol=1e-3)


def test_mvee_containment_and_minimality_random_sets():
    rng = np.random.default_rng(1)
    for _ in range(50):
        X = rng.uniform(-3, 3, size=(6, 2))
        e = mvee(X)
        q = e.quad(X)
        assert np.all(q <= 1 + 1e-6)
        # shrinking by 0.999 about c scales P by 1/0.999^2
        assert np.any(q / 0.999 ** 2 > 1)


def test_mvee_rotation_equivariance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(7, 2))
    R = rotation(0.7)
    e, er = mvee(X), mvee(X @ R.T)
    np.testing.assert_allclose(er.center, R @ e.center, atol=1e-6)
    np.testing.assert_allclose(er.P, R @ e.P @ R.T, atol=1e-6)


# -- inflation ----------------------------------------------------------------

def seg_dist(p, a, b):
    d = b - a
    s = np.clip((p - a) @ d / (d @ d), 0, 1)
    return np.linalg.norm(p - (a + s * d))


def test_inflate_zero_is_identity():
    sq = Polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    np.testing.assert_array_equal(inflate(sq, 0.0).vertices, sq.vertices)


@pytest.mark.parametrize("order", [1, -1])
def test_inflate_unit_square_edge_clearance(order):
    V = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)[::order]
    out = inflate(Polygon(V), 0.1)
    orig_edges = list(zip(V, np.roll(V, -1, axis=0)))
    for a, b in zip(out.vertices, np.roll(out.vertices, -1, axis=0)):
        for t in np.linspace(0, 1, 21):
            p = a + t * (b - a)
            assert min(seg_dist(p, ea, eb) for ea, eb in orig_edges) >= 0.1 - 1e-12


def test_inflated_mvee_contains_original_mvee():
    poly = Polygon([[0, 0], [2, 0], [2.5, 1], [0.5, 1.5]])
    e0, e1 = mvee(poly.vertices), mvee(inflate(poly, 0.2).vertices)
    assert np.all(e1.quad(e0.boundary(200)) <= 1 + 1e-9)


def test_inflate_ellipsoid_contains_offset_curve():
    e = Ellipsoid([0.5, -0.2], [[4.0, 1.0], [1.0, 2.0]])
    big = inflate_ellipsoid(e, 0.15)
    pts = e.boundary(400)
    n = (pts - e.center) @ e.P
    n /= np.linalg.norm(n, axis=1)[:, None]
    assert np.all(big.quad(pts + 0.15 * n) <= 1 + 1e-9)


def test_polygon_rejects_self_intersection():
    with pytest.raises(DegenerateGeometryError):
        Polygon([[0, 0], [1, 1], [1, 0], [0, 1]])


# -- predicates ---------------------------------------------------------------

def test_contains_cases():
    e = Ellipsoid.circle([0, 0], 1.0)
    assert contains(e, [0, 0])
    assert not contains(e, [2, 0])
    for p in axis_endpoints(e):
        assert contains(e, p)


def test_segment_intersects_cases():
    e = Ellipsoid.circle([0, 0], 1.0)
    assert segment_intersects(e, [-3, 0], [3, 0])
    assert not segment_intersects(e, [-3, 2], [3, 2])
    assert segment_intersects(e, [0.2, 0.1], [5, 5])
    with pytest.raises(ValueError):
        segment_intersects(e, [1, 1], [1, 1])


def test_vectorized_segment_test_agrees_with_scalar():
    rng = np.random.default_rng(3)
    es = [Ellipsoid(rng.normal(size=2), np.diag(rng.uniform(0.5, 4, 2))) for _ in range(4)]
    A, B = rng.uniform(-3, 3, (60, 2)), rng.uniform(-3, 3, (60, 2))
    got = segments_intersect([e.center for e in es], [e.P for e in es], A, B)
    want = np.array([[segment_intersects(e, a, b) for e in es] for a, b in zip(A, B)])
    np.testing.assert_array_equal(got, want)


def test_distance_to_circle_matches_closed_form():
    e = Ellipsoid.circle([1.0, 2.0], 0.5)
    assert distance_to(e, [4.0, 6.0]) == pytest.approx(5.0 - 0.5, abs=1e-8)
    assert distance_to(e, [1.1, 2.0]) == 0.0
    assert ball_intersects(e, [2.0, 2.0], 0.51) and not ball_intersects(e, [2.0, 2.0], 0.49)


# -- axis endpoints -----------------------------------------------------------

def test_axis_endpoints_by_hand():
    z1, z2, x1, x2 = axis_endpoints(Ellipsoid([0, 0], np.diag([0.25, 1.0])))
    assert {tuple(np.round(z1, 12)), tuple(np.round(z2, 12))} == {(2.0, 0.0), (-2.0, 0.0)}
    assert {tuple(np.round(x1, 12)), tuple(np.round(x2, 12))} == {(0.0, 1.0), (0.0, -1.0)}


def test_axis_endpoints_on_boundary_and_rotation_equivariant():
    e = Ellipsoid([0.3, -0.4], [[3.0, 0.8], [0.8, 1.2]])
    for p in axis_endpoints(e):
        assert e.quad(p) == pytest.approx(1.0, abs=1e-9)
    R = rotation(0.9)
    er = Ellipsoid(R @ e.center, R @ e.P @ R.T)
    got = np.array(axis_endpoints(er))
    want = np.array(axis_endpoints(e)) @ R.T
    for g in got:  # eigenvector signs may flip, so compare as sets
        assert np.min(np.linalg.norm(want - g, axis=1)) < 1e-9


# -- prediction ---------------------------------------------------------------

def test_predict_obstacle_cases():
    base = Ellipsoid([0.0, 0.0], np.diag([0.25, 1.0]))
    assert predict_obstacle(ObstacleTrack(base, [1.0, 0.0]), 0.0) is base
    moved = predict_obstacle(ObstacleTrack(base, [1.0, 0.0]), 2.0)
    np.testing.assert_allclose(moved.center, [2.0, 0.0])
    np.testing.assert_allclose(moved.P, base.P)
    turned = predict_obstacle(ObstacleTrack(base, rotation_rate=np.pi / 4), 2.0)
    np.testing.assert_allclose(turned.P, np.diag([1.0, 0.25]), atol=1e-12)
    with pytest.raises(ValueError):
        predict_obstacle(ObstacleTrack(base), -1.0)


def test_keyframed_track_interpolates_and_holds():
    shape = Ellipsoid([0, 0], np.eye(2) * 4)
    tr = ObstacleTrack(shape, keyframes=(Keyframe(0.0, (0.0, 0.0)), Keyframe(2.0, (2.0, 0.0))))
    np.testing.assert_allclose(tr.ellipsoid_at(1.0).center, [1.0, 0.0])
    np.testing.assert_allclose(tr.ellipsoid_at(5.0).center, [2.0, 0.0])
    np.testing.assert_allclose(tr.pose(1.0)[2], [1.0, 0.0])
    anchored = tr.at(1.0)
    np.testing.assert_allclose(predict_obstacle(anchored, 0.5).center, [1.5, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(-3, 3), st.floats(-2, 2),
       st.floats(-2, 2), st.floats(0, 10))
def test_prediction_preserves_eigenvalues(a, b, rate, vx, vy, dt):
    base = Ellipsoid([0.1, 0.2], rotation(0.3) @ np.diag([a, b]) @ rotation(0.3).T)
    out = predict_obstacle(ObstacleTrack(base, [vx, vy], rate), dt)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.P), np.linalg.eigvalsh(base.P), rtol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=4, max_size=12))
def test_mvee_contains_every_point(pts):
    X = np.array(pts)
    try:
        e = mvee(X)
    except DegenerateGeometryError:
        return
    assert np.all(e.quad(X) <= 1 + 1e-6)
