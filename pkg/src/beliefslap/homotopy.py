"""Initial trajectories in distinct homotopy classes.

Candidate paths come from a visibility graph whose nodes are the axis
endpoints of the obstacle ellipses.  Paths are told apart by a crossing word:
every obstacle casts a vertical ray upward from its center, and the word lists
the signed ray crossings in path order with adjacent inverse pairs cancelled.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import DiscretizationError, NoPathError, SlapError
from .geometry import axis_endpoints, contains, segments_intersect


class InsideObstacleError(SlapError, ValueError):
    pass


@dataclass(frozen=True)
class PathSignature:
    word: tuple = ()

    def __str__(self):
        if not self.word:
            return "e"
        return " ".join(f"o{i + 1}" if s > 0 else f"o{i + 1}^-1" for i, s in self.word)

    def __len__(self):
        return len(self.word)

    @property
    def is_looped(self):
        """A letter repeats, i.e. the path winds around some obstacle."""
        idx = [i for i, _ in self.word]
        return len(idx) != len(set(idx))


def signature(path, obstacles) -> PathSignature:
    path = np.asarray(path, dtype=float)[:, :2]
    centers = np.array([e.center for e in obstacles]).reshape(-1, 2)
    letters = []
    for a, b in zip(path[:-1], path[1:]):
        hits = []
        side_a = a[0] >= centers[:, 0]
        side_b = b[0] >= centers[:, 0]
        for i in np.flatnonzero(side_a != side_b):
            s = (centers[i, 0] - a[0]) / (b[0] - a[0])
            y = a[1] + s * (b[1] - a[1])
            if y > centers[i, 1]:
                hits.append((s, int(i), 1 if side_b[i] else -1))
        letters.extend((i, sgn) for _, i, sgn in sorted(hits))
    stack = []
    for letter in letters:
        if stack and stack[-1][0] == letter[0] and stack[-1][1] == -letter[1]:
            stack.pop()
        else:
            stack.append(letter)
    return PathSignature(tuple(stack))


@dataclass
class VisibilityGraph:
    graph: nx.Graph
    positions: dict
    owner: dict
    obstacles: list

    def path_points(self, nodes):
        return np.array([self.positions[n] for n in nodes])


def build_visibility_graph(start, goal, obstacles, margin=0.05, core_scale=0.5) -> VisibilityGraph:
    """Visibility graph over ellipse axis endpoints pushed outward by ``margin``.

    An edge touching a node ignores that node's own ellipse except for its
    inner core (the ellipse scaled by ``core_scale``), which keeps edges from
    cutting straight through an obstacle.
    """
    start = np.asarray(start, dtype=float)[:2]
    goal = np.asarray(goal, dtype=float)[:2]
    obstacles = list(obstacles)
    for name, pt in (("start", start), ("goal", goal)):
        for e in obstacles:
            if contains(e, pt):
                raise InsideObstacleError(f"{name} {pt.tolist()} lies inside an obstacle")
    positions = {"start": start, "goal": goal}
    owner = {"start": None, "goal": None}
    for i, e in enumerate(obstacles):
        for k, pt in enumerate(axis_endpoints(e)):
            direction = pt - e.center
            node = pt + margin * direction / np.linalg.norm(direction)
            if any(contains(o, node) for j, o in enumerate(obstacles) if j != i):
                continue
            positions[(i, k)] = node
            owner[(i, k)] = i
    names = list(positions)
    pairs = [(a, b) for a, b in itertools.combinations(names, 2)
             if not np.allclose(positions[a], positions[b])]
    G = nx.Graph()
    G.add_nodes_from(names)
    if pairs and obstacles:
        A = np.array([positions[a] for a, _ in pairs])
        B = np.array([positions[b] for _, b in pairs])
        centers = np.array([e.center for e in obstacles])
        Ps = np.array([e.P for e in obstacles])
        full = segments_intersect(centers, Ps, A, B)
        core = segments_intersect(centers, Ps / core_scale ** 2, A, B)
        own = np.zeros_like(full)
        for k, (a, b) in enumerate(pairs):
            for n in (a, b):
                if owner[n] is not None:
                    own[k, owner[n]] = True
        blocked = np.where(own, core, full).any(axis=1)
    else:
        blocked = np.zeros(len(pairs), dtype=bool)
    for (a, b), bad in zip(pairs, blocked):
        if not bad:
            G.add_edge(a, b, length=float(np.linalg.norm(positions[b] - positions[a])))
    return VisibilityGraph(G, positions, owner, obstacles)


@dataclass
class CandidatePath:
    nodes: list
    points: np.ndarray
    signature: PathSignature
    length: float


def enumerate_paths(g: VisibilityGraph, k=None, max_candidates=400):
    """Up to k shortest non-looped paths, one per distinct crossing word."""
    if k is None:
        k = min(2 ** len(g.obstacles), 8)
    try:
        gen = nx.shortest_simple_paths(g.graph, "start", "goal", weight="length")
        found = {}
        for n, nodes in enumerate(gen):
            if n >= max_candidates or len(found) >= k:
                break
            pts = g.path_points(nodes)
            sig = signature(pts, g.obstacles)
            if sig.is_looped or sig in found:
                continue
            length = float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
            found[sig] = CandidatePath(list(nodes), pts, sig, length)
    except (nx.NetworkXNoPath, nx.NodeNotFound) as exc:
        raise NoPathError("start and goal are not connected") from exc
    if not found:
        raise NoPathError("no non-looped path between start and goal")
    return sorted(found.values(), key=lambda c: c.length)


@dataclass
class InitialTrajectory:
    waypoints: np.ndarray
    controls: np.ndarray
    signature: PathSignature | None = None

    @property
    def K(self):
        return self.controls.shape[0]


def resample_polyline(path, n_points):
    """n_points equally spaced (by arc length) along a polyline."""
    path = np.asarray(path, dtype=float)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(path[:1], n_points, axis=0)
    keep = np.concatenate([[True], seg > 0])
    targets = np.linspace(0.0, s[-1], n_points)
    return np.stack([np.interp(targets, s[keep], path[keep, j]) for j in range(path.shape[1])], axis=1)


def path_length(path):
    path = np.asarray(path, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(path[:, :2], axis=0), axis=1)))


def auto_horizon(length, process, slack=1.3, min_horizon=1):
    steps = int(np.ceil(length / (process.max_speed * process.dt)))
    return max(min_horizon, int(np.ceil(max(steps, 1) * slack)))


def discretize(path, process, K=None, start_state=None, goal_state=None, slack=1.3,
               obstacles=None, max_horizon=10000) -> InitialTrajectory:
    """Resample a planar path into K+1 waypoints and matching warm-start controls.

    Extra state coordinates (heading) are interpolated linearly between the
    start and goal states.  With K unset it is chosen from the path length and
    raised until no step needs more than the saturation bound.
    """
    path = np.asarray(path, dtype=float)[:, :2]
    n_x = process.n_x
    start = np.zeros(n_x) if start_state is None else np.asarray(start_state, dtype=float)
    goal = start.copy() if goal_state is None else np.asarray(goal_state, dtype=float)
    start = start.copy()
    start[:2] = path[0]
    extra = process.state_difference(goal, start)[2:]
    fixed = K is not None
    if K is None:
        K = auto_horizon(path_length(path), process, slack)
    while True:
        pts = resample_polyline(path, K + 1)
        W = np.empty((K + 1, n_x))
        W[:, :2] = pts
        if n_x > 2:
            W[:, 2:] = start[2:] + np.linspace(0.0, 1.0, K + 1)[:, None] * extra
        U = process.controls_for_displacement(np.diff(W, axis=0))
        norms = np.linalg.norm(U, axis=1)
        if np.all(norms <= process.max_u * (1 + 1e-9)):
            break
        if fixed or K >= max_horizon:
            raise DiscretizationError(
                f"path needs |u| = {norms.max():.3g} > max_u = {process.max_u} with K = {K}")
        K = int(np.ceil(K * 1.1))
    sig = signature(W, obstacles) if obstacles else None
    return InitialTrajectory(W, U, sig)
