"""Sampling-based motion planning in (x, y, z, yaw).

RRT returns the first feasible path; RRT* keeps rewiring for the whole
iteration budget and is the mission default (asymptotically optimal in
path length); PRM* builds a k-nearest roadmap with k growing as log n and
validates edges lazily during the shortest-path search.

EST, SPL, LBKPIECE, PRM and BKPIECE are deliberately absent: in the source
experiments they failed to produce solutions for this class of problem, so
only the three algorithms that solved it are implemented.

Determinism: every planner consumes a dedicated seeded generator, and the
time budget is converted to an iteration budget through a fixed
iterations-per-second constant, so equal (problem, seed) inputs give equal
paths regardless of host speed. A wall-clock safety stop at ten times the
budget guards against pathological inputs only.

Distance metric: Euclidean position distance plus 0.3 * |wrapped yaw
difference|. Collision checking uses the conservative axis-aligned bound
of the yaw-rotated body box; unknown voxels are obstacles.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .geometry import Aabb, Pose, wrap_angle
from .mapping import MapSnapshot
from .vehicle import BodyBox, VelocityCommand

ALGORITHMS = ("RRT", "RRT_STAR", "PRM_STAR")


class NoFeasiblePlan(RuntimeError):
    """No path found within the iteration/time budget."""

    def __init__(self, iterations: int, message: str = "no feasible motion plan"):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


@dataclass(frozen=True)
class PlanningProblem:
    start: Pose
    goal: Pose
    bounds: Aabb
    body: BodyBox
    map: MapSnapshot
    goal_tolerance: float = 0.1


DEFAULT_LIMITS = {"max_segment": 0.5, "max_yaw_step": 0.5}


@dataclass(frozen=True)
class PlannerConfig:
    algorithm: str = "RRT_STAR"
    step_size: float = 0.3
    goal_bias: float = 0.05
    time_budget: float = 2.0
    max_iterations: int = 100_000
    rewire_radius_factor: float | None = None  # gamma; derived from bounds if None
    seed: int = 0
    yaw_weight: float = 0.3
    edge_resolution: float = 0.05
    iterations_per_second: float = 2000.0
    # returned waypoints are densified to stay inside these steps
    waypoint_spacing: float = 0.45
    waypoint_yaw_spacing: float = 0.45
    # the planner checks an inflated body so edge-probe gaps (position and
    # yaw-driven AABB growth between probes) can never hide a true contact
    planning_margin: float = 0.06

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 <= self.goal_bias <= 0.5:
            raise ValueError("goal_bias must lie in [0, 0.5]")
        if self.time_budget <= 0:
            raise ValueError("time_budget must be positive")

    def iteration_budget(self) -> int:
        return min(self.max_iterations,
                   max(1, int(self.time_budget * self.iterations_per_second)))


@dataclass(frozen=True)
class Path:
    waypoints: list          # list of Pose
    length: float            # sum of Euclidean segment norms
    planner: str
    planning_time: float

    def as_dict(self):
        return {
            "planner": self.planner,
            "length": self.length,
            "waypoints": [{"x": p.position[0], "y": p.position[1],
                           "z": p.position[2], "yaw": p.yaw}
                          for p in self.waypoints],
        }


@dataclass(frozen=True)
class ValidityReport:
    collision_free: bool
    max_segment: float
    max_yaw_step: float
    within_constraints: bool


def euclidean_length(states: np.ndarray) -> float:
    if len(states) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(states[:, :3], axis=0), axis=1).sum())


def collides(pose, body: BodyBox, snap: MapSnapshot) -> bool:
    """Body box (conservative axis-aligned bound) against occupied|unknown."""
    position, yaw = _pose_parts(pose)
    lo, hi = body.world_aabb(position, yaw)
    return snap.box_blocked(lo, hi)


def _pose_parts(pose):
    if isinstance(pose, Pose):
        return pose.position, pose.yaw
    arr = np.asarray(pose, dtype=float)
    return arr[:3], float(arr[3]) if arr.shape[0] > 3 else 0.0


def _states_collide(states: np.ndarray, body: BodyBox, snap: MapSnapshot) -> np.ndarray:
    """Vectorized collision test for (N, 4) state rows."""
    hx, hy, hz = body.half_extents
    c = np.abs(np.cos(states[:, 3]))
    s = np.abs(np.sin(states[:, 3]))
    half = np.stack([hx * c + hy * s, hx * s + hy * c,
                     np.full(len(states), hz)], axis=1)
    return snap.box_blocked_many(states[:, :3] - half, states[:, :3] + half)


def _interpolate_states(a: np.ndarray, b: np.ndarray, resolution: float) -> np.ndarray:
    dyaw = wrap_angle(b[3] - a[3])
    span = max(float(np.linalg.norm(b[:3] - a[:3])), 0.3 * abs(dyaw))
    n = max(2, int(math.ceil(span / resolution)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    states = np.empty((n, 4))
    states[:, :3] = a[None, :3] + ts[:, None] * (b[:3] - a[:3])[None, :]
    states[:, 3] = wrap_angle(a[3] + ts * dyaw)
    return states


def segment_valid(p1, p2, body: BodyBox, snap: MapSnapshot,
                  resolution: float = 0.05) -> bool:
    """Collision check at interpolated poses spaced <= resolution apart."""
    a = _as_state(p1)
    b = _as_state(p2)
    states = _interpolate_states(a, b, resolution)
    return not bool(_states_collide(states, body, snap).any())


def _as_state(pose) -> np.ndarray:
    if isinstance(pose, Pose):
        return np.array([*pose.position, pose.yaw])
    return np.asarray(pose, dtype=float)


class _Metric:
    def __init__(self, yaw_weight: float):
        self.w = yaw_weight

    def one(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.linalg.norm(a[:3] - b[:3])
                     + self.w * abs(wrap_angle(a[3] - b[3])))

    def many(self, arr: np.ndarray, q: np.ndarray) -> np.ndarray:
        return (np.linalg.norm(arr[:, :3] - q[None, :3], axis=1)
                + self.w * np.abs(wrap_angle(arr[:, 3] - q[3])))


def _sample_state(rng: np.random.Generator, bounds: Aabb) -> np.ndarray:
    p = rng.uniform(bounds.lo, bounds.hi)
    yaw = rng.uniform(-np.pi, np.pi)
    return np.array([p[0], p[1], p[2], yaw])


def _steer(a: np.ndarray, b: np.ndarray, step: float, metric: _Metric) -> np.ndarray:
    d = metric.one(a, b)
    if d <= step:
        return b.copy()
    t = step / d
    out = a + t * (b - a)
    out[3] = wrap_angle(a[3] + t * wrap_angle(b[3] - a[3]))
    return out


def _gamma(bounds: Aabb, yaw_weight: float) -> float:
    # standard asymptotic-optimality form: gamma scales with the 4th root of
    # the free-space measure of the (x, y, z, yaw)-cylinder state space
    measure = float(np.prod(bounds.size)) * 2.0 * np.pi * yaw_weight
    return 2.6 * measure ** 0.25


def _densify(way: np.ndarray, max_len: float, max_yaw: float) -> np.ndarray:
    """Split segments so no waypoint step exceeds the limits.

    Pure reparameterization along the already collision-checked segments;
    the geometry and Euclidean length are unchanged.
    """
    out = [way[0]]
    for a, b in zip(way[:-1], way[1:]):
        seg = float(np.linalg.norm(b[:3] - a[:3]))
        dyaw = abs(float(wrap_angle(b[3] - a[3])))
        n = max(1, int(math.ceil(seg / max_len)), int(math.ceil(dyaw / max_yaw)))
        for k in range(1, n + 1):
            t = k / n
            p = a[:3] + t * (b[:3] - a[:3])
            yaw = wrap_angle(a[3] + t * wrap_angle(b[3] - a[3]))
            out.append(np.array([p[0], p[1], p[2], yaw]))
    return np.array(out)


def _path_from_states(way: np.ndarray, planner: str, dt: float,
                      cfg: PlannerConfig) -> Path:
    way = _densify(way, cfg.waypoint_spacing, cfg.waypoint_yaw_spacing)
    waypoints = [Pose(row[:3].copy(), row[3]) for row in way]
    return Path(waypoints, euclidean_length(way), planner, dt)


def _tree_states(states, parents, leaf: int) -> np.ndarray:
    idx = []
    k = leaf
    while k != -1:
        idx.append(k)
        k = parents[k]
    idx.reverse()
    return np.array([states[i] for i in idx])


def _rrt(problem: PlanningProblem, cfg: PlannerConfig, optimal: bool):
    rng = np.random.default_rng(cfg.seed)
    metric = _Metric(cfg.yaw_weight)
    start = _as_state(problem.start)
    goal = _as_state(problem.goal)
    states = [start]
    parents = [-1]
    costs = [0.0]
    children = [set()]
    arr = np.zeros((1024, 4))
    arr[0] = start
    n = 1
    best_goal_leaf = -1
    best_goal_cost = math.inf
    gamma = cfg.rewire_radius_factor or _gamma(problem.bounds, cfg.yaw_weight)
    budget = cfg.iteration_budget()
    deadline = time.monotonic() + 10.0 * cfg.time_budget
    body, snap, res = problem.body, problem.map, cfg.edge_resolution

    def try_goal(i: int):
        nonlocal best_goal_leaf, best_goal_cost
        d_goal = metric.one(states[i], goal)
        if np.linalg.norm(states[i][:3] - goal[:3]) > problem.goal_tolerance:
            return
        total = costs[i] + d_goal
        if total < best_goal_cost and segment_valid(states[i], goal, body, snap, res):
            best_goal_cost = total
            best_goal_leaf = i

    it = 0
    for it in range(1, budget + 1):
        if it % 256 == 0 and time.monotonic() > deadline:
            break
        target = goal if rng.random() < cfg.goal_bias else _sample_state(rng, problem.bounds)
        dists = metric.many(arr[:n], target)
        near_i = int(np.argmin(dists))
        new = _steer(arr[near_i], target, cfg.step_size, metric)
        if _states_collide(new[None, :], body, snap)[0]:
            continue
        if not segment_valid(arr[near_i], new, body, snap, res):
            continue

        parent = near_i
        cost_new = costs[near_i] + metric.one(arr[near_i], new)
        near_set = None
        if optimal:
            radius = min(gamma * (math.log(n + 1) / (n + 1)) ** 0.25,
                         4.0 * cfg.step_size)
            d_all = metric.many(arr[:n], new)
            near_set = np.flatnonzero(d_all <= radius)
            for j in near_set:
                c = costs[j] + d_all[j]
                if c < cost_new and segment_valid(arr[j], new, body, snap, res):
                    parent, cost_new = int(j), c

        states.append(new)
        parents.append(parent)
        costs.append(cost_new)
        children.append(set())
        children[parent].add(n)
        if n == len(arr):
            arr = np.vstack([arr, np.zeros_like(arr)])
        arr[n] = new
        i_new = n
        n += 1

        if optimal and near_set is not None:
            d_all_new = metric.many(arr[:n - 1], new)
            for j in near_set:
                c = cost_new + d_all_new[j]
                if c + 1e-12 < costs[j] and segment_valid(new, arr[j], body, snap, res):
                    children[parents[j]].discard(int(j))
                    parents[j] = i_new
                    children[i_new].add(int(j))
                    _propagate_costs(int(j), costs[j] - c, children, costs)
                    costs[j] = c

        try_goal(i_new)
        if best_goal_leaf >= 0 and not optimal:
            break

    if best_goal_leaf < 0:
        raise NoFeasiblePlan(it)
    # re-derive the best leaf after rewiring may have lowered other branches
    if optimal:
        for i in range(n):
            d_goal = np.linalg.norm(states[i][:3] - goal[:3])
            if d_goal <= problem.goal_tolerance:
                total = costs[i] + metric.one(states[i], goal)
                if total < best_goal_cost and segment_valid(states[i], goal, body, snap, res):
                    best_goal_cost = total
                    best_goal_leaf = i
    states.append(goal)
    parents.append(best_goal_leaf)
    return states, parents, len(states) - 1, it


def _propagate_costs(root: int, saving: float, children, costs):
    # descendant cost fixup after a rewire
    stack = list(children[root])
    while stack:
        k = stack.pop()
        costs[k] -= saving
        stack.extend(children[k])


def _prm_star(problem: PlanningProblem, cfg: PlannerConfig):
    rng = np.random.default_rng(cfg.seed)
    metric = _Metric(cfg.yaw_weight)
    start = _as_state(problem.start)
    goal = _as_state(problem.goal)
    budget = cfg.iteration_budget()
    n_samples = max(50, budget // 4)

    samples = [start, goal]
    tries = 0
    while len(samples) < n_samples + 2 and tries < budget * 4:
        tries += 1
        s = _sample_state(rng, problem.bounds)
        if not _states_collide(s[None, :], problem.body, problem.map)[0]:
            samples.append(s)
    arr = np.array(samples)
    n = len(arr)
    k = max(4, int(math.ceil(3.4 * math.log(n))))

    neighbors = []
    for i in range(n):
        d = metric.many(arr, arr[i])
        order = np.argsort(d, kind="stable")
        neighbors.append(set(int(j) for j in order[1:k + 1]))
    for i in range(n):  # undirected roadmap
        for j in neighbors[i]:
            neighbors[j].add(i)
    neighbors = [sorted(s) for s in neighbors]

    # lazy shortest path: edges validated the first time the search relaxes them
    edge_ok: dict = {}

    def valid_edge(i: int, j: int) -> bool:
        key = (i, j) if i < j else (j, i)
        hit = edge_ok.get(key)
        if hit is None:
            hit = segment_valid(arr[i], arr[j], problem.body, problem.map,
                                cfg.edge_resolution)
            edge_ok[key] = hit
        return hit

    dist = np.full(n, math.inf)
    prev = np.full(n, -1, dtype=np.int64)
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d_u, u = heappop(heap)
        if d_u > dist[u] + 1e-12:
            continue
        if u == 1:
            break
        for v in neighbors[u]:
            w = metric.one(arr[u], arr[v])
            nd = d_u + w
            if nd + 1e-12 < dist[v] and valid_edge(u, v):
                dist[v] = nd
                prev[v] = u
                heappush(heap, (nd, v))

    if not math.isfinite(dist[1]):
        raise NoFeasiblePlan(n_samples)
    idx = []
    k_ = 1
    while k_ != -1:
        idx.append(k_)
        k_ = int(prev[k_])
    idx.reverse()
    return arr, idx, n_samples


def plan(problem: PlanningProblem, cfg: PlannerConfig) -> Path:
    """Plan start -> goal; raises NoFeasiblePlan when the budget runs out."""
    t0 = time.monotonic()
    start = _as_state(problem.start)
    goal = _as_state(problem.goal)
    if not problem.bounds.contains(start[:3]):
        raise ValueError("start outside planning bounds")
    if not problem.bounds.contains(goal[:3]):
        raise ValueError("goal outside planning bounds")
    if cfg.planning_margin > 0:
        from dataclasses import replace
        problem = replace(problem, body=BodyBox(
            problem.body.half_extents + cfg.planning_margin))
    if _states_collide(start[None, :], problem.body, problem.map)[0]:
        raise ValueError("start pose is in collision")
    if _states_collide(goal[None, :], problem.body, problem.map)[0]:
        raise NoFeasiblePlan(0, "goal pose is in collision")

    metric = _Metric(cfg.yaw_weight)
    if metric.one(start, goal) < 1e-12:
        return Path([Pose(start[:3].copy(), start[3])], 0.0, cfg.algorithm,
                    time.monotonic() - t0)

    if cfg.algorithm == "PRM_STAR":
        arr, idx, iterations = _prm_star(problem, cfg)
        way = np.array([arr[i] for i in idx])
        return _path_from_states(way, cfg.algorithm, time.monotonic() - t0, cfg)

    states, parents, leaf, iterations = _rrt(problem, cfg,
                                             optimal=cfg.algorithm == "RRT_STAR")
    return _path_from_states(_tree_states(states, parents, leaf),
                             cfg.algorithm, time.monotonic() - t0, cfg)


def validate(path: Path, limits: dict, body: BodyBox, snap: MapSnapshot,
             resolution: float = 0.01) -> ValidityReport:
    """Independent re-check: collisions at fine resolution plus step limits."""
    way = np.array([_as_state(p) for p in path.waypoints])
    if len(way) == 1:
        free = not bool(_states_collide(way, body, snap)[0])
        return ValidityReport(free, 0.0, 0.0, free)
    max_segment = 0.0
    max_yaw_step = 0.0
    collision_free = True
    for a, b in zip(way[:-1], way[1:]):
        max_segment = max(max_segment, float(np.linalg.norm(b[:3] - a[:3])))
        max_yaw_step = max(max_yaw_step, abs(float(wrap_angle(b[3] - a[3]))))
        states = _interpolate_states(a, b, resolution)
        if _states_collide(states, body, snap).any():
            collision_free = False
    within = (collision_free
              and max_segment <= limits.get("max_segment", math.inf)
              and max_yaw_step <= limits.get("max_yaw_step", math.inf))
    return ValidityReport(collision_free, max_segment, max_yaw_step, within)


def compare_planners(problem: PlanningProblem, configs, n_seeds: int) -> dict:
    """Run each algorithm over paired seeds; returns table rows + raw records.

    configs maps algorithm name -> PlannerConfig template; each run gets
    seed = template.seed + k so algorithms face identical seed sequences.
    """
    from dataclasses import replace

    records = []
    for name, template in configs.items():
        for k in range(n_seeds):
            cfg = replace(template, algorithm=name, seed=template.seed + k)
            t0 = time.monotonic()
            try:
                path = plan(problem, cfg)
                records.append({"algorithm": name, "seed": cfg.seed,
                                "success": True, "length": path.length,
                                "time": time.monotonic() - t0, "path": path})
            except NoFeasiblePlan as exc:
                records.append({"algorithm": name, "seed": cfg.seed,
                                "success": False, "length": math.nan,
                                "time": time.monotonic() - t0,
                                "iterations": exc.iterations})
    rows = []
    for name in configs:
        runs = [r for r in records if r["algorithm"] == name]
        ok = [r for r in runs if r["success"]]
        rows.append({
            "algorithm": name,
            "success_rate": len(ok) / len(runs) if runs else 0.0,
            "mean_length": float(np.mean([r["length"] for r in ok])) if ok else math.nan,
            "mean_time": float(np.mean([r["time"] for r in runs])) if runs else math.nan,
        })
    return {"rows": rows, "records": records}


def to_velocities(path: Path, v_max: float, yaw_rate_max: float):
    """One velocity command per path segment.

    Speed is capped at v_max; when the yaw gap needs more time than the
    translation, the duration extends and the linear speed drops so both
    finish together. Zero-length, zero-yaw segments are skipped.
    """
    if v_max <= 0 or yaw_rate_max <= 0:
        raise ValueError("v_max and yaw_rate_max must be positive")
    commands = []
    way = [_as_state(p) for p in path.waypoints]
    for a, b in zip(way[:-1], way[1:]):
        seg = b[:3] - a[:3]
        length = float(np.linalg.norm(seg))
        dyaw = float(wrap_angle(b[3] - a[3]))
        if length < 1e-12 and abs(dyaw) < 1e-12:
            continue
        duration = max(length / v_max, abs(dyaw) / yaw_rate_max)
        v = seg / duration
        commands.append(VelocityCommand(v, dyaw / duration, duration))
    return commands
