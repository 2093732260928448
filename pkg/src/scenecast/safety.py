"""Oriented-box geometry along trajectories and safety adjustment vectors.

The signed box distance is exact: positive separation comes from the closest
vertex-edge pair of two convex polygons, negative penetration from the
minimum translation over the four face normals. The adjustment vector moves
each trajectory step just far enough along the minimum-distance direction to
restore the safety margin theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .scene import AgentAnchor, EgoAnchor, Trajectory, normalize_heading


@dataclass(frozen=True)
class OrientedBox2D:
    """Rectangle given by center, (l/2, w/2) half extents along/across the
    heading, and a unit (sin psi, cos psi) heading."""

    center: np.ndarray
    half_extents: np.ndarray
    heading: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64).reshape(2))
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=np.float64).reshape(2)
        )
        object.__setattr__(self, "heading", np.asarray(self.heading, dtype=np.float64).reshape(2))
        if np.any(self.half_extents <= 0):
            raise ValueError("half extents must be positive")
        norm = math.hypot(self.heading[0], self.heading[1])
        if abs(norm - 1.0) > 1e-6:
            raise ValueError("box heading must be unit length")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit axes along the length and the width."""
        s, c = self.heading
        return np.array([c, s]), np.array([-s, c])

    def corners(self) -> np.ndarray:
        u, v = self.axes()
        hl, hw = self.half_extents
        return np.array(
            [
                self.center + hl * u + hw * v,
                self.center - hl * u + hw * v,
                self.center - hl * u - hw * v,
                self.center + hl * u - hw * v,
            ]
        )


@dataclass(frozen=True)
class AdjustmentVector:
    """Per-step 2D displacements restoring safety margins, shape (T, 2)."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != 2:
            raise ValueError(f"adjustment must be (T, 2), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("adjustment entries must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)


@dataclass(frozen=True)
class SafetyConfig:
    theta: float = 0.5
    max_resolve_iters: int = 3
    adjustment_cap: float = 2.0

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.max_resolve_iters < 1:
            raise ValueError("need at least one resolve iteration")
        if self.adjustment_cap <= 0:
            raise ValueError("adjustment cap must be positive")


def obb_of(
    anchor: Union[AgentAnchor, EgoAnchor],
    center_override: Optional[np.ndarray] = None,
    heading_override: Optional[np.ndarray] = None,
) -> OrientedBox2D:
    """The anchor's footprint rectangle, optionally re-posed."""
    center = anchor.center[:2] if center_override is None else np.asarray(center_override)
    heading = anchor.heading if heading_override is None else np.asarray(heading_override)
    w, l = anchor.size[0], anchor.size[1]
    return OrientedBox2D(center=center, half_extents=np.array([l / 2, w / 2]), heading=heading)


def _point_segment_closest(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom < 1e-18 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return a + t * ab


def _penetration(a: OrientedBox2D, b: OrientedBox2D) -> tuple[float, np.ndarray]:
    """Minimum translation depth and its direction (pushes a away from b)."""
    best_depth = math.inf
    best_dir = np.array([1.0, 0.0])
    for axis in (*a.axes(), *b.axes()):
        pa = a.corners() @ axis
        pb = b.corners() @ axis
        push_pos = pb.max() - pa.min()  # move a along +axis to separate
        push_neg = pa.max() - pb.min()  # move a along -axis
        if push_pos <= push_neg:
            depth, direction = push_pos, axis
        else:
            depth, direction = push_neg, -axis
        if depth < best_depth:
            best_depth = depth
            best_dir = direction
    return best_depth, best_dir


def min_distance_vector(a: OrientedBox2D, b: OrientedBox2D) -> tuple[float, np.ndarray]:
    """Signed distance between two boxes and a unit direction from b toward a.

    Positive distance is the Euclidean gap; negative is the minimum
    translation depth when the boxes overlap.
    """
    ca, cb = a.corners(), b.corners()
    overlapping = True
    for axis in (*a.axes(), *b.axes()):
        pa, pb = ca @ axis, cb @ axis
        if min(pa.max(), pb.max()) < max(pa.min(), pb.min()):
            overlapping = False
            break
    if overlapping:
        depth, direction = _penetration(a, b)
        return -depth, direction

    best = math.inf
    best_pa = best_pb = None
    for corners, other, flipped in ((ca, cb, False), (cb, ca, True)):
        for p in corners:
            for i in range(4):
                q = _point_segment_closest(p, other[i], other[(i + 1) % 4])
                d = float(np.linalg.norm(p - q))
                if d < best:
                    best = d
                    best_pa, best_pb = (q, p) if flipped else (p, q)
    if best < 1e-12:
        _, direction = _penetration(a, b)
        return 0.0, direction
    return best, (best_pa - best_pb) / best


def box_along(
    anchor: Union[AgentAnchor, EgoAnchor], trajectory: Trajectory, t: int
) -> OrientedBox2D:
    """The anchor's box at trajectory step t (1-based, absolute waypoints).

    Heading follows the step direction; steps shorter than 1e-6 m keep the
    anchor's current heading.
    """
    if not 1 <= t <= len(trajectory):
        raise ValueError(f"step {t} outside 1..{len(trajectory)}")
    current = trajectory.waypoints[t - 1]
    prev = trajectory.waypoints[t - 2] if t >= 2 else anchor.center[:2]
    disp = current - prev
    if np.linalg.norm(disp) < 1e-6:
        heading = anchor.heading
    else:
        heading = np.array(normalize_heading(disp[1], disp[0]))
    return obb_of(anchor, center_override=current, heading_override=heading)


def collision_detect(
    ego_traj: Trajectory,
    ego_anchor: EgoAnchor,
    agents: Sequence[AgentAnchor],
    agent_trajs: Sequence[Trajectory],
) -> list[bool]:
    """Per-step box overlap between the ego and any agent (theta = 0)."""
    if len(agents) != len(agent_trajs):
        raise ValueError("agents and trajectories must pair up")
    flags = []
    for t in range(1, len(ego_traj) + 1):
        ego_box = box_along(ego_anchor, ego_traj, t)
        hit = False
        for anchor, traj in zip(agents, agent_trajs):
            dist, _ = min_distance_vector(ego_box, box_along(anchor, traj, t))
            if dist < 0.0:
                hit = True
                break
        flags.append(hit)
    return flags


def _ego_box_at(ego_anchor, waypoints, t, origin=None):
    current = waypoints[t - 1]
    if t >= 2:
        prev = waypoints[t - 2]
    else:
        prev = ego_anchor.center[:2] if origin is None else origin
    disp = current - prev
    if np.linalg.norm(disp) < 1e-6:
        heading = ego_anchor.heading
    else:
        heading = np.array(normalize_heading(disp[1], disp[0]))
    return obb_of(ego_anchor, center_override=current, heading_override=heading)


def safety_adjustment(
    ego_traj: Trajectory,
    agents: Sequence[AgentAnchor],
    agent_trajs: Sequence[Trajectory],
    config: SafetyConfig,
    ego_anchor: EgoAnchor,
    ego_position: Optional[np.ndarray] = None,
) -> AdjustmentVector:
    """Minimal per-step perturbation keeping the ego at least theta away
    from every agent box.

    Steps are processed in order on a working copy of the trajectory, so the
    ego box geometry seen here is exactly what a recomputation on the
    adjusted trajectory would see: the worst violator is resolved along its
    minimum-distance direction, all agents are re-checked, and this repeats
    up to max_resolve_iters times. Step magnitudes are clamped to
    adjustment_cap; unresolved residue shows up as a positive cost and a
    collision flag downstream. ego_position overrides the ego's current
    location (defaults to the anchor center) for translated scenes.
    """
    if len(agents) != len(agent_trajs):
        raise ValueError("agents and trajectories must pair up")
    origin = ego_anchor.center[:2] if ego_position is None else np.asarray(ego_position)
    steps = len(ego_traj)
    working = ego_traj.waypoints.copy()
    adjust = np.zeros((steps, 2))
    if not agents:
        return AdjustmentVector(adjust)
    for t in range(1, steps + 1):
        agent_boxes = [box_along(a, traj, t) for a, traj in zip(agents, agent_trajs)]

        def worst(step_adjust):
            probe = working.copy()
            probe[t - 1] = ego_traj.waypoints[t - 1] + step_adjust
            ego_box = _ego_box_at(ego_anchor, probe, t, origin)
            dist, direction = math.inf, None
            for box in agent_boxes:
                d, u = min_distance_vector(ego_box, box)
                if d < dist:
                    dist, direction = d, u
            return dist, direction

        resolutions = 0
        while True:
            worst_dist, worst_dir = worst(adjust[t - 1])
            if worst_dist >= config.theta or resolutions >= config.max_resolve_iters:
                break
            candidate = _resolve_along(
                worst, adjust[t - 1], worst_dir, worst_dist, config
            )
            if np.allclose(candidate, adjust[t - 1], atol=1e-12):
                break  # clamp saturated, no further progress possible
            adjust[t - 1] = candidate
            working[t - 1] = ego_traj.waypoints[t - 1] + adjust[t - 1]
            resolutions += 1
    return AdjustmentVector(adjust)


def _resolve_along(worst, base, direction, dist0, config: SafetyConfig):
    """Smallest move along `direction` that restores the theta margin
    against the current worst violator set.

    The flat-geometry guess (theta - d) is exact when the box translates
    rigidly; when the step heading rotates with the adjusted waypoint the
    clearance responds nonlinearly, so bracket and bisect. Capped at
    adjustment_cap total magnitude.
    """

    def clearance(s):
        return worst(base + s * direction)[0] - config.theta

    # largest step keeping |base + s*dir| <= cap
    b_dot_d = float(base @ direction)
    disc = b_dot_d**2 + config.adjustment_cap**2 - float(base @ base)
    s_cap = -b_dot_d + math.sqrt(max(disc, 0.0))
    if s_cap <= 1e-12:
        return base
    guess = min(config.theta - dist0, s_cap)
    lo, hi = 0.0, guess
    for _ in range(20):
        if clearance(hi) >= 0.0 or hi >= s_cap:
            break
        lo, hi = hi, min(hi * 1.5 + 1e-6, s_cap)
    if clearance(hi) < 0.0:
        return base + s_cap * direction  # clamped, violation remains
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if clearance(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12:
            break
    return base + hi * direction


def adjustment_cost(v: AdjustmentVector) -> float:
    """Mean L2 norm of the nonzero adjustment steps; zero when all steps
    are zero (the 0/0 case is defined as 0)."""
    norms = v.norms()
    nonzero = norms[norms != 0.0]
    if nonzero.size == 0:
        return 0.0
    return float(nonzero.sum() / nonzero.size)


def apply_adjustment(trajectory: Trajectory, v: AdjustmentVector) -> Trajectory:
    if v.values.shape[0] != len(trajectory):
        raise ValueError("adjustment length must match the trajectory")
    return Trajectory(trajectory.waypoints + v.values, trajectory.dt)
