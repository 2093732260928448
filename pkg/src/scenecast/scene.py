"""Domain types for sparse driving scenes.

A scene at one timestep is an :class:`InstanceSet`: the ego anchor plus fixed
slot arrays of agent and map anchors, each optionally paired with a latent
feature vector. All anchors are expressed in that frame's ego coordinates.

Frame convention: X forward, Y left, Z up; the yaw angle psi is measured
counterclockwise from +X and stored as the pair (sin psi, cos psi).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateHeading

AGENT_CLASSES = ("vehicle", "pedestrian", "cyclist")
MAP_CLASSES = ("lane-divider", "boundary", "crossing")
STEERING_COMMANDS = ("left", "straight", "right")

# Desk-scale query budgets and fixed geometry widths. The production scale
# (900 agent / 100 map queries) is exercised only by the bench command.
DEFAULT_AGENT_SLOTS = 32
DEFAULT_MAP_SLOTS = 8
MAP_POINTS = 20
PLAN_STEPS = 6
PLAN_DT = 0.5

# Mean signed curvature beyond which a planned trajectory counts as turning.
STEERING_CURVATURE_THRESHOLD = 0.02


def _locked(values, shape) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite entries in {arr!r}")
    arr.flags.writeable = False
    return arr


def normalize_heading(sin_raw: float, cos_raw: float) -> tuple[float, float]:
    """Scale a raw (sin, cos) pair onto the unit circle.

    Raises DegenerateHeading when the input norm is below 1e-12.
    """
    norm = math.hypot(sin_raw, cos_raw)
    if norm < 1e-12:
        raise DegenerateHeading(f"heading norm {norm:g} below 1e-12")
    return sin_raw / norm, cos_raw / norm


def heading_angle(heading: Sequence[float]) -> float:
    """Yaw angle in radians from a (sin, cos) pair."""
    return math.atan2(heading[0], heading[1])


def heading_from_angle(psi: float) -> tuple[float, float]:
    return math.sin(psi), math.cos(psi)


def rot2(angle: float) -> np.ndarray:
    """Counterclockwise rotation matrix about the Z axis, restricted to XY."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Pose2:
    """A 2D rigid frame (position + yaw) expressed in some parent frame."""

    x: float
    y: float
    yaw: float

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def to_local(self, points: np.ndarray) -> np.ndarray:
        """Express parent-frame points (..., 2) in this frame."""
        pts = np.asarray(points, dtype=np.float64)
        return (pts - self.position) @ rot2(self.yaw)

    def to_parent(self, points: np.ndarray) -> np.ndarray:
        """Express local points (..., 2) in the parent frame."""
        pts = np.asarray(points, dtype=np.float64)
        return pts @ rot2(self.yaw).T + self.position

    def rotate_to_local(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ rot2(self.yaw)

    def rotate_to_parent(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ rot2(self.yaw).T


def _check_heading(heading: np.ndarray) -> None:
    norm_sq = float(heading[0] ** 2 + heading[1] ** 2)
    if abs(norm_sq - 1.0) > 1e-6:
        raise ValueError(f"heading {heading} is not unit length")


@dataclass(frozen=True)
class AgentAnchor:
    """Geometric state of one traffic participant in the emitting ego frame.

    center is (x, y, z) meters, size is (w, l, h) meters with l along the
    heading, heading is (sin psi, cos psi), velocity is (vx, vy, vz) m/s.
    """

    id: int
    center: np.ndarray
    size: np.ndarray
    heading: np.ndarray
    velocity: np.ndarray
    class_label: str
    existence: float

    def __post_init__(self):
        object.__setattr__(self, "center", _locked(self.center, (3,)))
        object.__setattr__(self, "size", _locked(self.size, (3,)))
        object.__setattr__(self, "heading", _locked(self.heading, (2,)))
        object.__setattr__(self, "velocity", _locked(self.velocity, (3,)))
        if np.any(self.size <= 0):
            raise ValueError(f"non-positive size {self.size}")
        _check_heading(self.heading)
        if self.class_label not in AGENT_CLASSES:
            raise ValueError(f"unknown agent class {self.class_label!r}")
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"existence {self.existence} outside [0, 1]")


@dataclass(frozen=True)
class EgoAnchor:
    """Ego vehicle state. In its own frame the pose is pinned to the origin."""

    size: np.ndarray
    velocity: np.ndarray
    angular_velocity: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "center", _locked(self.center, (3,)))
        object.__setattr__(self, "size", _locked(self.size, (3,)))
        object.__setattr__(self, "heading", _locked(self.heading, (2,)))
        object.__setattr__(self, "velocity", _locked(self.velocity, (3,)))
        if np.any(np.abs(self.center) > 1e-9):
            raise ValueError("ego center must be the origin of its own frame")
        if abs(self.heading[0]) > 1e-9 or abs(self.heading[1] - 1.0) > 1e-9:
            raise ValueError("ego heading must be (0, 1) in its own frame")
        if np.any(self.size <= 0):
            raise ValueError(f"non-positive size {self.size}")


@dataclass(frozen=True)
class MapAnchor:
    """A static map element as an ordered 2D polyline in the ego frame."""

    id: int
    points: np.ndarray
    class_label: str
    existence: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError(f"polyline must be (P>=2, 2), got {pts.shape}")
        object.__setattr__(self, "points", _locked(pts, pts.shape))
        gaps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if np.any(gaps <= 1e-9):
            raise ValueError("consecutive polyline points coincide")
        if self.class_label not in MAP_CLASSES:
            raise ValueError(f"unknown map class {self.class_label!r}")
        if not 0.0 <= self.existence <= 1.0:
            raise ValueError(f"existence {self.existence} outside [0, 1]")


@dataclass(frozen=True)
class InstanceFeature:
    """Latent feature vector attached to one instance."""

    embedding: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "embedding", _locked(emb, emb.shape))


AgentSlot = tuple[Optional[AgentAnchor], Optional[InstanceFeature]]
MapSlot = tuple[Optional[MapAnchor], Optional[InstanceFeature]]


@dataclass(frozen=True)
class InstanceSet:
    """One frame's sparse scene. Slot arrays have fixed length per run;
    a None anchor marks an empty slot."""

    frame_index: int
    ego: EgoAnchor
    agents: tuple[AgentSlot, ...]
    maps: tuple[MapSlot, ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(tuple(s) for s in self.agents))
        object.__setattr__(self, "maps", tuple(tuple(s) for s in self.maps))

    def agent_ids(self) -> tuple[Optional[int], ...]:
        return tuple(a.id if a is not None else None for a, _ in self.agents)

    def map_ids(self) -> tuple[Optional[int], ...]:
        return tuple(m.id if m is not None else None for m, _ in self.maps)

    def n_agents(self) -> int:
        return sum(1 for a, _ in self.agents if a is not None)


@dataclass(frozen=True)
class Trajectory:
    """T future waypoints, meters, in the emitting frame, one per dt step."""

    waypoints: np.ndarray
    dt: float

    def __post_init__(self):
        wps = np.asarray(self.waypoints, dtype=np.float64)
        if wps.ndim != 2 or wps.shape[1] != 2:
            raise ValueError(f"waypoints must be (T, 2), got {wps.shape}")
        object.__setattr__(self, "waypoints", _locked(wps, wps.shape))
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def __len__(self) -> int:
        return self.waypoints.shape[0]


@dataclass(frozen=True)
class MultiModalTrajectory:
    """K candidate trajectories with scalar scores; ties break to the lowest
    index, which np.argmax provides."""

    modes: tuple[Trajectory, ...]
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        scores = _locked(self.scores, (len(self.modes),))
        object.__setattr__(self, "scores", scores)
        if len(self.modes) < 1:
            raise ValueError("need at least one mode")

    def best_index(self) -> int:
        return int(np.argmax(self.scores))

    def best(self) -> Trajectory:
        return self.modes[self.best_index()]


@dataclass(frozen=True)
class ActionCondition:
    """Ego intent at one step: speed, planned trajectory, steering command."""

    speed: float
    planned_trajectory: Trajectory
    steering: str

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if self.steering not in STEERING_COMMANDS:
            raise ValueError(f"unknown steering {self.steering!r}")


@dataclass(frozen=True)
class RolloutConfig:
    """History length h, forecast horizon f, decoder window m (frames), dt."""

    h: int = 3
    f: int = 4
    m: int = 3
    dt: float = PLAN_DT

    def __post_init__(self):
        if self.h < 1 or self.f < 1:
            raise ValueError("h and f must be >= 1")
        if not 1 <= self.m <= self.h:
            raise ValueError("need 1 <= m <= h")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def mean_signed_curvature(waypoints: np.ndarray, prepend_origin: bool = True) -> float:
    """Mean signed Menger curvature over waypoint triples (1/m).

    Positive curvature bends left (+Y). Degenerate triples are skipped;
    returns 0.0 when no triple is usable.
    """
    pts = np.asarray(waypoints, dtype=np.float64)
    if prepend_origin:
        pts = np.vstack([np.zeros(2), pts])
    curvatures = []
    for i in range(len(pts) - 2):
        p0, p1, p2 = pts[i], pts[i + 1], pts[i + 2]
        a = p1 - p0
        b = p2 - p1
        c = p2 - p0
        la, lb, lc = np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(c)
        if la < 1e-9 or lb < 1e-9 or lc < 1e-9:
            continue
        cross = a[0] * b[1] - a[1] * b[0]
        curvatures.append(2.0 * cross / (la * lb * lc))
    if not curvatures:
        return 0.0
    return float(np.mean(curvatures))


def steering_from_trajectory(trajectory: Trajectory) -> str:
    """Classify a planned trajectory as left / straight / right by mean
    signed curvature with a +/-0.02 1/m dead band."""
    kappa = mean_signed_curvature(trajectory.waypoints)
    if kappa > STEERING_CURVATURE_THRESHOLD:
        return "left"
    if kappa < -STEERING_CURVATURE_THRESHOLD:
        return "right"
    return "straight"


# --- serialization ---------------------------------------------------------
#
# Scene logs are JSON lines, one InstanceSet per line:
#   {"frame_index": ..., "ego": {...}, "agents": [...], "maps": [...]}
# Reals keep full double precision through Python's repr-based json floats.


def _feature_to_json(feature: Optional[InstanceFeature]):
    return None if feature is None else feature.embedding.tolist()


def _feature_from_json(data) -> Optional[InstanceFeature]:
    return None if data is None else InstanceFeature(np.asarray(data))


def agent_to_dict(anchor: AgentAnchor) -> dict:
    return {
        "id": anchor.id,
        "center": anchor.center.tolist(),
        "size": anchor.size.tolist(),
        "heading": anchor.heading.tolist(),
        "velocity": anchor.velocity.tolist(),
        "class_label": anchor.class_label,
        "existence": anchor.existence,
    }


def agent_from_dict(data: dict) -> AgentAnchor:
    return AgentAnchor(
        id=int(data["id"]),
        center=np.asarray(data["center"]),
        size=np.asarray(data["size"]),
        heading=np.asarray(data["heading"]),
        velocity=np.asarray(data["velocity"]),
        class_label=data["class_label"],
        existence=float(data["existence"]),
    )


def ego_to_dict(ego: EgoAnchor) -> dict:
    return {
        "center": ego.center.tolist(),
        "size": ego.size.tolist(),
        "heading": ego.heading.tolist(),
        "velocity": ego.velocity.tolist(),
        "angular_velocity": ego.angular_velocity,
    }


def ego_from_dict(data: dict) -> EgoAnchor:
    return EgoAnchor(
        size=np.asarray(data["size"]),
        velocity=np.asarray(data["velocity"]),
        angular_velocity=float(data["angular_velocity"]),
        center=np.asarray(data["center"]),
        heading=np.asarray(data["heading"]),
    )


def map_to_dict(anchor: MapAnchor) -> dict:
    return {
        "id": anchor.id,
        "points": anchor.points.tolist(),
        "class_label": anchor.class_label,
        "existence": anchor.existence,
    }


def map_from_dict(data: dict) -> MapAnchor:
    return MapAnchor(
        id=int(data["id"]),
        points=np.asarray(data["points"]),
        class_label=data["class_label"],
        existence=float(data["existence"]),
    )


def instance_set_to_dict(frame: InstanceSet) -> dict:
    return {
        "frame_index": frame.frame_index,
        "ego": ego_to_dict(frame.ego),
        "agents": [
            None
            if anchor is None and feature is None
            else {
                "anchor": None if anchor is None else agent_to_dict(anchor),
                "feature": _feature_to_json(feature),
            }
            for anchor, feature in frame.agents
        ],
        "maps": [
            None
            if anchor is None and feature is None
            else {
                "anchor": None if anchor is None else map_to_dict(anchor),
                "feature": _feature_to_json(feature),
            }
            for anchor, feature in frame.maps
        ],
    }


def _slot_from_dict(data, anchor_from_dict):
    if data is None:
        return (None, None)
    anchor = data.get("anchor")
    return (
        None if anchor is None else anchor_from_dict(anchor),
        _feature_from_json(data.get("feature")),
    )


def instance_set_from_dict(data: dict) -> InstanceSet:
    return InstanceSet(
        frame_index=int(data["frame_index"]),
        ego=ego_from_dict(data["ego"]),
        agents=tuple(_slot_from_dict(s, agent_from_dict) for s in data["agents"]),
        maps=tuple(_slot_from_dict(s, map_from_dict) for s in data["maps"]),
    )


def write_scene_log(path, frames: Iterable[InstanceSet]) -> None:
    with open(path, "w") as fh:
        for frame in frames:
            fh.write(json.dumps(instance_set_to_dict(frame), sort_keys=True))
            fh.write("\n")


def read_scene_log(path) -> list[InstanceSet]:
    frames = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                frames.append(instance_set_from_dict(json.loads(line)))
    return frames
