"""Deterministic synthetic traffic scenarios with exact kinematic ground truth.

A scenario is generated purely from its config (seeded), stepped with
closed-form integrators, and viewed per frame as an :class:`InstanceSet`
in that frame's ego coordinates. It doubles as the verification oracle:
constant-velocity agents move exactly linearly in the world frame, so any
exact frame-change machinery must reproduce the next frame bit-for-near-bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import HorizonOverrun, InfeasibleScenario
from .scene import (
    ActionCondition,
    AgentAnchor,
    DEFAULT_AGENT_SLOTS,
    DEFAULT_MAP_SLOTS,
    EgoAnchor,
    InstanceSet,
    MAP_POINTS,
    MapAnchor,
    PLAN_DT,
    PLAN_STEPS,
    Pose2,
    Trajectory,
    heading_from_angle,
    steering_from_trajectory,
)

MOTION_MODELS = ("constant-velocity", "constant-turn", "lane-follow", "stop-and-go")
EGO_PROFILES = ("straight", "curve-left", "curve-right", "decelerate")

EGO_SIZE = (2.0, 4.5, 1.6)
_CLASS_SIZE = {
    "vehicle": (2.0, 4.5, 1.6),
    "pedestrian": (0.7, 0.9, 1.7),
    "cyclist": (0.8, 1.8, 1.7),
}
_CLASS_SPEED = {"vehicle": (2.0, 9.0), "pedestrian": (0.5, 2.0), "cyclist": (2.0, 5.0)}

# Minimum spawn distance from the ego at frame 0; larger than the sum of the
# worst-case box half-diagonals, so spawns can never overlap the ego box.
_SPAWN_CLEARANCE = 6.0
_SPAWN_TRIES = 1000

# The scripted crossing agent meets the ego this many frames after the
# default evaluation anchor (history length 3), i.e. at 1.5 s lead time.
CROSSING_LEAD_FRAMES = 3
DEFAULT_EVAL_ANCHOR = 3


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    n_agents: int = 12
    n_map_elements: int = 6
    duration: int = 14
    dt: float = PLAN_DT
    motion_mix: dict = field(
        default_factory=lambda: {
            "constant-velocity": 0.35,
            "constant-turn": 0.35,
            "lane-follow": 0.15,
            "stop-and-go": 0.15,
        }
    )
    ego_profile: str = "straight"
    crossing: bool = False
    agent_slots: int = DEFAULT_AGENT_SLOTS
    map_slots: int = DEFAULT_MAP_SLOTS

    def __post_init__(self):
        if self.duration < 2:
            raise ValueError("duration must be at least 2 frames")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.ego_profile not in EGO_PROFILES:
            raise ValueError(f"unknown ego profile {self.ego_profile!r}")
        if self.n_agents > self.agent_slots or self.n_map_elements > self.map_slots:
            raise ValueError("entity counts exceed slot budgets")
        mix_keys = set(self.motion_mix)
        if not mix_keys.issubset(MOTION_MODELS):
            raise ValueError(f"unknown motion models {mix_keys - set(MOTION_MODELS)}")
        if abs(sum(self.motion_mix.values()) - 1.0) > 1e-9:
            raise ValueError("motion_mix must sum to 1")


def ensure_horizon(config: ScenarioConfig, h: int, f: int, plan_steps: int = PLAN_STEPS):
    """Check the scenario is long enough for history h, forecast f and a
    planning horizon; raises ValueError otherwise."""
    if config.duration < h + max(f, plan_steps) + 1:
        raise ValueError(
            f"duration {config.duration} too short for h={h}, f={f}, T={plan_steps}"
        )


@dataclass(frozen=True)
class EntityState:
    """World-frame snapshot of one agent at one frame."""

    id: int
    pose: tuple[float, float, float]
    velocity: tuple[float, float]
    turn_rate: float
    model: str


@dataclass(frozen=True)
class WorldState:
    """World-frame snapshot of the whole scene at one frame."""

    frame_index: int
    ego_pose: tuple[float, float, float]
    ego_turn_rate: float
    entities: tuple[EntityState, ...]


@dataclass(frozen=True)
class AgentTrack:
    id: int
    class_label: str
    size: np.ndarray
    model: str
    xy: np.ndarray  # (F, 2) world positions
    yaw: np.ndarray  # (F,)
    velocity: np.ndarray  # (F, 2) world instantaneous
    turn_rate: np.ndarray  # (F,)


@dataclass(frozen=True)
class MapElement:
    id: int
    class_label: str
    points: np.ndarray  # (MAP_POINTS, 2) world, static


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    ego_xy: np.ndarray
    ego_yaw: np.ndarray
    agents: tuple[AgentTrack, ...]
    maps: tuple[MapElement, ...]
    states: tuple[WorldState, ...] = ()

    @property
    def duration(self) -> int:
        return self.config.duration

    def ego_pose(self, t: int) -> Pose2:
        return Pose2(self.ego_xy[t, 0], self.ego_xy[t, 1], self.ego_yaw[t])

    def ego_step_velocity(self, t: int) -> np.ndarray:
        """Average ego velocity over the step into frame t, in frame-t axes.
        Frame 0 uses its upcoming step instead."""
        j = max(t, 1)
        delta = (self.ego_xy[j] - self.ego_xy[j - 1]) / self.config.dt
        return self.ego_pose(t).rotate_to_local(delta)

    def ego_step_turn_rate(self, t: int) -> float:
        j = max(t, 1)
        return float(self.ego_yaw[j] - self.ego_yaw[j - 1]) / self.config.dt

    def ego_forward_speed(self, t: int) -> float:
        j = min(t, self.duration - 2)
        return float(np.linalg.norm(self.ego_xy[j + 1] - self.ego_xy[j])) / self.config.dt


def _arc_step(x, y, yaw, speed, omega, dt):
    """Exact unicycle integration over one step with constant speed/omega."""
    if abs(omega) < 1e-12:
        return x + speed * math.cos(yaw) * dt, y + speed * math.sin(yaw) * dt, yaw
    nyaw = yaw + omega * dt
    r = speed / omega
    return x + r * (math.sin(nyaw) - math.sin(yaw)), y - r * (math.cos(nyaw) - math.cos(yaw)), nyaw


def _integrate_trapezoid(p0, yaw, speeds, dt):
    """Straight-line motion with a piecewise-linear speed profile given at
    frame boundaries; per-step displacement is the exact trapezoid integral."""
    direction = np.array([math.cos(yaw), math.sin(yaw)])
    xy = np.empty((len(speeds), 2))
    xy[0] = p0
    for k in range(len(speeds) - 1):
        xy[k + 1] = xy[k] + direction * (speeds[k] + speeds[k + 1]) * 0.5 * dt
    return xy


def _ego_track(config: ScenarioConfig, rng: np.random.Generator):
    frames = config.duration
    dt = config.dt
    speed = float(rng.uniform(5.0, 8.0))
    yaw0 = float(rng.uniform(-math.pi, math.pi))
    x0, y0 = float(rng.uniform(-5, 5)), float(rng.uniform(-5, 5))
    xy = np.empty((frames, 2))
    yaw = np.empty(frames)
    if config.ego_profile == "decelerate":
        final = speed * float(rng.uniform(0.2, 0.5))
        speeds = np.linspace(speed, final, frames)
        xy = _integrate_trapezoid((x0, y0), yaw0, speeds, dt)
        yaw[:] = yaw0
    else:
        omega = 0.0
        if config.ego_profile == "curve-left":
            omega = float(rng.uniform(0.10, 0.25))
        elif config.ego_profile == "curve-right":
            omega = -float(rng.uniform(0.10, 0.25))
        x, y, th = x0, y0, yaw0
        for k in range(frames):
            xy[k] = (x, y)
            yaw[k] = th
            x, y, th = _arc_step(x, y, th, speed, omega, dt)
    return xy, yaw


def _make_maps(config: ScenarioConfig, ego_xy, ego_yaw, rng) -> tuple[MapElement, ...]:
    """Lane-parallel polylines around the ego's initial pose: dividers at
    +/-3.5 m, boundaries at +/-10.5 m, one arc lane, one crossing strip."""
    origin = Pose2(ego_xy[0, 0], ego_xy[0, 1], float(ego_yaw[0]))
    s = np.linspace(-20.0, 70.0, MAP_POINTS)
    candidates = []
    for offset, label in ((3.5, "lane-divider"), (-3.5, "lane-divider"),
                          (10.5, "boundary"), (-10.5, "boundary")):
        local = np.stack([s, np.full_like(s, offset)], axis=1)
        candidates.append((label, origin.to_parent(local)))
    # arc lane bending away from the corridor, used by lane-follow agents
    radius = float(rng.uniform(25.0, 50.0))
    side = 1.0 if rng.random() < 0.5 else -1.0
    ang = np.linspace(0.0, 1.6, MAP_POINTS)
    arc_local = np.stack(
        [radius * np.sin(ang), side * (radius - radius * np.cos(ang)) + side * 7.0], axis=1
    )
    candidates.append(("lane-divider", origin.to_parent(arc_local)))
    cross_s = np.linspace(-12.0, 12.0, MAP_POINTS)
    ahead = float(rng.uniform(15.0, 30.0))
    cross_local = np.stack([np.full_like(cross_s, ahead), cross_s], axis=1)
    candidates.append(("crossing", origin.to_parent(cross_local)))
    while len(candidates) < config.n_map_elements:
        offset = float(rng.uniform(-14.0, 14.0))
        local = np.stack([s, np.full_like(s, offset)], axis=1)
        candidates.append(("lane-divider", origin.to_parent(local)))
    elements = []
    for i in range(config.n_map_elements):
        label, pts = candidates[i]
        elements.append(MapElement(id=100 + i, class_label=label, points=np.asarray(pts)))
    return tuple(elements)


def _densify(points: np.ndarray, spacing: float = 1.0) -> np.ndarray:
    out = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        seg = np.linalg.norm(b - a)
        n = max(1, int(math.ceil(seg / spacing)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * (k / n))
    return np.asarray(out)


def _pure_pursuit_track(p0, yaw0, speed, path, frames, dt, lookahead=6.0):
    dense = _densify(path)
    arclen = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(dense, axis=0), axis=1))])
    end_dir = dense[-1] - dense[-2]
    end_dir = end_dir / np.linalg.norm(end_dir)
    xy = np.empty((frames, 2))
    yaw = np.empty(frames)
    omega_hist = np.empty(frames)
    x, y, th = p0[0], p0[1], yaw0
    for k in range(frames):
        xy[k] = (x, y)
        yaw[k] = th
        d = np.linalg.norm(dense - np.array([x, y]), axis=1)
        near = int(np.argmin(d))
        target_s = arclen[near] + lookahead
        if target_s >= arclen[-1]:
            goal = dense[-1] + end_dir * (target_s - arclen[-1])
        else:
            idx = int(np.searchsorted(arclen, target_s))
            t = (target_s - arclen[idx - 1]) / (arclen[idx] - arclen[idx - 1])
            goal = dense[idx - 1] + (dense[idx] - dense[idx - 1]) * t
        rel = goal - np.array([x, y])
        dist = float(np.linalg.norm(rel))
        alpha = math.atan2(rel[1], rel[0]) - th
        omega = 0.0 if dist < 1e-6 else 2.0 * speed * math.sin(alpha) / dist
        omega = float(np.clip(omega, -0.8, 0.8))
        omega_hist[k] = omega
        x, y, th = _arc_step(x, y, th, speed, omega, dt)
    return xy, yaw, omega_hist


def _sample_spawn(rng, ego0: Pose2):
    for _ in range(_SPAWN_TRIES):
        local = np.array([rng.uniform(-45.0, 45.0), rng.uniform(-25.0, 25.0)])
        if np.linalg.norm(local) >= _SPAWN_CLEARANCE:
            return ego0.to_parent(local)
    raise InfeasibleScenario("could not place agent clear of the ego")


def _agent_track(i, model, config, rng, ego0: Pose2, arc_lane: Optional[np.ndarray]):
    frames, dt = config.duration, config.dt
    class_label = str(rng.choice(AGENT_CLASS_POOL[model]))
    base_w, base_l, base_h = _CLASS_SIZE[class_label]
    size = np.array([base_w, base_l, base_h]) * float(rng.uniform(0.9, 1.1))
    lo, hi = _CLASS_SPEED[class_label]
    speed = float(rng.uniform(lo, hi))
    yaw0 = float(rng.uniform(-math.pi, math.pi))
    p0 = _sample_spawn(rng, ego0)

    if model == "constant-velocity":
        vel = speed * np.array([math.cos(yaw0), math.sin(yaw0)])
        steps = np.arange(frames)[:, None] * dt
        xy = p0[None, :] + vel[None, :] * steps
        yaw = np.full(frames, yaw0)
        velocity = np.tile(vel, (frames, 1))
        turn = np.zeros(frames)
    elif model == "constant-turn":
        omega = float(rng.uniform(0.15, 0.5)) * (1.0 if rng.random() < 0.5 else -1.0)
        xy = np.empty((frames, 2))
        yaw = np.empty(frames)
        x, y, th = p0[0], p0[1], yaw0
        for k in range(frames):
            xy[k] = (x, y)
            yaw[k] = th
            x, y, th = _arc_step(x, y, th, speed, omega, dt)
        velocity = speed * np.stack([np.cos(yaw), np.sin(yaw)], axis=1)
        turn = np.full(frames, omega)
    elif model == "lane-follow":
        path = arc_lane if arc_lane is not None else np.stack(
            [np.linspace(-20, 70, MAP_POINTS), np.zeros(MAP_POINTS)], axis=1
        )
        dense = _densify(path)
        start = dense[int(rng.integers(0, max(1, len(dense) // 3)))]
        seg = dense[min(len(dense) - 1, 5)] - dense[0]
        yaw0 = math.atan2(seg[1], seg[0])
        xy, yaw, turn = _pure_pursuit_track(start, yaw0, speed, path, frames, dt)
        velocity = speed * np.stack([np.cos(yaw), np.sin(yaw)], axis=1)
    else:  # stop-and-go
        t_brake = int(rng.integers(2, max(3, frames // 2)))
        ramp = 3
        hold = int(rng.integers(2, 4))
        speeds = np.empty(frames)
        for k in range(frames):
            if k <= t_brake:
                speeds[k] = speed
            elif k <= t_brake + ramp:
                speeds[k] = speed * (1.0 - (k - t_brake) / ramp)
            elif k <= t_brake + ramp + hold:
                speeds[k] = 0.0
            else:
                speeds[k] = min(speed, speed * (k - t_brake - ramp - hold) / ramp)
        xy = _integrate_trapezoid(p0, yaw0, speeds, dt)
        yaw = np.full(frames, yaw0)
        velocity = speeds[:, None] * np.array([math.cos(yaw0), math.sin(yaw0)])[None, :]
        turn = np.zeros(frames)

    return AgentTrack(
        id=i, class_label=class_label, size=size, model=model,
        xy=xy, yaw=yaw, velocity=velocity, turn_rate=turn,
    )


AGENT_CLASS_POOL = {
    "constant-velocity": ("vehicle", "pedestrian", "cyclist"),
    "constant-turn": ("vehicle", "cyclist"),
    "lane-follow": ("vehicle",),
    "stop-and-go": ("vehicle", "cyclist"),
}


def _crossing_track(config, rng, ego_xy, ego_yaw) -> AgentTrack:
    """A constant-velocity vehicle timed to occupy the ego's scripted
    position a few frames after the evaluation anchor."""
    frames, dt = config.duration, config.dt
    t_hit = min(DEFAULT_EVAL_ANCHOR + CROSSING_LEAD_FRAMES, frames - 2)
    hit_point = ego_xy[t_hit]
    side = 1.0 if rng.random() < 0.5 else -1.0
    approach = float(ego_yaw[t_hit]) + side * (math.pi / 2 + float(rng.uniform(-0.2, 0.2)))
    speed = float(rng.uniform(4.0, 6.0))
    vel = -speed * np.array([math.cos(approach), math.sin(approach)])
    p0 = hit_point - vel * (t_hit * dt)
    steps = np.arange(frames)[:, None] * dt
    xy = p0[None, :] + vel[None, :] * steps
    yaw0 = math.atan2(vel[1], vel[0])
    return AgentTrack(
        id=0, class_label="vehicle", size=np.array([2.2, 5.0, 1.8]), model="constant-velocity",
        xy=xy, yaw=np.full(frames, yaw0), velocity=np.tile(vel, (frames, 1)),
        turn_rate=np.zeros(frames),
    )


def generate(config: ScenarioConfig) -> Scenario:
    """Build a scenario deterministically from its config."""
    rng = np.random.default_rng(config.seed)
    ego_xy, ego_yaw = _ego_track(config, rng)
    ego0 = Pose2(ego_xy[0, 0], ego_xy[0, 1], float(ego_yaw[0]))
    maps = _make_maps(config, ego_xy, ego_yaw, rng)
    arc_lane = maps[4].points if len(maps) > 4 else None

    names = sorted(config.motion_mix)
    probs = np.array([config.motion_mix[n] for n in names])
    agents = []
    for i in range(config.n_agents):
        if config.crossing and i == 0:
            track = _crossing_track(config, rng, ego_xy, ego_yaw)
            if np.linalg.norm(track.xy[0] - ego_xy[0]) < _SPAWN_CLEARANCE:
                raise InfeasibleScenario("crossing agent spawned onto the ego")
            agents.append(track)
            continue
        model = str(rng.choice(names, p=probs))
        agents.append(_agent_track(i, model, config, rng, ego0, arc_lane))

    states = tuple(
        WorldState(
            frame_index=t,
            ego_pose=(float(ego_xy[t, 0]), float(ego_xy[t, 1]), float(ego_yaw[t])),
            ego_turn_rate=float(ego_yaw[min(t + 1, config.duration - 1)] - ego_yaw[t]) / config.dt
            if t + 1 < config.duration
            else float(ego_yaw[t] - ego_yaw[t - 1]) / config.dt,
            entities=tuple(
                EntityState(
                    id=a.id,
                    pose=(float(a.xy[t, 0]), float(a.xy[t, 1]), float(a.yaw[t])),
                    velocity=(float(a.velocity[t, 0]), float(a.velocity[t, 1])),
                    turn_rate=float(a.turn_rate[t]),
                    model=a.model,
                )
                for a in agents
            ),
        )
        for t in range(config.duration)
    )
    return Scenario(
        config=config, ego_xy=ego_xy, ego_yaw=ego_yaw,
        agents=tuple(agents), maps=maps, states=states,
    )


def _scripted_plan(scenario: Scenario, t: int, steps: int = PLAN_STEPS) -> np.ndarray:
    """The ego's next `steps` scripted positions in frame-t coordinates;
    linear extrapolation past the end of the script."""
    pose = scenario.ego_pose(t)
    frames = scenario.duration
    world = np.empty((steps, 2))
    for k in range(1, steps + 1):
        idx = t + k
        if idx < frames:
            world[k - 1] = scenario.ego_xy[idx]
        else:
            tail = scenario.ego_xy[frames - 1] - scenario.ego_xy[frames - 2]
            world[k - 1] = scenario.ego_xy[frames - 1] + tail * (idx - frames + 1)
    return pose.to_local(world)


def ego_frame_view(scenario: Scenario, t: int) -> tuple[InstanceSet, ActionCondition]:
    """The scene at frame t in that frame's ego coordinates, plus the
    scripted action condition for the step t -> t+1."""
    if not 0 <= t < scenario.duration:
        raise ValueError(f"frame {t} outside scenario duration {scenario.duration}")
    cfg = scenario.config
    pose = scenario.ego_pose(t)

    agent_slots: list = []
    for track in scenario.agents:
        local_xy = pose.to_local(track.xy[t])
        local_yaw = float(track.yaw[t]) - pose.yaw
        local_vel = pose.rotate_to_local(track.velocity[t])
        anchor = AgentAnchor(
            id=track.id,
            center=np.array([local_xy[0], local_xy[1], 0.0]),
            size=track.size,
            heading=np.array(heading_from_angle(local_yaw)),
            velocity=np.array([local_vel[0], local_vel[1], 0.0]),
            class_label=track.class_label,
            existence=1.0,
        )
        agent_slots.append((anchor, None))
    agent_slots.extend([(None, None)] * (cfg.agent_slots - len(agent_slots)))

    map_slots: list = []
    for element in scenario.maps:
        anchor = MapAnchor(
            id=element.id,
            points=pose.to_local(element.points),
            class_label=element.class_label,
            existence=1.0,
        )
        map_slots.append((anchor, None))
    map_slots.extend([(None, None)] * (cfg.map_slots - len(map_slots)))

    ego = EgoAnchor(
        size=np.asarray(EGO_SIZE),
        velocity=np.array([*scenario.ego_step_velocity(t), 0.0]),
        angular_velocity=scenario.ego_step_turn_rate(t),
    )
    frame = InstanceSet(
        frame_index=t, ego=ego, agents=tuple(agent_slots), maps=tuple(map_slots)
    )
    plan = Trajectory(_scripted_plan(scenario, t), cfg.dt)
    condition = ActionCondition(
        speed=scenario.ego_forward_speed(t),
        planned_trajectory=plan,
        steering=steering_from_trajectory(plan),
    )
    return frame, condition


def ground_truth_future(scenario: Scenario, t: int, f: int) -> list[InstanceSet]:
    """Frames t+1 .. t+f, each in its own ego frame."""
    if t + f >= scenario.duration:
        raise HorizonOverrun(
            f"t={t} + f={f} reaches past duration {scenario.duration}"
        )
    return [ego_frame_view(scenario, t + k)[0] for k in range(1, f + 1)]


def agent_displacement_future(scenario: Scenario, t: int, steps: int) -> dict[int, np.ndarray]:
    """Per-agent future displacements relative to the agent's frame-t
    position, expressed in frame-t axes. The motion-prediction target."""
    if t + steps >= scenario.duration:
        raise HorizonOverrun(f"t={t} + {steps} past duration {scenario.duration}")
    pose = scenario.ego_pose(t)
    out = {}
    for track in scenario.agents:
        deltas = track.xy[t + 1 : t + steps + 1] - track.xy[t]
        out[track.id] = pose.rotate_to_local(deltas)
    return out


def ego_plan_target(scenario: Scenario, t: int, steps: int = PLAN_STEPS) -> np.ndarray:
    """Scripted ego waypoints for imitation, frame-t coordinates."""
    return _scripted_plan(scenario, t, steps)
