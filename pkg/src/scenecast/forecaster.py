"""Next-frame scene decoder and its autoregressive rollout.

The decoder is a stack of attention blocks over instance slots. Queries start
from the newest frame's latent features; each block runs slot self-attention,
per-slot temporal cross-attention over the window (keys carry learned
frame-age and ego-displacement embeddings), cross-attention to the Fourier-
encoded action condition, from the second block on cross-attention to the
kinematically projected anchors, and a feed-forward layer. Heads emit an
existence logit per slot and residuals added on top of the projected
anchors, so zeroed heads reproduce the projection exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from . import alignment
from .errors import NaNLoss, ShapeMismatch
from .memory import InstanceMemoryQueue
from .scene import (
    ActionCondition,
    AgentAnchor,
    InstanceFeature,
    InstanceSet,
    MAP_POINTS,
    MapAnchor,
    PLAN_STEPS,
    RolloutConfig,
    AGENT_CLASSES,
    MAP_CLASSES,
    STEERING_COMMANDS,
    normalize_heading,
)

DTYPE = torch.float64
POS_SCALE = 10.0
VEL_SCALE = 5.0
SPEED_NORM = 20.0
WAYPOINT_NORM = 50.0

AGENT_STATUS_DIM = 12 + len(AGENT_CLASSES)  # pose/size/heading/velocity/existence + class
MAP_STATUS_DIM = 2 * MAP_POINTS + 1 + len(MAP_CLASSES)


@dataclass(frozen=True)
class ForecasterConfig:
    n_blocks: int = 3
    n_heads: int = 4
    embed_dim: int = 64
    window: int = 3  # m: the decoder consumes m+1 frames
    n_freq: int = 4
    plan_steps: int = PLAN_STEPS
    map_points: int = MAP_POINTS

    @property
    def action_dim(self) -> int:
        return 2 * self.n_freq * (1 + 2 * self.plan_steps + len(STEERING_COMMANDS))

    def to_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks, "n_heads": self.n_heads,
            "embed_dim": self.embed_dim, "window": self.window,
            "n_freq": self.n_freq, "plan_steps": self.plan_steps,
            "map_points": self.map_points,
        }


def fourier_embed(condition: ActionCondition, n_freq: int) -> np.ndarray:
    """Sinusoidal features of the scale-normalized action condition.

    The condition flattens to speed, T x 2 planned waypoints, and a one-hot
    steering command; each frequency k contributes sin(2^k pi x) and
    cos(2^k pi x) blocks, giving 2 * n_freq * (1 + 2T + 3) outputs.
    """
    if n_freq < 1:
        raise ValueError("n_freq must be >= 1")
    steer = np.zeros(len(STEERING_COMMANDS))
    steer[STEERING_COMMANDS.index(condition.steering)] = 1.0
    x = np.concatenate(
        [
            [condition.speed / SPEED_NORM],
            condition.planned_trajectory.waypoints.reshape(-1) / WAYPOINT_NORM,
            steer,
        ]
    )
    parts = []
    for k in range(n_freq):
        arg = (2.0**k) * math.pi * x
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    return np.concatenate(parts)


def agent_status_vector(anchor: Optional[AgentAnchor]) -> np.ndarray:
    vec = np.zeros(AGENT_STATUS_DIM)
    if anchor is None:
        return vec
    vec[0:3] = anchor.center / POS_SCALE
    vec[3:6] = anchor.size
    vec[6:8] = anchor.heading
    vec[8:11] = anchor.velocity / VEL_SCALE
    vec[11] = anchor.existence
    vec[12 + AGENT_CLASSES.index(anchor.class_label)] = 1.0
    return vec


def map_status_vector(anchor: Optional[MapAnchor]) -> np.ndarray:
    vec = np.zeros(MAP_STATUS_DIM)
    if anchor is None:
        return vec
    flat = anchor.points.reshape(-1) / POS_SCALE
    vec[0 : flat.size] = flat
    vec[2 * MAP_POINTS] = anchor.existence
    vec[2 * MAP_POINTS + 1 + MAP_CLASSES.index(anchor.class_label)] = 1.0
    return vec


class _Block(nn.Module):
    """One decoder block; `use_projection` adds the pre-projection
    cross-attention present from the second block on."""

    def __init__(self, dim: int, heads: int, use_projection: bool):
        super().__init__()
        kw = dict(embed_dim=dim, num_heads=heads, batch_first=True, dtype=DTYPE)
        self.self_attn = nn.MultiheadAttention(**kw)
        self.ln_self = nn.LayerNorm(dim, dtype=DTYPE)
        self.temporal_attn = nn.MultiheadAttention(**kw)
        self.ln_temporal = nn.LayerNorm(dim, dtype=DTYPE)
        self.action_attn = nn.MultiheadAttention(**kw)
        self.ln_action = nn.LayerNorm(dim, dtype=DTYPE)
        self.use_projection = use_projection
        if use_projection:
            self.projection_attn = nn.MultiheadAttention(**kw)
            self.ln_projection = nn.LayerNorm(dim, dtype=DTYPE)
        self.ffn = nn.Sequential(
            nn.Linear(dim, 4 * dim, dtype=DTYPE),
            nn.GELU(),
            nn.Linear(4 * dim, dim, dtype=DTYPE),
        )
        self.ln_ffn = nn.LayerNorm(dim, dtype=DTYPE)

    def forward(self, q, temporal_kv, action_kv, projection_kv, slot_mask):
        # slot_mask: True marks empty slots (ignored as keys)
        attn, _ = self.self_attn(q, q, q, key_padding_mask=slot_mask, need_weights=False)
        q = self.ln_self(q + attn)

        batch, slots, dim = q.shape
        q_flat = q.reshape(batch * slots, 1, dim)
        kv_flat = temporal_kv.reshape(batch * slots, -1, dim)
        attn, _ = self.temporal_attn(q_flat, kv_flat, kv_flat, need_weights=False)
        q = self.ln_temporal(q + attn.reshape(batch, slots, dim))

        attn, _ = self.action_attn(q, action_kv, action_kv, need_weights=False)
        q = self.ln_action(q + attn)

        if self.use_projection:
            attn, _ = self.projection_attn(
                q, projection_kv, projection_kv,
                key_padding_mask=slot_mask, need_weights=False,
            )
            q = self.ln_projection(q + attn)

        return self.ln_ffn(q + self.ffn(q))


class ForecasterNet(nn.Module):
    """All learnable state of the scene decoder."""

    def __init__(self, config: ForecasterConfig):
        super().__init__()
        if config.embed_dim % config.n_heads != 0:
            raise ValueError("embed_dim must divide by n_heads")
        self.config = config
        dim = config.embed_dim
        self.agent_embed = nn.Linear(AGENT_STATUS_DIM, dim, dtype=DTYPE)
        self.map_embed = nn.Linear(MAP_STATUS_DIM, dim, dtype=DTYPE)
        self.query_proj = nn.Linear(dim, dim, dtype=DTYPE)
        self.e_time = nn.Parameter(torch.zeros(config.window + 1, dim, dtype=DTYPE))
        self.pos_embed = nn.Linear(2, dim, dtype=DTYPE)
        self.action_proj = nn.Linear(config.action_dim, dim, dtype=DTYPE)
        self.blocks = nn.ModuleList(
            _Block(dim, config.n_heads, use_projection=i > 0)
            for i in range(config.n_blocks)
        )
        self.cls_head = nn.Linear(dim, 1, dtype=DTYPE)
        self.agent_refine = nn.Linear(dim, 8, dtype=DTYPE)
        self.map_refine = nn.Linear(dim, 2 * config.map_points, dtype=DTYPE)
        self._init_weights()

    def _init_weights(self):
        with torch.no_grad():
            nn.init.normal_(self.e_time, std=0.02)
            # start exactly at the kinematic projection baseline
            self.agent_refine.weight.zero_()
            self.agent_refine.bias.zero_()
            self.map_refine.weight.zero_()
            self.map_refine.bias.zero_()
            self.cls_head.weight.zero_()
            self.cls_head.bias.zero_()

    def zero_heads(self):
        """Zero the refinement and classification heads (projection baseline)."""
        with torch.no_grad():
            for head in (self.agent_refine, self.map_refine, self.cls_head):
                head.weight.zero_()
                head.bias.zero_()

    def embed_agent_status(self, status: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.agent_embed(status))

    def embed_map_status(self, status: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.map_embed(status))

    def core(self, batch: "DecoderBatch"):
        """Shared forward pass over tensorized inputs.

        Returns per-slot predicted agent geometry (center, unit heading,
        velocity), map points, existence logits, and hidden states.
        """
        cfg = self.config
        n_agents = batch.agent_status.shape[2]
        # latent features per window frame: stored features where present,
        # anchor embeddings otherwise
        agent_emb = self.embed_agent_status(batch.agent_status)
        map_emb = self.embed_map_status(batch.map_status)
        tokens = torch.cat([agent_emb, map_emb], dim=2)  # [B, m+1, S, c]
        tokens = torch.where(batch.feature_known.unsqueeze(-1), batch.features, tokens)

        ages = torch.arange(tokens.shape[1] - 1, -1, -1, device=tokens.device)
        time_emb = self.e_time[ages]  # [m+1, c]
        pos_emb = self.pos_embed(batch.frame_offsets / POS_SCALE)  # [B, m+1, c]
        temporal_kv = tokens + time_emb[None, :, None, :]
        if batch.use_positional:
            temporal_kv = temporal_kv + pos_emb[:, :, None, :]
        temporal_kv = temporal_kv.permute(0, 2, 1, 3)  # [B, S, m+1, c]

        q = self.query_proj(tokens[:, -1])  # newest frame features
        action_kv = self.action_proj(batch.action).unsqueeze(1)  # [B, 1, c]
        proj_agent_emb = self.embed_agent_status(batch.projected_agent_status)
        proj_map_emb = self.embed_map_status(batch.projected_map_status)
        projection_kv = torch.cat([proj_agent_emb, proj_map_emb], dim=1)
        slot_mask = ~batch.valid  # [B, S]

        for block in self.blocks:
            q = block(q, temporal_kv, action_kv, projection_kv, slot_mask)

        exist_logits = self.cls_head(q).squeeze(-1)
        agent_res = self.agent_refine(q[:, :n_agents])
        map_res = self.map_refine(q[:, n_agents:])

        agent_geo = batch.projected_agent_geo + agent_res
        heading = agent_geo[..., 3:5]
        norm = torch.linalg.norm(heading, dim=-1, keepdim=True).clamp_min(1e-12)
        agent_geo = torch.cat(
            [agent_geo[..., :3], heading / norm, agent_geo[..., 5:]], dim=-1
        )
        map_pts = batch.projected_map_points + map_res.reshape(
            map_res.shape[0], map_res.shape[1], cfg.map_points, 2
        )
        return agent_geo, map_pts, exist_logits, q


def embed_anchor(anchor, net: ForecasterNet) -> InstanceFeature:
    """Latent feature of a single anchor under the net's embedding map."""
    if isinstance(anchor, AgentAnchor):
        vec = torch.as_tensor(agent_status_vector(anchor), dtype=DTYPE)
        out = net.embed_agent_status(vec)
    elif isinstance(anchor, MapAnchor):
        vec = torch.as_tensor(map_status_vector(anchor), dtype=DTYPE)
        out = net.embed_map_status(vec)
    else:
        raise TypeError(f"cannot embed {type(anchor).__name__}")
    return InstanceFeature(out.detach().numpy())


@dataclass
class DecoderBatch:
    """Tensorized decoder inputs, batch-first."""

    agent_status: torch.Tensor  # [B, m+1, Sa, AGENT_STATUS_DIM]
    map_status: torch.Tensor  # [B, m+1, Sm, MAP_STATUS_DIM]
    features: torch.Tensor  # [B, m+1, S, c] stored features (zeros if unknown)
    feature_known: torch.Tensor  # [B, m+1, S] bool
    frame_offsets: torch.Tensor  # [B, m+1, 2] window origins in newest frame
    action: torch.Tensor  # [B, action_dim]
    projected_agent_status: torch.Tensor  # [B, Sa, AGENT_STATUS_DIM]
    projected_map_status: torch.Tensor  # [B, Sm, MAP_STATUS_DIM]
    projected_agent_geo: torch.Tensor  # [B, Sa, 8] center, heading, velocity
    projected_map_points: torch.Tensor  # [B, Sm, P, 2]
    valid: torch.Tensor  # [B, S] slot occupancy of the newest frame
    use_positional: bool = True


def window_origin_offsets(window: Sequence[InstanceSet], dt: float) -> np.ndarray:
    """Each window frame's origin expressed in the newest frame.

    Chained through the per-frame ego step velocities and turn rates: frame
    j's ego velocity is the displacement into frame j over dt in frame-j
    axes, so the map from frame-(j-1) coordinates into frame-j coordinates
    is q -> R(-w_j dt) q - v_j dt.
    """
    n = len(window)
    offsets = np.zeros((n, 2))
    rot_acc = np.eye(2)
    t_acc = np.zeros(2)
    for j in range(n - 1, 0, -1):
        ego = window[j].ego
        yaw = ego.angular_velocity * dt
        c, s = math.cos(yaw), math.sin(yaw)
        r_neg = np.array([[c, s], [-s, c]])
        t_acc = t_acc - rot_acc @ (ego.velocity[:2] * dt)
        rot_acc = rot_acc @ r_neg
        offsets[j - 1] = t_acc
    return offsets


def _check_window(window, projected, config) -> None:
    if len(window) != config.window + 1:
        raise ShapeMismatch(
            f"window holds {len(window)} frames, decoder expects {config.window + 1}"
        )
    newest = window[-1]
    agent_ids = newest.agent_ids()
    map_ids = newest.map_ids()
    for frame in window:
        if len(frame.agents) != len(agent_ids) or len(frame.maps) != len(map_ids):
            raise ShapeMismatch("slot counts differ across the window")
        if frame.agent_ids() != agent_ids or frame.map_ids() != map_ids:
            raise ShapeMismatch("slot identities differ across the window")
    proj_agent_ids = tuple(a.id if a else None for a in projected.agents)
    proj_map_ids = tuple(m.id if m else None for m in projected.maps)
    if proj_agent_ids != agent_ids or proj_map_ids != map_ids:
        raise ShapeMismatch("projected anchors are not slot-aligned with the window")


def build_batch(
    samples: Sequence[tuple],
    net: ForecasterNet,
    dt: float,
    use_positional: bool = True,
) -> DecoderBatch:
    """Tensorize (window, projected, condition) triples."""
    cfg = net.config
    dim = cfg.embed_dim
    agent_status, map_status, features, known = [], [], [], []
    offsets, actions = [], []
    proj_agent_status, proj_map_status, proj_geo, proj_pts, valids = [], [], [], [], []
    for window, projected, condition in samples:
        _check_window(window, projected, cfg)
        a_frames, m_frames, f_frames, k_frames = [], [], [], []
        for frame in window:
            a_frames.append([agent_status_vector(a) for a, _ in frame.agents])
            m_frames.append([map_status_vector(m) for m, _ in frame.maps])
            slot_feats, slot_known = [], []
            for _, feat in (*frame.agents, *frame.maps):
                if feat is not None and feat.embedding.size == dim:
                    slot_feats.append(feat.embedding)
                    slot_known.append(True)
                else:
                    slot_feats.append(np.zeros(dim))
                    slot_known.append(False)
            f_frames.append(slot_feats)
            k_frames.append(slot_known)
        agent_status.append(a_frames)
        map_status.append(m_frames)
        features.append(f_frames)
        known.append(k_frames)
        offsets.append(window_origin_offsets(window, dt))
        actions.append(fourier_embed(condition, cfg.n_freq))
        proj_agent_status.append([agent_status_vector(a) for a in projected.agents])
        proj_map_status.append([map_status_vector(m) for m in projected.maps])
        geo = []
        for anchor in projected.agents:
            if anchor is None:
                geo.append(np.zeros(8))
            else:
                geo.append(
                    np.concatenate([anchor.center, anchor.heading, anchor.velocity])
                )
        proj_geo.append(geo)
        pts = []
        for anchor in projected.maps:
            pts.append(
                np.zeros((cfg.map_points, 2)) if anchor is None else anchor.points
            )
        proj_pts.append(pts)
        newest = window[-1]
        valids.append(
            [a is not None for a, _ in newest.agents]
            + [m is not None for m, _ in newest.maps]
        )

    as_t = lambda x: torch.as_tensor(np.asarray(x), dtype=DTYPE)
    return DecoderBatch(
        agent_status=as_t(agent_status),
        map_status=as_t(map_status),
        features=as_t(features),
        feature_known=torch.as_tensor(np.asarray(known), dtype=torch.bool),
        frame_offsets=as_t(offsets),
        action=as_t(actions),
        projected_agent_status=as_t(proj_agent_status),
        projected_map_status=as_t(proj_map_status),
        projected_agent_geo=as_t(proj_geo),
        projected_map_points=as_t(proj_pts),
        valid=torch.as_tensor(np.asarray(valids), dtype=torch.bool),
        use_positional=use_positional,
    )


def decoder_step(
    window: Sequence[InstanceSet],
    projected: alignment.ProjectedInstances,
    condition: ActionCondition,
    net: ForecasterNet,
    use_positional: bool = True,
) -> InstanceSet:
    """Predict the next frame from a slot-aligned window and its projection."""
    batch = build_batch([(window, projected, condition)], net,
                        condition.planned_trajectory.dt, use_positional)
    with torch.no_grad():
        agent_geo, map_pts, exist_logits, hidden = net.core(batch)
    agent_geo = agent_geo[0].numpy()
    map_pts = map_pts[0].numpy()
    existence = torch.sigmoid(exist_logits[0]).numpy()
    hidden = hidden[0].numpy()

    newest = window[-1]
    n_agents = len(newest.agents)
    agents = []
    for i, anchor in enumerate(projected.agents):
        if anchor is None:
            agents.append((None, None))
            continue
        heading = normalize_heading(agent_geo[i, 3], agent_geo[i, 4])
        out = AgentAnchor(
            id=anchor.id,
            center=agent_geo[i, 0:3],
            size=anchor.size,
            heading=np.array(heading),
            velocity=agent_geo[i, 5:8],
            class_label=anchor.class_label,
            existence=float(np.clip(existence[i], 0.0, 1.0)),
        )
        agents.append((out, InstanceFeature(hidden[i])))
    maps = []
    for j, anchor in enumerate(projected.maps):
        if anchor is None:
            maps.append((None, None))
            continue
        out = MapAnchor(
            id=anchor.id,
            points=map_pts[j],
            class_label=anchor.class_label,
            existence=float(np.clip(existence[n_agents + j], 0.0, 1.0)),
        )
        maps.append((out, InstanceFeature(hidden[n_agents + j])))

    step = alignment.ego_motion_step(newest.ego, condition)
    return InstanceSet(
        frame_index=newest.frame_index + 1,
        ego=alignment.advance_ego(newest.ego, step),
        agents=tuple(agents),
        maps=tuple(maps),
    )


Planner = Callable[[Sequence[InstanceSet], float], ActionCondition]


def rollout(
    queue: InstanceMemoryQueue,
    conditions: dict[int, ActionCondition],
    config: RolloutConfig,
    net: ForecasterNet,
    planner: Optional[Planner] = None,
    use_positional: bool = True,
    use_projection: bool = True,
) -> list[InstanceSet]:
    """Autoregressive forecast of the next f frames.

    Each step takes the action condition (given for historical frames,
    otherwise from the planner), kinematically projects the newest frame,
    decodes the next one, and pushes it back into the queue. With
    use_projection off the decoder refines held-in-place anchors instead.
    """
    futures = []
    for _ in range(config.f):
        t = queue.newest_index
        window, _ = queue.window_padded(t, config.m)
        newest = window[-1]
        if t in conditions:
            condition = conditions[t]
        else:
            if planner is None:
                raise ValueError(f"no condition for frame {t} and no planner")
            history = queue.window_padded(t, min(config.h, config.m))[0]
            prev = conditions.get(t - 1)
            prev_speed = prev.speed if prev is not None else float(
                np.linalg.norm(newest.ego.velocity[:2])
            )
            condition = planner(history, prev_speed)
            conditions[t] = condition
        step = alignment.ego_motion_step(newest.ego, condition)
        if use_projection:
            projected = alignment.project_instances(newest, step)
        else:
            projected = alignment.ProjectedInstances(
                agents=tuple(a for a, _ in newest.agents),
                maps=tuple(m for m, _ in newest.maps),
            )
        nxt = decoder_step(window, projected, condition, net, use_positional)
        queue.push(nxt)
        futures.append(nxt)
    return futures


@dataclass
class TrainingSample:
    window: tuple[InstanceSet, ...]
    projected: alignment.ProjectedInstances
    condition: ActionCondition
    target: InstanceSet


def _target_tensors(samples: Sequence[TrainingSample], cfg: ForecasterConfig):
    geo, pts, exists, agent_valid, map_valid = [], [], [], [], []
    for sample in samples:
        g, av = [], []
        for anchor, _ in sample.target.agents:
            if anchor is None:
                g.append(np.zeros(8))
                av.append(False)
            else:
                g.append(np.concatenate([anchor.center, anchor.heading, anchor.velocity]))
                av.append(True)
        p, mv = [], []
        for anchor, _ in sample.target.maps:
            if anchor is None:
                p.append(np.zeros((cfg.map_points, 2)))
                mv.append(False)
            else:
                p.append(anchor.points)
                mv.append(True)
        geo.append(g)
        pts.append(p)
        exists.append(av + mv)
        agent_valid.append(av)
        map_valid.append(mv)
    return (
        torch.as_tensor(np.asarray(geo), dtype=DTYPE),
        torch.as_tensor(np.asarray(pts), dtype=DTYPE),
        torch.as_tensor(np.asarray(exists), dtype=DTYPE),
        torch.as_tensor(np.asarray(agent_valid), dtype=torch.bool),
        torch.as_tensor(np.asarray(map_valid), dtype=torch.bool),
    )


EXISTENCE_WEIGHT = 0.2


def forecast_loss(
    net: ForecasterNet,
    samples: Sequence[TrainingSample],
    dt: float,
    use_positional: bool = True,
) -> torch.Tensor:
    """Smooth-L1 anchor regression over occupied target slots plus
    existence BCE over all slots, weighted 1.0 : 0.2."""
    batch = build_batch(
        [(s.window, s.projected, s.condition) for s in samples], net, dt, use_positional
    )
    agent_geo, map_pts, exist_logits, _ = net.core(batch)
    t_geo, t_pts, t_exist, a_valid, m_valid = _target_tensors(samples, net.config)

    losses = []
    if a_valid.any():
        err = nn.functional.smooth_l1_loss(
            agent_geo[a_valid], t_geo[a_valid], reduction="none"
        )
        losses.append(err.reshape(-1))
    if m_valid.any():
        err = nn.functional.smooth_l1_loss(
            map_pts[m_valid], t_pts[m_valid], reduction="none"
        )
        losses.append(err.reshape(-1))
    regression = torch.cat(losses).mean() if losses else exist_logits.sum() * 0.0
    bce = nn.functional.binary_cross_entropy_with_logits(exist_logits, t_exist)
    return regression + EXISTENCE_WEIGHT * bce


def train_step(
    net: ForecasterNet,
    samples: Sequence[TrainingSample],
    dt: float,
    use_positional: bool = True,
) -> tuple[float, torch.Tensor]:
    """One teacher-forced step: returns the loss and the flat gradient."""
    net.zero_grad(set_to_none=False)
    loss = forecast_loss(net, samples, dt, use_positional)
    if not torch.isfinite(loss):
        raise NaNLoss(f"non-finite forecaster loss {loss.item()!r} on batch of {len(samples)}")
    loss.backward()
    grads = [
        p.grad.reshape(-1) if p.grad is not None else torch.zeros_like(p).reshape(-1)
        for p in net.parameters()
    ]
    return float(loss.item()), torch.cat(grads)


def training_samples(scenario_frames, scenario_conditions, config: RolloutConfig):
    """Teacher-forced samples over one scenario's precomputed views."""
    samples = []
    duration = len(scenario_frames)
    for t in range(config.m, duration - 1):
        window = tuple(scenario_frames[t - config.m : t + 1])
        condition = scenario_conditions[t]
        step = alignment.ego_motion_step(window[-1].ego, condition)
        projected = alignment.project_instances(window[-1], step)
        samples.append(
            TrainingSample(
                window=window, projected=projected,
                condition=condition, target=scenario_frames[t + 1],
            )
        )
    return samples


def save_weights(net: nn.Module) -> dict:
    return {
        name: tensor.detach().numpy().reshape(-1).tolist()
        for name, tensor in net.state_dict().items()
    }


def load_weights(net: nn.Module, weights: dict) -> None:
    state = net.state_dict()
    for name, values in weights.items():
        if name not in state:
            raise ShapeMismatch(f"unknown weight key {name!r}")
        flat = torch.as_tensor(values, dtype=DTYPE)
        if flat.numel() != state[name].numel():
            raise ShapeMismatch(
                f"weight {name!r} holds {flat.numel()} values, expected {state[name].numel()}"
            )
        state[name] = flat.reshape(state[name].shape)
    net.load_state_dict(state)
