"""Pick the safest ego trajectory among candidates and apply its adjustment.

Candidates come from three origins: the baseline planner, the rollout's own
ego plan, and the refinement pass. Each is scored against the union of the
baseline and refined agent predictions; a candidate is eligible only when it
collides with neither set. Among eligible candidates the lowest adjustment
cost wins, with ties (within 1e-9) broken refined > future > base. If every
candidate collides, the globally cheapest one is taken.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .safety import (
    AdjustmentVector,
    SafetyConfig,
    adjustment_cost,
    apply_adjustment,
    collision_detect,
    safety_adjustment,
)
from .scene import AgentAnchor, EgoAnchor, Trajectory

PROVENANCE_ORDER = ("refined", "future", "base")


@dataclass(frozen=True)
class CandidateSet:
    base: Trajectory
    future: Trajectory
    refined: Trajectory

    def __post_init__(self):
        lengths = {len(self.base), len(self.future), len(self.refined)}
        dts = {self.base.dt, self.future.dt, self.refined.dt}
        if len(lengths) != 1 or len(dts) != 1:
            raise ValueError("candidates must share length and dt")

    def items(self):
        return (("base", self.base), ("future", self.future), ("refined", self.refined))


@dataclass(frozen=True)
class CandidateReport:
    provenance: str
    cost: float
    collides_base: bool
    collides_refined: bool
    adjustment: AdjustmentVector

    @property
    def eligible(self) -> bool:
        return not (self.collides_base or self.collides_refined)


@dataclass(frozen=True)
class SelectionReport:
    candidates: tuple[CandidateReport, ...]
    chosen: str
    final: Trajectory
    fallback: bool

    def candidate(self, provenance: str) -> CandidateReport:
        for cand in self.candidates:
            if cand.provenance == provenance:
                return cand
        raise KeyError(provenance)


def choose_provenance(
    eligible: dict[str, bool], costs: dict[str, float], tie_tol: float = 1e-9
) -> tuple[str, bool]:
    """The decision rule alone: lowest cost among eligible candidates, ties
    to refined > future > base; when nothing is eligible, lowest cost
    overall. Returns (provenance, fallback_fired)."""
    pool = [p for p in PROVENANCE_ORDER if eligible.get(p)]
    fallback = not pool
    if fallback:
        pool = list(PROVENANCE_ORDER)
    best = min(costs[p] for p in pool)
    for provenance in PROVENANCE_ORDER:
        if provenance in pool and costs[provenance] <= best + tie_tol:
            return provenance, fallback
    raise RuntimeError("unreachable")


def select_trajectory(
    candidates: CandidateSet,
    ego_anchor: EgoAnchor,
    agents: Sequence[AgentAnchor],
    agent_trajs_base: Sequence[Trajectory],
    agent_trajs_refined: Sequence[Trajectory],
    config: SafetyConfig,
) -> SelectionReport:
    union_agents = list(agents) + list(agents)
    union_trajs = list(agent_trajs_base) + list(agent_trajs_refined)

    reports = []
    for provenance, traj in candidates.items():
        adjustment = safety_adjustment(traj, union_agents, union_trajs, config, ego_anchor)
        reports.append(
            CandidateReport(
                provenance=provenance,
                cost=adjustment_cost(adjustment),
                collides_base=any(
                    collision_detect(traj, ego_anchor, agents, agent_trajs_base)
                ),
                collides_refined=any(
                    collision_detect(traj, ego_anchor, agents, agent_trajs_refined)
                ),
                adjustment=adjustment,
            )
        )

    by_name = {r.provenance: r for r in reports}
    chosen, fallback = choose_provenance(
        {p: by_name[p].eligible for p in by_name},
        {p: by_name[p].cost for p in by_name},
    )
    final = apply_adjustment(dict(candidates.items())[chosen], by_name[chosen].adjustment)
    return SelectionReport(
        candidates=tuple(reports), chosen=chosen, final=final, fallback=fallback
    )
