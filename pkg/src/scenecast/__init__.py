"""Instance-level driving scene forecasting and safety-aware planning."""

__version__ = "0.1.0"

from .scene import (  # noqa: F401
    ActionCondition,
    AgentAnchor,
    EgoAnchor,
    InstanceFeature,
    InstanceSet,
    MapAnchor,
    MultiModalTrajectory,
    RolloutConfig,
    Trajectory,
)
