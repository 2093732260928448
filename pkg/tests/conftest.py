import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenecast import world
from scenecast.scene import MAP_POINTS


def make_frozen_scenario(n_agents: int = 3, duration: int = 10) -> world.Scenario:
    """A world where nothing moves: stationary ego, stationary agents."""
    config = world.ScenarioConfig(
        seed=0, n_agents=n_agents, n_map_elements=2, duration=duration,
        motion_mix={"constant-velocity": 1.0},
    )
    frames = duration
    agents = []
    rng = np.random.default_rng(99)
    for i in range(n_agents):
        pos = rng.uniform(8.0, 30.0, size=2)
        yaw = float(rng.uniform(-np.pi, np.pi))
        agents.append(
            world.AgentTrack(
                id=i, class_label="vehicle", size=np.array([2.0, 4.5, 1.6]),
                model="constant-velocity",
                xy=np.tile(pos, (frames, 1)), yaw=np.full(frames, yaw),
                velocity=np.zeros((frames, 2)), turn_rate=np.zeros(frames),
            )
        )
    s = np.linspace(-20.0, 60.0, MAP_POINTS)
    maps = tuple(
        world.MapElement(
            id=100 + k, class_label="lane-divider",
            points=np.stack([s, np.full_like(s, 3.5 * (k + 1))], axis=1),
        )
        for k in range(2)
    )
    return world.Scenario(
        config=config,
        ego_xy=np.zeros((frames, 2)), ego_yaw=np.zeros(frames),
        agents=tuple(agents), maps=maps,
    )


@pytest.fixture
def frozen_scenario():
    return make_frozen_scenario()
