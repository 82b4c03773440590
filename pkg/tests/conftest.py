import pytest

from pubcluster.domain import (
    ClusterConfig,
    FitnessWeights,
    GaParams,
    NodeClass,
    NodeSpec,
    ThermalParams,
)
from pubcluster.world import World


def make_config(
    levels=(1, 1, 1),
    controller=1,
    tick_seconds=3600.0,
    boot_ticks=3,
    ga=None,
    thermal=None,
    **kw,
):
    """One node per entry of ``levels``, node_ids 1..n."""
    nodes = [
        NodeSpec(node_id=i + 1, node_class=NodeClass(level), controller_id=controller, boot_ticks=boot_ticks)
        for i, level in enumerate(levels)
    ]
    return ClusterConfig(
        nodes=nodes,
        ga=ga or GaParams(seed=42),
        thermal=thermal or ThermalParams(),
        tick_seconds=tick_seconds,
        **kw,
    )


@pytest.fixture
def weights():
    return FitnessWeights()


@pytest.fixture
def world():
    return World(make_config(), seed=7)


def issue(world, role="Anonymous"):
    return world.issue_token(role).value
