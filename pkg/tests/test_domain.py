import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pubcluster import errors
from pubcluster.domain import (
    CONTROLLER_NODE_LIMIT,
    ClusterConfig,
    NodeClass,
    NodeSpec,
    config_to_json,
    parse_cluster_config,
)


def node_doc(node_id, level=1, controller=1):
    return {"node_id": node_id, "class": {"level": level}, "controller_id": controller}


def config_doc(nodes):
    return json.dumps({"nodes": nodes})


class TestNodeClass:
    def test_total_order_uses_level_only(self):
        assert NodeClass(0, "i486") < NodeClass(7, "athlon")
        assert NodeClass(3, "a") == NodeClass(3, "b")
        assert sorted([NodeClass(5), NodeClass(1), NodeClass(9)])[0].level == 1

    def test_level_range_enforced(self):
        with pytest.raises(errors.InvalidParameter):
            NodeClass(10)
        with pytest.raises(errors.InvalidParameter):
            NodeClass(-1)


class TestParseClusterConfig:
    def test_minimal_two_node_config(self):
        cfg = parse_cluster_config(config_doc([node_doc(1), node_doc(2)]))
        assert len(cfg.nodes) == 2
        assert cfg.admission.max_nodes_anonymous == 3
        assert cfg.admission.max_lease_hours_anonymous == 72

    def test_controller_over_capacity_at_46(self):
        nodes = [node_doc(i) for i in range(1, 47)]
        with pytest.raises(errors.ControllerOverCapacity):
            parse_cluster_config(config_doc(nodes))
        # 45 on one controller is fine
        assert parse_cluster_config(config_doc(nodes[:45]))

    def test_duplicate_node_id(self):
        with pytest.raises(errors.DuplicateNodeId):
            parse_cluster_config(config_doc([node_doc(1), node_doc(1)]))

    def test_malformed_json(self):
        with pytest.raises(errors.MalformedInput):
            parse_cluster_config(b"{nope")
        with pytest.raises(errors.MalformedInput):
            parse_cluster_config(b"[1,2,3]")

    def test_out_of_range_parameter(self):
        doc = {"nodes": [node_doc(1)], "thermal": {"cooling_coeff": 0.0}}
        with pytest.raises(errors.InvalidParameter):
            parse_cluster_config(json.dumps(doc))

    def test_round_trip(self):
        doc = {
            "nodes": [node_doc(1, level=0), node_doc(2, level=7, controller=2)],
            "tick_seconds": 0.5,
            "ga": {"seed": 99, "population": 10},
            "admission": {"max_nodes_anonymous": 2},
        }
        cfg = parse_cluster_config(json.dumps(doc))
        again = parse_cluster_config(config_to_json(cfg))
        assert cfg == again


node_ids = st.lists(st.integers(min_value=1, max_value=200), min_size=1, max_size=50, unique=True)


@settings(max_examples=60, deadline=None)
@given(
    ids=node_ids,
    dup=st.booleans(),
    bad_coeff=st.booleans(),
    data=st.data(),
)
def test_parse_accepts_iff_invariants_hold(ids, dup, bad_coeff, data):
    nodes = [node_doc(i, level=data.draw(st.integers(0, 9))) for i in ids]
    if dup:
        nodes.append(dict(nodes[0]))
    doc = {"nodes": nodes}
    if bad_coeff:
        doc["thermal"] = {"cooling_coeff": data.draw(st.sampled_from([0.0, -0.5, 1.5]))}
    raw = json.dumps(doc)
    if dup and bad_coeff:
        # both defects present: either rejection is acceptable
        with pytest.raises((errors.DuplicateNodeId, errors.InvalidParameter)):
            parse_cluster_config(raw)
    elif dup:
        with pytest.raises(errors.DuplicateNodeId):
            parse_cluster_config(raw)
    elif bad_coeff:
        with pytest.raises(errors.InvalidParameter):
            parse_cluster_config(raw)
    else:
        cfg = parse_cluster_config(raw)
        assert {s.node_id for s in cfg.nodes} == set(ids)
