from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from edgesync.topology import (
    CLOUD,
    EdgeNode,
    MonitoringTerminal,
    Topology,
    TopologyError,
    TopologySpec,
    build_topology,
    validate,
)


def test_reference_layout_round_robin():
    t = build_topology(TopologySpec(200, (30, 5)))
    assert len(t.level(1)) == 30
    assert len(t.level(2)) == 5
    assert set(t.terminal_counts().values()) == {6, 7}
    # six street nodes under each district node
    for p in t.level(2):
        assert len(t.children(p.id)) == 6
        assert p.parent == CLOUD


def test_single_chain():
    t = build_topology(TopologySpec(1, (1,)))
    (n,) = t.nodes
    assert n.parent == CLOUD and n.connected_terminals == (0,)
    assert t.terminals[0].parent_en == n.id


def test_explicit_assignment():
    t = build_topology(TopologySpec(4, (2,), assignment=[3, 1]))
    assert t.terminal_counts() == {0: 3, 1: 1}


@pytest.mark.parametrize("spec", [
    TopologySpec(4, (2, 0)),
    TopologySpec(4, (2,), capacities=(1.0, 0.0)),
    TopologySpec(4, (2,), capacities=(-1.0,)),
    TopologySpec(4, (2,), assignment=[3, 1, 0]),
    TopologySpec(4, (2,), assignment=[2, 1]),
    TopologySpec(0, (2,)),
])
def test_build_rejects(spec):
    with pytest.raises(TopologyError):
        build_topology(spec)


def test_validate_ok():
    assert validate(build_topology(TopologySpec(10, (3, 2)))) == []


def test_validate_missing_parent():
    t = build_topology(TopologySpec(2, (1,)))
    bad = Topology((t.terminals[0], MonitoringTerminal(1, 1, None)), t.nodes)
    problems = validate(bad)
    assert any(p.startswith("terminal 1:") and "missing parent" in p for p in problems)


def test_validate_level_order():
    leaf = EdgeNode(0, 1, 1, 1.0, (0,))
    top = EdgeNode(1, 2, 0, 1.0)  # level-2 node hanging under a level-1 node
    t = Topology((MonitoringTerminal(0, 1, 0),), (leaf, top))
    problems = validate(t)
    assert any(p.startswith("node 1:") and "level-1 parent" in p for p in problems)


@given(st.integers(1, 300), st.integers(1, 40))
def test_round_robin_properties(n, m):
    t = build_topology(TopologySpec(n, (m,)))
    counts = list(t.terminal_counts().values())
    assert sum(counts) == n
    assert max(counts) - min(counts) <= 1
    assert t == build_topology(TopologySpec(n, (m,)))
