from pathlib import Path

import pytest

from authentree.config import Scenario
from authentree.interposer import path_links

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"


def scenario_doc(kind="star", n_int=4, third=(10, 11, 12, 13), behaviors=None, faults=(), seed=7,
                 protocol=None, **node_extra):
    behaviors = behaviors or {}
    nodes = [{"id": i, "role": "integrator"} for i in range(1, n_int + 1)]
    nodes += [{"id": i, "role": "third_party"} for i in third]
    for node in nodes:
        if node["id"] in behaviors:
            node["behavior"] = behaviors[node["id"]]
        node.update(node_extra.get(f"n{node['id']}", {}))
    return {"schema": 1, "name": f"{kind}-test", "seed": seed,
            "topology": {"kind": kind, "nodes": nodes, "faults": list(faults)},
            "protocol": dict(protocol or {})}


def build(kind="star", **kw) -> Scenario:
    return Scenario.from_dict(scenario_doc(kind, **kw))


def last_hop(kind, integrator, target, **kw):
    """The final link of ``integrator``'s primary route to ``target``."""
    topo = build(kind, **kw).topology
    return list(path_links(topo.routes(integrator, target)[0])[-1])


@pytest.fixture
def scenarios_dir():
    return SCENARIOS
