# %% [markdown]
# Chiplet fault or link fault?
#
# Inject one problem at a time into three interposer shapes and compare the
# diagnosis with what was injected. Link faults and transients should never
# cost a genuine chiplet its place in the system.

# %%
from authentree.config import Scenario
from authentree.interposer import path_links


def doc(kind, behaviors=None, faults=()):
    nodes = [{"id": i, "role": "integrator"} for i in range(1, 5)]
    nodes += [{"id": i, "role": "third_party"} for i in range(10, 14)]
    for node in nodes:
        if node["id"] in (behaviors or {}):
            node["behavior"] = behaviors[node["id"]]
    return {"schema": 1, "seed": 3, "topology": {"kind": kind, "nodes": nodes, "faults": list(faults)}}


# %%
for kind in ("star", "mesh", "clique"):
    base = Scenario.from_dict(doc(kind))
    bad = list(path_links(base.topology.routes(1, 13)[0])[-1])
    cases = {
        "counterfeit": doc(kind, {13: "counterfeit"}),
        "corrupting link": doc(kind, faults=[{"link": bad, "state": "corrupting", "bits": [0]}]),
        "dropping link": doc(kind, faults=[{"link": bad, "state": "dropping"}]),
        "transient": doc(kind, faults=[{"link": bad, "state": "corrupting", "bits": [0],
                                         "from_cycle": 0, "to_cycle": 600}]),
    }
    for label, d in cases.items():
        report = Scenario.from_dict(d).authenticate()
        found = [(x.classification.value, sorted(x.links)) for x in report.diagnoses]
        print(f"{kind:6s} {label:16s} -> {found}  rejected {report.rejected}")
