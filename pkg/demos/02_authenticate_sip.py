# %% [markdown]
# Authenticating a small SiP
#
# Four integrators and four third-party chiplets on a star interposer. We run
# the shipped example scenarios and read the reports: who was trusted, which
# chiplets passed, and what the escalation rounds concluded.

# %%
from pathlib import Path

from authentree.cli import summarize
from authentree.config import load

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

# %%
for name in ("all_honest", "counterfeit", "faulty_link", "transient"):
    scenario = load(SCENARIOS / f"{name}.json")
    report = scenario.authenticate()
    print(f"--- {name}")
    print(summarize(scenario, report))

# %%
# the first-round votes behind the link-fault diagnosis
scenario = load(SCENARIOS / "faulty_link.json")
report = scenario.authenticate()
result = report.results[104]
for v in result.first_round:
    print(f"integrator {v.integrator_id} via {v.path}: {v.outcome.value}")
diag = result.diagnosis
print("classification:", diag.classification.value, "links:", sorted(diag.links), "rounds:", diag.rounds)

# %%
# benchmark-sized SiPs stay well under a microsecond on the critical path
for name in ("cva6", "nvdla", "riscv", "ariane", "or1200"):
    r = load(SCENARIOS / f"{name}.json").authenticate()
    print(f"{name:7s} {len(r.results):3d} chiplets  critical path {r.critical_path_cycles} cycles  "
          f"all authenticated: {r.all_authenticated}")
