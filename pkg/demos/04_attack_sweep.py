# %% [markdown]
# Attack sweep across signature lengths
#
# The digest is always 256 bits, so tampering, share removal and replay all
# land near 128 bits of Hamming distance whatever the signature length. The
# grid below is the same one `authentree attack --sweep` writes as CSV.

# %%
import numpy as np

from authentree.attacks import attack_clone, sweep, to_csv
from authentree.config import Scenario

doc = {
    "schema": 1, "seed": 11,
    "topology": {"kind": "star", "nodes": [{"id": i, "role": "integrator"} for i in range(1, 5)]
                 + [{"id": i, "role": "third_party"} for i in range(10, 14)]},
}
scenario = Scenario.from_dict(doc)

# %%
reports = sweep(scenario, trials=300)
print(to_csv(reports))

# %%
# pool every trial of one attack and compare with Binomial(256, 1/2)
flips = np.concatenate([r.distances for r in reports if r.attack == "bit_flip"])
print(f"bit_flip pooled: mean {flips.mean():.2f} (binomial 128.00), std {flips.std():.2f} (binomial 8.00)")

# %%
for perfect in (False, True):
    res = attack_clone(Scenario.from_dict(doc), target=12, perfect=perfect)
    print(f"clone perfect={perfect}: final {res.final.value}, flags {res.flags}")
