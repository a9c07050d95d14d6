# %% [markdown]
# Hashing, session binding and threshold sharing
#
# A walk through the building blocks: how much one flipped signature bit moves
# a SHA-256 digest, why a recorded response is useless in a new session, and
# how a 3-of-5 sharing hides an expected digest from any two integrators.

# %%
import random

import numpy as np

from authentree.crypto import SessionSource, Signature, flip_bits, hamming_distance, session_digest, sha256
from authentree.sharing import SharingPolicy, interpolate, reconstruct, split

rng = random.Random(0)

# %%
# avalanche: one bit in, about half the digest out
distances = []
for _ in range(1000):
    sig = rng.randbytes(32)
    distances.append(hamming_distance(sha256(sig), sha256(flip_bits(sig, [rng.randrange(256)]))))
distances = np.array(distances)
print(f"single-bit flip: mean HD {distances.mean():.2f}, std {distances.std():.2f}, "
      f"range {distances.min()}..{distances.max()} of 256")

# %%
# session binding: the same signature hashed under two sessions
source = SessionSource(seed=42)
first, second = source.next_context(), source.next_context()
sig = Signature(rng.randbytes(32))
a = session_digest(sig, first, target_id=7)
b = session_digest(sig, second, target_id=7)
print(f"session {first.session_id}: {a.hex()[:16]}...")
print(f"session {second.session_id}: {b.hex()[:16]}...  HD {hamming_distance(a, b)}")

# %%
# threshold sharing of an expected digest
policy = SharingPolicy(n=5, t=3)
secret = a.value
shares = split(secret, policy, rng)
print("any three shares:", reconstruct(shares[1:4], policy) == secret)
print("two shares interpolate to:", interpolate(shares[:2]).hex()[:16], "... (not the secret)")
