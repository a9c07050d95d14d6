import itertools
import random

import pytest

from authentree.crypto import sha256
from authentree.sharing import (
    Share, SharingError, SharingPolicy, aggregate_digest, default_threshold, gf_inv, gf_mul,
    interpolate, reconstruct, split, verify_commitment,
)


def slow_mul(a, b):
    """Shift-and-add multiplication reduced by x^8+x^4+x^3+x+1."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        if a & 0x100:
            a ^= 0x11B
        b >>= 1
    return out


def test_field_tables_match_bitwise_oracle():
    for a in range(256):
        for b in range(256):
            assert gf_mul(a, b) == slow_mul(a, b)


def test_field_inverse():
    for a in range(1, 256):
        assert slow_mul(a, gf_inv(a)) == 1


def test_policy_bounds():
    SharingPolicy(3, 2)
    for n, t in [(3, 1), (3, 4), (256, 2), (1, 1)]:
        with pytest.raises(SharingError, match="threshold out of range"):
            SharingPolicy(n, t)


def test_default_threshold():
    assert [default_threshold(n) for n in (3, 4, 5, 6, 8)] == [2, 3, 4, 4, 6]


def test_full_set_round_trip():
    rng = random.Random(0)
    secret = rng.randbytes(32)
    policy = SharingPolicy(3, 3)
    assert reconstruct(split(secret, policy, rng), policy) == secret


def test_every_3_of_5_subset():
    rng = random.Random(1)
    secret = rng.randbytes(32)
    policy = SharingPolicy(5, 3)
    shares = split(secret, policy, rng)
    subsets = list(itertools.combinations(shares, 3))
    assert len(subsets) == 10
    assert all(reconstruct(s, policy) == secret for s in subsets)


def test_two_shares_do_not_reveal_3_of_5():
    rng = random.Random(2)
    policy = SharingPolicy(5, 3)
    hits = 0
    for _ in range(1000):
        secret = rng.randbytes(32)
        shares = split(secret, policy, rng)
        pair = rng.sample(shares, 2)
        hits += interpolate(pair) == secret
    assert hits == 0


def test_errors():
    rng = random.Random(3)
    policy = SharingPolicy(4, 3)
    shares = split(rng.randbytes(16), policy, rng)
    with pytest.raises(SharingError, match="insufficient shares"):
        reconstruct(shares[:2], policy)
    bad = Share(shares[1].index, bytes([shares[1].payload[0] ^ 1]) + shares[1].payload[1:],
                shares[1].commitment)
    with pytest.raises(SharingError, match="corrupted share: index 2"):
        reconstruct([shares[0], bad, shares[2]], policy)
    with pytest.raises(SharingError, match="duplicate share index"):
        reconstruct([shares[0], shares[0], shares[2]], policy)
    with pytest.raises(SharingError):
        split(b"", policy, rng)


def test_verify_commitment():
    rng = random.Random(4)
    share = split(rng.randbytes(8), SharingPolicy(3, 2), rng)[0]
    assert verify_commitment(share)
    assert not verify_commitment(Share(share.index, bytes(8), share.commitment))
    assert not verify_commitment(Share(share.index + 1, share.payload, share.commitment))


def test_correctness_exhaustive_small_policies():
    rng = random.Random(5)
    for n in range(2, 9):
        for t in range(2, n + 1):
            secret = rng.randbytes(32)
            policy = SharingPolicy(n, t)
            shares = split(secret, policy, rng)
            for subset in itertools.combinations(shares, t):
                assert reconstruct(subset, policy) == secret


def test_single_share_is_private():
    # t=2: with share 1 fixed, each candidate share 2 maps to a distinct secret
    rng = random.Random(6)
    first = split(b"\x5a", SharingPolicy(2, 2), rng)[0]
    secrets = [interpolate([first, Share(2, bytes([y]), sha256(b""))]) for y in range(256)]
    assert sorted(s[0] for s in secrets) == list(range(256))


def test_deterministic_given_seed():
    policy = SharingPolicy(5, 3)
    a = split(b"secret", policy, random.Random(9))
    b = split(b"secret", policy, random.Random(9))
    assert a == b
    assert [s.index for s in a] == [1, 2, 3, 4, 5]
    assert all(len(s.payload) == 6 for s in a)


def test_extra_shares_use_lowest_indices():
    rng = random.Random(7)
    policy = SharingPolicy(5, 3)
    shares = split(b"abc", policy, rng)
    assert reconstruct(list(reversed(shares)), policy) == b"abc"


def test_share_serialization():
    rng = random.Random(8)
    share = split(rng.randbytes(32), SharingPolicy(4, 3), rng)[2]
    raw = share.to_bytes()
    assert len(raw) == 1 + 32 + 32
    assert Share.from_bytes(raw) == share


def test_aggregate_digest_full_and_degraded():
    rng = random.Random(10)
    secret = rng.randbytes(32)
    policy = SharingPolicy(4, 3)
    shares = split(secret, policy, rng)
    assert aggregate_digest(shares, 4, 32) == sha256(secret)
    assert aggregate_digest(shares[1:], 4, 32) != sha256(secret)
