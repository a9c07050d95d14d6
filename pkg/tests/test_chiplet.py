import random
import statistics

import pytest

from authentree.chiplet import (
    Behavior, Chiplet, Manifest, ManifestError, Role, derive_secret, expected_digest,
    generate_signature, puf_response, respond_to_auth,
)
from authentree.crypto import SessionContext, hamming_distance

CHALLENGE = bytes(range(16))


def make(cid, seed=1, **kw):
    return Chiplet(cid, Role.THIRD_PARTY, derive_secret(seed, cid), **kw)


def test_signature_deterministic():
    c = make(5)
    assert generate_signature(c, CHALLENGE) == generate_signature(c, CHALLENGE)


def test_signature_lengths():
    c = make(5)
    assert len(generate_signature(c, CHALLENGE, 512).value) == 64
    assert generate_signature(c, CHALLENGE, 512).bits == 512
    odd = generate_signature(c, CHALLENGE, 12)
    assert len(odd.value) == 2 and odd.value[1] & 0x0F == 0
    # longer responses extend shorter ones
    assert generate_signature(c, CHALLENGE, 512).value[:32] == generate_signature(c, CHALLENGE).value


def test_distinct_secrets_differ_by_half():
    rng = random.Random(0)
    hd = []
    for _ in range(1000):
        a = puf_response(rng.randbytes(32), CHALLENGE, 256)
        b = puf_response(rng.randbytes(32), CHALLENGE, 256)
        hd.append(hamming_distance(a.value, b.value))
    assert 120 <= statistics.mean(hd) <= 136


def test_honest_response_matches_manifest():
    chips = [make(i) for i in (1, 2, 3)]
    manifest = Manifest.enroll(chips, CHALLENGE)
    ctx = SessionContext(4, bytes(16))
    for c in chips:
        assert respond_to_auth(c, CHALLENGE, ctx) == expected_digest(manifest, c.id, CHALLENGE, ctx)


def test_counterfeit_response_mismatches():
    genuine = make(9)
    manifest = Manifest.enroll([genuine], CHALLENGE)
    fake = Chiplet(9, Role.THIRD_PARTY, derive_secret(1, 9, "counterfeit"), behavior=Behavior.COUNTERFEIT)
    ctx = SessionContext(1, bytes(16))
    assert respond_to_auth(fake, CHALLENGE, ctx) != expected_digest(manifest, 9, CHALLENGE, ctx)


def test_noisy_puf_fails_without_extraction():
    c = make(3, puf_bit_error_rate=0.05)
    manifest = Manifest.enroll([make(3)], CHALLENGE)
    ctx = SessionContext(1, bytes(16))
    assert respond_to_auth(c, CHALLENGE, ctx) != expected_digest(manifest, 3, CHALLENGE, ctx)


def test_silent_and_busy_time():
    quiet = make(2, behavior=Behavior.SILENT)
    assert respond_to_auth(quiet, CHALLENGE, SessionContext(1, bytes(16))) is None
    assert quiet.busy_cycles == 0
    c = make(2, hash_cycles=40)
    respond_to_auth(c, CHALLENGE, SessionContext(1, bytes(16)))
    respond_to_auth(c, CHALLENGE, SessionContext(2, bytes(16)))
    assert c.busy_cycles == 80
    assert c.timeout_cycles == 400


def test_manifest_json_round_trip():
    manifest = Manifest.enroll([make(i) for i in (1, 7, 300)], CHALLENGE, 128)
    back = Manifest.from_json(manifest.to_json())
    assert back == manifest
    assert back.signature_bits == 128


def test_unknown_chiplet():
    manifest = Manifest.enroll([make(1)], CHALLENGE)
    with pytest.raises(ManifestError, match="chiplet not in manifest"):
        expected_digest(manifest, 2, CHALLENGE, SessionContext(1, bytes(16)))


def test_session_binding_changes_response():
    c = make(1)
    a = respond_to_auth(c, CHALLENGE, SessionContext(1, bytes(16)))
    b = respond_to_auth(c, CHALLENGE, SessionContext(2, bytes(16)))
    assert a != b


def test_bad_chiplet_parameters():
    with pytest.raises(ValueError):
        Chiplet(1, Role.INTEGRATOR, bytes(31))
    with pytest.raises(ValueError):
        Chiplet(1, Role.INTEGRATOR, bytes(32), hash_cycles=0)
