"""Behavioral chiplet model: ideal strong PUF, hash engine cost, responses."""

from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .crypto import Digest256, SessionContext, Signature, flip_bits, session_digest

CHALLENGE_BYTES = 16
DEFAULT_HASH_CYCLES = 96
TIMEOUT_FACTOR = 10


class Role(enum.Enum):
    INTEGRATOR = "integrator"
    THIRD_PARTY = "third_party"


class Behavior(enum.Enum):
    HONEST = "honest"
    # wrong PUF secret under a genuine id
    COUNTERFEIT = "counterfeit"
    SILENT = "silent"
    # answers with a digest captured in an earlier session
    REPLAY = "replay"
    # integrator only: vouches Match for every target
    COLLUDE = "collude"
    # integrator only: keeps its shares and verdicts to itself
    WITHHOLD = "withhold"
    # flips fixed signature bits before hashing (fault injection)
    TAMPER = "tamper"


@dataclass
class Chiplet:
    id: int
    role: Role
    puf_secret: bytes = field(repr=False)
    hash_cycles: int = DEFAULT_HASH_CYCLES
    behavior: Behavior = Behavior.HONEST
    puf_bit_error_rate: float = 0.0
    replay_digest: Optional[Digest256] = field(default=None, repr=False)
    tamper_bits: tuple[int, ...] = ()
    busy_cycles: int = 0

    def __post_init__(self):
        if not 0 <= self.id < 2**64:
            raise ValueError("chiplet id must fit in 64 bits")
        if self.hash_cycles < 1:
            raise ValueError("hash_cycles must be >= 1")
        if len(self.puf_secret) != 32:
            raise ValueError("puf_secret must be 256 bits")

    @property
    def honest(self) -> bool:
        return self.behavior is Behavior.HONEST

    @property
    def timeout_cycles(self) -> int:
        return TIMEOUT_FACTOR * self.hash_cycles


def derive_secret(seed: int, chiplet_id: int, tag: str = "puf") -> bytes:
    return hashlib.sha256(
        f"authentree/{tag}".encode() + (seed % 2**64).to_bytes(8, "big") + chiplet_id.to_bytes(8, "big")
    ).digest()


def puf_response(puf_secret: bytes, challenge: bytes, bits: int) -> Signature:
    """Noiseless strong-PUF model with counter-mode extension past 256 bits."""
    if bits < 1:
        raise ValueError("signature length must be positive")
    nbytes = (bits + 7) // 8
    out = hashlib.sha256(puf_secret + challenge).digest()
    i = 1
    while len(out) < nbytes:
        out += hashlib.sha256(puf_secret + challenge + i.to_bytes(8, "big")).digest()
        i += 1
    out = bytearray(out[:nbytes])
    if bits % 8:
        out[-1] &= (0xFF << (8 - bits % 8)) & 0xFF
    return Signature(bytes(out), bits)


def generate_signature(chiplet: Chiplet, challenge: bytes, bits: int = 256,
                       rng: Optional[random.Random] = None) -> Signature:
    sig = puf_response(chiplet.puf_secret, challenge, bits)
    if chiplet.puf_bit_error_rate > 0:
        # noisy readout; no fuzzy extraction, so any flipped bit fails authentication
        rng = rng or random.Random()
        noisy = [i for i in range(bits) if rng.random() < chiplet.puf_bit_error_rate]
        sig = Signature(flip_bits(sig.value, noisy), bits)
    return sig


def respond_to_auth(chiplet: Chiplet, challenge: bytes, ctx: SessionContext,
                    bits: int = 256) -> Optional[Digest256]:
    """Session-bound response, or ``None`` for a chiplet that stays silent.

    Charges ``hash_cycles`` to the chiplet's busy time whenever a digest is
    computed.
    """
    if chiplet.behavior is Behavior.SILENT:
        return None
    if chiplet.behavior is Behavior.REPLAY and chiplet.replay_digest is not None:
        return chiplet.replay_digest
    sig = generate_signature(chiplet, challenge, bits)
    if chiplet.behavior is Behavior.TAMPER:
        sig = Signature(flip_bits(sig.value, chiplet.tamper_bits), bits)
    chiplet.busy_cycles += chiplet.hash_cycles
    return session_digest(sig, ctx, chiplet.id)


class ManifestError(KeyError):
    pass


@dataclass
class Manifest:
    """Golden signatures for one enrollment challenge, held by the SiP designer."""

    challenge: bytes
    entries: dict[int, Signature]

    @classmethod
    def enroll(cls, chiplets, challenge: bytes, bits: int = 256) -> "Manifest":
        return cls(challenge, {c.id: puf_response(c.puf_secret, challenge, bits) for c in chiplets})

    @property
    def signature_bits(self) -> int:
        return next(iter(self.entries.values())).bits

    def to_json(self) -> str:
        return json.dumps({
            "challenge": self.challenge.hex(),
            "entries": {str(k): v.value.hex() for k, v in sorted(self.entries.items())},
            "signature_length_bits": self.signature_bits,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Manifest":
        doc = json.loads(text)
        entries = {}
        for key, hexsig in doc["entries"].items():
            value = bytes.fromhex(hexsig)
            entries[int(key)] = Signature(value, doc.get("signature_length_bits", 8 * len(value)))
        return cls(bytes.fromhex(doc["challenge"]), entries)


def expected_digest(manifest: Manifest, chiplet_id: int, challenge: bytes,
                    ctx: SessionContext) -> Digest256:
    try:
        sig = manifest.entries[chiplet_id]
    except KeyError:
        raise ManifestError("chiplet not in manifest") from None
    if challenge != manifest.challenge:
        raise ValueError("challenge differs from the enrollment challenge")
    return session_digest(sig, ctx, chiplet_id)
