"""Hashing, session binding and bit-level measurement primitives.

Bit order for every bit index in this package: bit 0 is the most
significant bit of octet 0, bit 8 the MSB of octet 1, and so on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

DIGEST_BYTES = 32
NONCE_BYTES = 16
ID_BYTES = 8


@dataclass(frozen=True)
class Digest256:
    value: bytes

    def __post_init__(self):
        if len(self.value) != DIGEST_BYTES:
            raise ValueError(f"digest must be {DIGEST_BYTES} octets, got {len(self.value)}")

    def __bytes__(self) -> bytes:
        return self.value

    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "Digest256":
        return cls(bytes.fromhex(text))

    def __repr__(self) -> str:
        return f"Digest256({self.value.hex()[:16]}...)"


@dataclass(frozen=True)
class Signature:
    """Raw chiplet signature of ``bits`` bits, packed MSB-first."""

    value: bytes
    bits: int = field(default=-1)

    def __post_init__(self):
        if not self.value:
            raise ValueError("signature must be non-empty")
        if self.bits == -1:
            object.__setattr__(self, "bits", 8 * len(self.value))
        if not 0 < self.bits <= 8 * len(self.value) or len(self.value) != (self.bits + 7) // 8:
            raise ValueError(f"bit length {self.bits} inconsistent with {len(self.value)} octets")


@dataclass(frozen=True)
class SessionContext:
    session_id: int
    nonce: bytes

    def __post_init__(self):
        if not 0 <= self.session_id < 2**64:
            raise ValueError("session_id must fit in 64 bits")
        if len(self.nonce) != NONCE_BYTES:
            raise ValueError(f"nonce must be {NONCE_BYTES} octets")

    def encode(self) -> bytes:
        return self.nonce + self.session_id.to_bytes(ID_BYTES, "big")

    @classmethod
    def decode(cls, data: bytes) -> "SessionContext":
        if len(data) != NONCE_BYTES + ID_BYTES:
            raise ValueError("malformed session context")
        return cls(int.from_bytes(data[NONCE_BYTES:], "big"), data[:NONCE_BYTES])


class SessionSource:
    """Issues session contexts with strictly increasing ids and fresh nonces.

    Nonces are ``sha256(tag || seed || counter)`` truncated to 128 bits, so a
    run is reproducible from its seed. A repeated nonce is skipped rather than
    reissued.
    """

    def __init__(self, seed: int, first_session: int = 1):
        self.seed = seed % 2**64
        self._next_id = first_session
        self._counter = 0
        self._issued: set[bytes] = set()

    def next_context(self) -> SessionContext:
        while True:
            self._counter += 1
            nonce = hashlib.sha256(
                b"authentree/nonce"
                + self.seed.to_bytes(8, "big")
                + self._counter.to_bytes(8, "big")
            ).digest()[:NONCE_BYTES]
            if nonce not in self._issued:
                break
        self._issued.add(nonce)
        ctx = SessionContext(self._next_id, nonce)
        self._next_id += 1
        return ctx


def sha256(data: bytes) -> Digest256:
    return Digest256(hashlib.sha256(data).digest())


def session_digest(sig: Signature, ctx: SessionContext, target_id: int) -> Digest256:
    """Bind a signature to a session: ``sha256(sig || nonce || session_id || target_id)``."""
    return sha256(sig.value + ctx.nonce + ctx.session_id.to_bytes(ID_BYTES, "big")
                  + target_id.to_bytes(ID_BYTES, "big"))


BytesLike = Union[bytes, bytearray, Digest256]


def hamming_distance(a: BytesLike, b: BytesLike) -> int:
    a, b = bytes(a), bytes(b)
    if len(a) != len(b):
        raise ValueError("hamming distance needs equal-length inputs")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).bit_count()


def flip_bits(data: bytes, positions: Iterable[int]) -> bytes:
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise ValueError("duplicate flip position")
    out = bytearray(data)
    nbits = 8 * len(out)
    for pos in positions:
        if not 0 <= pos < nbits:
            raise ValueError("bit index exceeds data length")
        out[pos >> 3] ^= 0x80 >> (pos & 7)
    return bytes(out)


def load_vectors(path: Union[str, Path]) -> list[tuple[bytes, Digest256]]:
    """Read ``input_hex digest_hex`` lines; ``-`` stands for the empty message."""
    vectors = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        msg, digest = line.split()
        vectors.append((b"" if msg == "-" else bytes.fromhex(msg), Digest256.from_hex(digest)))
    return vectors
