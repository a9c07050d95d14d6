"""Shamir threshold sharing over GF(2^8), applied octet-wise.

Field arithmetic uses the AES reduction polynomial x^8 + x^4 + x^3 + x + 1.
Every share carries a commitment ``sha256(index || payload)`` so a damaged
share can be told apart from a missing one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

from .crypto import DIGEST_BYTES, Digest256, sha256

_EXP = [0] * 512
_LOG = [0] * 256


def _build_tables():
    x = 1
    for i in range(255):
        _EXP[i] = x
        _LOG[x] = i
        # multiply by the generator 0x03
        x ^= (x << 1) ^ (0x11B if x & 0x80 else 0)
        x &= 0xFF
    for i in range(255, 512):
        _EXP[i] = _EXP[i - 255]


_build_tables()
# _MUL[c] maps every octet b to c*b, so bytes.translate scales a whole payload
_MUL = [bytes(_EXP[_LOG[a] + _LOG[b]] if a and b else 0 for b in range(256)) for a in range(256)]


def _scale(data: bytes, c: int) -> int:
    return int.from_bytes(data.translate(_MUL[c]), "big")


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return _EXP[_LOG[a] + _LOG[b]]


def gf_inv(a: int) -> int:
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(256)")
    return _EXP[255 - _LOG[a]]


def gf_div(a: int, b: int) -> int:
    return gf_mul(a, gf_inv(b))


class SharingError(ValueError):
    pass


class InsufficientShares(SharingError):
    def __init__(self, have: int, need: int):
        super().__init__(f"insufficient shares: have {have}, need {need}")
        self.have = have
        self.need = need


class CorruptedShare(SharingError):
    def __init__(self, index: int):
        super().__init__(f"corrupted share: index {index}")
        self.index = index


@dataclass(frozen=True)
class SharingPolicy:
    n: int
    t: int

    def __post_init__(self):
        if not 2 <= self.t <= self.n <= 255:
            raise SharingError("threshold out of range")


def default_threshold(n: int) -> int:
    """Two-thirds quorum, ceil(2n/3)."""
    return -(-2 * n // 3)


def commit(index: int, payload: bytes) -> Digest256:
    return sha256(bytes([index]) + payload)


@dataclass(frozen=True)
class Share:
    index: int
    payload: bytes
    commitment: Digest256

    def to_bytes(self) -> bytes:
        return bytes([self.index]) + self.payload + self.commitment.value

    @classmethod
    def from_bytes(cls, data: bytes) -> "Share":
        if len(data) < 2 + DIGEST_BYTES:
            raise SharingError("share record too short")
        return cls(data[0], data[1:-DIGEST_BYTES], Digest256(data[-DIGEST_BYTES:]))


def verify_commitment(share: Share) -> bool:
    return commit(share.index, share.payload) == share.commitment


def split(secret: bytes, policy: SharingPolicy, rng: random.Random) -> list[Share]:
    if not secret:
        raise SharingError("secret must be non-empty")
    size = len(secret)
    # one random polynomial per octet, coefficient k of every octet drawn together
    coeffs = [secret] + [rng.randbytes(size) for _ in range(policy.t - 1)]
    shares = []
    for x in range(1, policy.n + 1):
        acc, power = 0, 1
        for c in coeffs:
            acc ^= _scale(c, power)
            power = gf_mul(power, x)
        payload = acc.to_bytes(size, "big")
        shares.append(Share(x, payload, commit(x, payload)))
    return shares


def _interpolate_at_zero(points: Sequence[tuple[int, bytes]]) -> bytes:
    xs = [x for x, _ in points]
    weights = []
    for j, xj in enumerate(xs):
        num, den = 1, 1
        for m, xm in enumerate(xs):
            if m != j:
                num = gf_mul(num, xm)
                den = gf_mul(den, xm ^ xj)
        weights.append(gf_div(num, den))
    acc = 0
    for w, (_, payload) in zip(weights, points):
        acc ^= _scale(payload, w)
    return acc.to_bytes(len(points[0][1]), "big")


def _check_distinct(shares: Iterable[Share]) -> list[Share]:
    shares = sorted(shares, key=lambda s: s.index)
    for a, b in zip(shares, shares[1:]):
        if a.index == b.index:
            raise SharingError("duplicate share index")
    if len({len(s.payload) for s in shares}) > 1:
        raise SharingError("share payload lengths differ")
    return shares


def reconstruct(shares: Iterable[Share], policy: SharingPolicy) -> bytes:
    """Recover the secret from the ``t`` lowest-indexed shares.

    Every supplied share must pass its commitment check, including those beyond
    the first ``t``.
    """
    shares = _check_distinct(shares)
    if len(shares) < policy.t:
        raise InsufficientShares(len(shares), policy.t)
    for s in shares:
        if not verify_commitment(s):
            raise CorruptedShare(s.index)
    return _interpolate_at_zero([(s.index, s.payload) for s in shares[: policy.t]])


def interpolate(shares: Iterable[Share]) -> bytes:
    """Interpolate through all given shares without threshold or commitment checks."""
    shares = _check_distinct(shares)
    if not shares:
        raise InsufficientShares(0, 1)
    return _interpolate_at_zero([(s.index, s.payload) for s in shares])


def aggregate_digest(shares: Iterable[Share], n: int, length: int) -> Digest256:
    """Hash of the secret interpolated through all ``n`` slots.

    Any slot without a share is filled with an all-zero payload. With the full
    set of honest shares this equals ``sha256(secret)``; with a slot withheld
    the interpolation lands on an unrelated value.
    """
    by_index = {s.index: s.payload for s in shares}
    points = [(x, by_index.get(x, bytes(length))) for x in range(1, n + 1)]
    return sha256(_interpolate_at_zero(points))
