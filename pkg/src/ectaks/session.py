"""Node-side protocol: the ephemeral handshake, key derivation and the
encrypt-then-MAC message format.

Wire layout (big-endian)::

    version(1) | sender(4) | recipient(4) | share(2 points) | ct_len(4) | ciphertext | tag(32)

A point is a marker byte (0x04 affine, 0x00 identity) followed by x and y
as fixed-width big-endian integers of ceil(bits(q)/8) bytes each; the
identity is all zero.  The tag covers every byte that precedes it.

Replay protection is deliberately absent: a captured message opens again.
Callers that need it must track (sender, share) pairs themselves.
"""

from __future__ import annotations

import hashlib
import hmac
import random
import struct
from dataclasses import dataclass
from typing import Iterable, Tuple, Union

from .algebra import INF, Curve, Point, PointVector, lift_vector, mixed_dot
from .authority import Lcd
from .errors import (
    BadTag,
    ClusterNotFormed,
    InvalidPoint,
    InvalidShare,
    MalformedMessage,
    UnknownPeer,
    ZeroSessionKey,
)

VERSION = 1
BROADCAST = 0
TAG_LEN = 32

LABEL_ENC = b"ECTAKS-v1-enc"
LABEL_MAC = b"ECTAKS-v1-mac"
LABEL_CTR = b"ECTAKS-v1-ctr"
LABEL_TAG = b"ECTAKS-v1-tag"


@dataclass(frozen=True)
class HashSuite:
    """One 256-bit hash drives the keyed hash, the KDF and the keystream."""

    name: str = "sha256"

    def __post_init__(self):
        if hashlib.new(self.name).digest_size != 32:
            raise ValueError(f"{self.name} does not produce 32-byte digests")

    def keyed(self, key: bytes, label: bytes, data: bytes = b"") -> bytes:
        return hmac.new(key, label + data, self.name).digest()

    def kdf(self, ikm: bytes) -> Tuple[bytes, bytes]:
        return self.keyed(ikm, LABEL_ENC), self.keyed(ikm, LABEL_MAC)

    def keystream_xor(self, key: bytes, data: bytes) -> bytes:
        out = bytearray(len(data))
        for block in range(0, len(data), 32):
            pad = self.keyed(key, LABEL_CTR, struct.pack(">Q", block // 32))
            chunk = data[block:block + 32]
            out[block:block + len(chunk)] = bytes(a ^ b for a, b in zip(chunk, pad))
        return bytes(out)


DEFAULT_SUITE = HashSuite()


@dataclass(frozen=True)
class EphemeralShare:
    points: PointVector


@dataclass(frozen=True)
class Ectak:
    point: Point


@dataclass(frozen=True)
class SessionKeys:
    k1: bytes
    k2: bytes


# ---------------------------------------------------------------------------
# point encoding
# ---------------------------------------------------------------------------

def point_size(curve: Curve) -> int:
    return 1 + 2 * curve.coord_bytes


def encode_point(curve: Curve, P: Point) -> bytes:
    w = curve.coord_bytes
    if P is INF:
        return bytes(1 + 2 * w)
    return b"\x04" + P[0].to_bytes(w, "big") + P[1].to_bytes(w, "big")


def decode_point(curve: Curve, data: bytes) -> Point:
    w = curve.coord_bytes
    if len(data) != 1 + 2 * w:
        raise MalformedMessage("wrong point length")
    if data[0] == 0:
        if any(data):
            raise MalformedMessage("identity encoding must be all zero")
        return INF
    if data[0] != 4:
        raise MalformedMessage(f"unknown point marker {data[0]:#x}")
    P = (int.from_bytes(data[1:1 + w], "big"), int.from_bytes(data[1 + w:], "big"))
    if not curve.contains(P):
        raise InvalidPoint(f"{P} is not on the curve")
    return P


def encode_share(curve: Curve, V: PointVector) -> bytes:
    return b"".join(encode_point(curve, P) for P in V)


# ---------------------------------------------------------------------------
# handshake
# ---------------------------------------------------------------------------

def _alpha(curve: Curve, rng: random.Random) -> int:
    return rng.randrange(1, curve.p)


def initiate(lcd: Lcd, j: int, rng: random.Random, alpha: int = None):
    """Start a session towards j: returns (share sent to j, shared secret)."""
    if j not in lcd.public:
        raise UnknownPeer(f"node {lcd.node} has no arrow towards {j}")
    curve = lcd.curve
    alpha = _alpha(curve, rng) if alpha is None else alpha
    share = EphemeralShare(lift_vector(curve, lcd.t.scale(alpha)))
    point = mixed_dot(curve, lcd.k.scale(alpha), lcd.public[j])
    if point is INF:
        raise ZeroSessionKey(f"session product for ({lcd.node},{j}) is zero")
    return share, Ectak(point)


def respond(lcd: Lcd, share: EphemeralShare) -> Ectak:
    for P in share.points:
        lcd.curve.check(P)
    if all(P is INF for P in share.points):
        raise InvalidShare("ephemeral share is the identity pair")
    return Ectak(mixed_dot(lcd.curve, lcd.k, share.points))


def derive_keys(curve: Curve, ectak: Ectak, share: EphemeralShare,
                suite: HashSuite = DEFAULT_SUITE) -> SessionKeys:
    ikm = encode_point(curve, ectak.point) + encode_share(curve, share.points)
    return SessionKeys(*suite.kdf(ikm))


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WireMessage:
    version: int
    sender: int
    recipient: int
    share: PointVector
    ciphertext: bytes
    tag: bytes

    def authenticated_part(self, curve: Curve) -> bytes:
        return (struct.pack(">BII", self.version, self.sender, self.recipient)
                + encode_share(curve, self.share)
                + struct.pack(">I", len(self.ciphertext)) + self.ciphertext)

    def to_bytes(self, curve: Curve) -> bytes:
        return self.authenticated_part(curve) + self.tag

    @classmethod
    def from_bytes(cls, curve: Curve, data: bytes) -> "WireMessage":
        ps = point_size(curve)
        head = 9 + 2 * ps + 4
        if len(data) < head + TAG_LEN:
            raise MalformedMessage("message too short")
        version, sender, recipient = struct.unpack(">BII", data[:9])
        if version != VERSION:
            raise MalformedMessage(f"unsupported version {version}")
        share = (decode_point(curve, data[9:9 + ps]), decode_point(curve, data[9 + ps:9 + 2 * ps]))
        (n,) = struct.unpack(">I", data[head - 4:head])
        if len(data) != head + n + TAG_LEN:
            raise MalformedMessage("ciphertext length does not match the frame")
        return cls(version, sender, recipient, share, data[head:head + n], data[head + n:])


def _seal_with(lcd: Lcd, recipient: int, share: EphemeralShare, ectak: Ectak,
               message: bytes, suite: HashSuite) -> WireMessage:
    keys = derive_keys(lcd.curve, ectak, share, suite)
    ct = suite.keystream_xor(keys.k1, bytes(message))
    msg = WireMessage(VERSION, lcd.node, recipient, share.points, ct, b"")
    tag = suite.keyed(keys.k2, LABEL_TAG, msg.authenticated_part(lcd.curve))
    return WireMessage(VERSION, lcd.node, recipient, share.points, ct, tag)


def seal(lcd: Lcd, j: int, message: bytes, rng: random.Random,
         suite: HashSuite = DEFAULT_SUITE) -> WireMessage:
    share, ectak = initiate(lcd, j, rng)
    return _seal_with(lcd, j, share, ectak, message, suite)


def open_message(lcd: Lcd, msg: Union[WireMessage, bytes],
                 suite: HashSuite = DEFAULT_SUITE) -> bytes:
    """Verify then decrypt; raises BadTag unless the message authenticates."""
    if isinstance(msg, (bytes, bytearray)):
        msg = WireMessage.from_bytes(lcd.curve, bytes(msg))
    if msg.recipient not in (lcd.node, BROADCAST):
        raise BadTag(f"message addressed to {msg.recipient}, not {lcd.node}")
    if len(msg.tag) != TAG_LEN:
        raise MalformedMessage("bad tag length")
    share = EphemeralShare(tuple(msg.share))
    ectak = respond(lcd, share)
    keys = derive_keys(lcd.curve, ectak, share, suite)
    expected = suite.keyed(keys.k2, LABEL_TAG, msg.authenticated_part(lcd.curve))
    if not hmac.compare_digest(expected, msg.tag):
        raise BadTag("authentication tag mismatch")
    return suite.keystream_xor(keys.k1, msg.ciphertext)


def multipoint_seal(lcd: Lcd, members: Iterable[int], message: bytes, rng: random.Random,
                    suite: HashSuite = DEFAULT_SUITE, alpha: int = None) -> WireMessage:
    """Seal once for a whole cluster (recipient id 0).

    Every member arrow must carry the same session product, which the
    master can check locally: k . (m_j G) must be one point for all j.
    """
    members = sorted(set(members))
    if not members:
        raise ClusterNotFormed("empty member set")
    for j in members:
        if j not in lcd.public:
            raise UnknownPeer(f"node {lcd.node} has no arrow towards {j}")
    common = {mixed_dot(lcd.curve, lcd.k, lcd.public[j]) for j in members}
    if len(common) != 1:
        raise ClusterNotFormed("member arrows do not share one session product")
    alpha = _alpha(lcd.curve, rng) if alpha is None else alpha
    share, ectak = initiate(lcd, members[0], rng, alpha=alpha)
    return _seal_with(lcd, BROADCAST, share, ectak, message, suite)
