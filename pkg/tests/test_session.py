import json
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_ant
from ectaks.algebra import INF, sample_nonzero_vector, scalar_mul
from ectaks.authority import Lcd, admit_node, export_lcd, provision
from ectaks.errors import (
    BadTag,
    ClusterNotFormed,
    InvalidPoint,
    InvalidShare,
    MalformedMessage,
    UnknownPeer,
    ZeroSessionKey,
)
from ectaks.fixtures import load_curve
from ectaks.session import (
    BROADCAST,
    DEFAULT_SUITE,
    EphemeralShare,
    HashSuite,
    WireMessage,
    _seal_with,
    decode_point,
    derive_keys,
    encode_point,
    initiate,
    multipoint_seal,
    open_message,
    respond,
    seal,
)
from ectaks.topology import Ant

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def net():
    curve = load_curve("mid1009")
    return provision(Ant.from_edges(4, [(1, 2), (1, 3), (2, 3), (3, 4)]), curve, seed=11)


def lcds(state):
    return {i: export_lcd(state, i) for i in state.secrets}


# -- handshake -----------------------------------------------------------------

def test_initiate_is_ephemeral(net):
    L = lcds(net)
    s1, e1 = initiate(L[1], 2, random.Random(1))
    s2, e2 = initiate(L[1], 2, random.Random(2))
    assert s1 != s2 and e1 != e2
    assert e1.point is not INF and e2.point is not INF
    with pytest.raises(UnknownPeer):
        initiate(L[1], 4, random.Random(0))


def test_agreement_every_alpha_small_p():
    curve = load_curve("toy13")
    st = provision(Ant.from_edges(4, [(1, 2), (2, 3), (3, 4), (4, 1), (1, 3)]), curve, seed=2)
    L = lcds(st)
    for i, j in st.topology.arrows:
        for alpha in range(1, curve.p):
            share, key = initiate(L[i], j, None, alpha=alpha)
            assert key.point is not INF
            assert respond(L[j], share) == key


def test_agreement_random_ants():
    curve = load_curve("mid1009")
    rng = random.Random(4)
    for n in range(100):
        st = provision(random_ant(rng), curve, seed=n)
        L = lcds(st)
        for i, j in st.topology.arrows:
            share, key = initiate(L[i], j, rng)
            assert respond(L[j], share) == key


def test_respond_rejects_bad_shares(net):
    L = lcds(net)
    with pytest.raises(InvalidShare):
        respond(L[2], EphemeralShare((INF, INF)))
    with pytest.raises(InvalidPoint):
        respond(L[2], EphemeralShare(((1, 1), INF)))


def test_outsider_share_fails_to_authenticate(net):
    """A node holding independent secrets but a copied public vector cannot
    get a message accepted; measured over the handshake randomness."""
    curve = net.curve
    L = lcds(net)
    rng = random.Random(7)
    trials, rejected = 1000, 0
    for _ in range(trials):
        k, t = sample_nonzero_vector(rng, curve.p), sample_nonzero_vector(rng, curve.p)
        outsider = Lcd(1, k, t, L[1].public, curve)
        try:
            open_message(L[2], seal(outsider, 2, b"x", rng))
        except (BadTag, ZeroSessionKey):
            rejected += 1
    assert rejected / trials >= 1 - 2 / curve.p - 0.01


def test_directions_independent(net):
    L = lcds(net)
    rng = random.Random(3)
    s12, e12 = initiate(L[1], 2, rng)
    s21, e21 = initiate(L[2], 1, rng)
    assert respond(L[2], s12) == e12 and respond(L[1], s21) == e21
    assert L[1].public[2] != L[2].public[1]


# -- key derivation --------------------------------------------------------------

def test_derive_keys_deterministic_and_distinct(net):
    curve = net.curve
    L = lcds(net)
    rng = random.Random(5)
    for _ in range(1000):
        share, key = initiate(L[1], 2, rng)
        a = derive_keys(curve, key, share)
        assert a == derive_keys(curve, key, share)
        assert a.k1 != a.k2


def test_derive_keys_avalanche(net):
    curve = net.curve
    L = lcds(net)
    rng = random.Random(6)
    flips = [0, 0]
    total = 0
    for _ in range(1000):
        share, key = initiate(L[1], 2, rng)
        base = derive_keys(curve, key, share)
        # a raw bit flip almost always leaves the curve, so perturb by +G instead
        P0, P1 = share.points
        Q = curve.add(P0, curve.G)
        other = derive_keys(curve, key, EphemeralShare((Q, P1)))
        for n, (x, y) in enumerate(((base.k1, other.k1), (base.k2, other.k2))):
            flips[n] += bin(int.from_bytes(x, "big") ^ int.from_bytes(y, "big")).count("1")
        total += 256
    for f in flips:
        assert abs(f / total - 0.5) < 0.05


def test_hash_suite_requires_256_bits():
    with pytest.raises(ValueError):
        HashSuite("sha1")
    assert HashSuite("sha3_256").kdf(b"x") != DEFAULT_SUITE.kdf(b"x")


# -- point encoding -------------------------------------------------------------

def test_point_encoding(net):
    curve = net.curve
    P = scalar_mul(curve, 5, curve.G)
    assert decode_point(curve, encode_point(curve, P)) == P
    assert encode_point(curve, INF) == bytes(1 + 2 * curve.coord_bytes)
    assert decode_point(curve, encode_point(curve, INF)) is INF
    with pytest.raises(MalformedMessage):
        decode_point(curve, b"\x05" + bytes(2 * curve.coord_bytes))
    with pytest.raises(MalformedMessage):
        decode_point(curve, b"\x04")
    with pytest.raises(InvalidPoint):
        decode_point(curve, b"\x04" + (1).to_bytes(curve.coord_bytes, "big") * 2)


# -- seal / open --------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.binary(max_size=2048), st.integers(0, 2 ** 32))
def test_roundtrip_property(msg, seed):
    curve = load_curve("toy13")
    state = provision(Ant.from_edges(2, [(1, 2)]), curve, seed=1)
    a, b = export_lcd(state, 1), export_lcd(state, 2)
    rng = random.Random(seed)
    assert open_message(b, seal(a, 2, msg, rng).to_bytes(curve)) == msg
    assert open_message(a, seal(b, 1, msg, rng)) == msg


def test_roundtrip_large_and_empty(net):
    L = lcds(net)
    rng = random.Random(8)
    big = rng.randbytes(64 * 1024)
    assert open_message(L[3], seal(L[1], 3, big, rng).to_bytes(net.curve)) == big
    empty = seal(L[1], 2, b"", rng)
    assert empty.ciphertext == b"" and len(empty.tag) == 32
    assert open_message(L[2], empty) == b""


def test_seal_nondeterministic_and_replay_accepted(net):
    L = lcds(net)
    rng = random.Random(9)
    a, b = seal(L[1], 2, b"same", rng), seal(L[1], 2, b"same", rng)
    assert a.to_bytes(net.curve) != b.to_bytes(net.curve)
    raw = a.to_bytes(net.curve)
    assert open_message(L[2], raw) == open_message(L[2], raw) == b"same"


def test_every_single_byte_tamper_rejected(net):
    L = lcds(net)
    raw = seal(L[1], 2, b"tamper me please", random.Random(10)).to_bytes(net.curve)
    for pos in range(len(raw)):
        for bit in (0x01, 0x80):
            bad = bytearray(raw)
            bad[pos] ^= bit
            with pytest.raises((BadTag, MalformedMessage, InvalidPoint, InvalidShare)):
                open_message(L[2], bytes(bad))


def test_wrong_recipient_rejected(net):
    L = lcds(net)
    rng = random.Random(12)
    msg = seal(L[1], 2, b"for two", rng)
    with pytest.raises(BadTag):
        open_message(L[3], msg)
    # rewriting the header to node 3 breaks the tag
    forged = WireMessage(msg.version, msg.sender, 3, msg.share, msg.ciphertext, msg.tag)
    with pytest.raises(BadTag):
        open_message(L[3], forged)


def test_truncated_and_wrong_version(net):
    L = lcds(net)
    raw = seal(L[1], 2, b"abc", random.Random(13)).to_bytes(net.curve)
    with pytest.raises(MalformedMessage):
        open_message(L[2], raw[:-1])
    with pytest.raises(MalformedMessage):
        open_message(L[2], raw[:10])
    with pytest.raises(MalformedMessage):
        open_message(L[2], b"\x02" + raw[1:])


def test_golden_wire_vector():
    g = json.loads((GOLDEN / "wire_toy11.json").read_text())
    curve = load_curve(g["curve"])
    state = provision(Ant.from_edges(g["topology"]["n"], g["topology"]["edges"]), curve, seed=g["seed"])
    a, b = export_lcd(state, g["sender"]), export_lcd(state, g["recipient"])
    share, key = initiate(a, g["recipient"], None, alpha=g["alpha"])
    assert list(key.point) == g["ectak"]
    assert [list(P) for P in share.points] == g["share"]
    keys = derive_keys(curve, key, share)
    assert keys.k1.hex() == g["k1_hex"] and keys.k2.hex() == g["k2_hex"]
    msg = bytes.fromhex(g["message_hex"])
    wire = _seal_with(a, g["recipient"], share, key, msg, DEFAULT_SUITE).to_bytes(curve)
    assert wire.hex() == g["wire_hex"]
    assert open_message(b, bytes.fromhex(g["wire_hex"])) == msg


# -- multipoint ---------------------------------------------------------------------

def test_multipoint_cluster():
    curve = load_curve("mid1009")
    g = Ant.from_edges(7, [(1, j) for j in range(2, 8)])
    state = provision(g, curve, seed=4, clusters={1: [2, 3, 4, 5, 6]})
    L = lcds(state)
    msg = multipoint_seal(L[1], [2, 3, 4, 5, 6], b"to all", random.Random(1))
    assert msg.recipient == BROADCAST
    raw = msg.to_bytes(curve)
    for j in (2, 3, 4, 5, 6):
        assert open_message(L[j], raw) == b"to all"
    with pytest.raises(BadTag):
        open_message(L[7], raw)
    with pytest.raises(ClusterNotFormed):
        multipoint_seal(L[1], [2, 7], b"x", random.Random(1))
    with pytest.raises(ClusterNotFormed):
        multipoint_seal(L[1], [], b"x", random.Random(1))


def test_multipoint_single_member_is_point_to_point(net):
    L = lcds(net)
    msg = multipoint_seal(L[1], [2], b"solo", random.Random(2))
    assert open_message(L[2], msg) == b"solo"


def test_multipoint_admitted_member():
    curve = load_curve("mid1009")
    state = provision(Ant.from_edges(3, [(1, 2), (1, 3)]), curve, seed=4, clusters={1: [2, 3]})
    admit_node(state, 4, [1], random.Random(3), cluster=1)
    L = lcds(state)
    raw = multipoint_seal(L[1], [2, 3, 4], b"grown", random.Random(5)).to_bytes(curve)
    assert all(open_message(L[j], raw) == b"grown" for j in (2, 3, 4))
