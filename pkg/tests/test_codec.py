import hashlib
import pathlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from huffrev import protocol, wire
from huffrev.crypto import extract, setup, sign
from huffrev.tree import (
    RevokedLeaf,
    RootMismatch,
    build_tree,
    decode_proof,
    decode_snapshot,
    decode_tree,
    encode_proof,
    encode_snapshot,
    encode_tree,
    generate_proof,
    make_empty_signed_root,
)

from conftest import leaves_from, pseudonym

GOLDEN = pathlib.Path(__file__).parent / "golden"


# --- tree snapshots ------------------------------------------------------------


def test_snapshot_round_trip(master):
    rng = random.Random(2)
    for _ in range(10):
        t = rng.randint(1, 25)
        k = rng.randint(2, 5)
        tree, _ = build_tree(leaves_from([rng.randint(0, 30) for _ in range(t)]), k, 1, master)
        decoded = decode_tree(encode_tree(tree))
        assert decoded == tree
        assert decoded.path_table == tree.path_table
        assert encode_tree(decoded) == encode_tree(tree)


def test_snapshot_canonical_across_input_order(master):
    freqs = [7, 3, 3, 1, 9]
    forward = leaves_from(freqs)
    shuffled = list(reversed(forward))
    a, _ = build_tree(forward, 3, 2, master)
    b, _ = build_tree(shuffled, 3, 2, master)
    assert encode_tree(a) == encode_tree(b)


def test_snapshot_rejections(master):
    tree, _ = build_tree(leaves_from([5, 2, 1]), 2, 0, master)
    blob = encode_tree(tree)

    with pytest.raises(wire.BadMagic):
        decode_tree(b"XXXX" + blob[4:])
    with pytest.raises(wire.Truncated):
        decode_tree(blob[:-1])
    with pytest.raises(wire.TrailingBytes):
        decode_tree(blob + b"\x00")
    # flipping a pseudonym byte changes that leaf digest, so the rebuilt
    # root can no longer match the stored one
    mutated = bytearray(blob)
    mutated[4 + 1 + 1 + 8 + 4 + 5] ^= 0x01
    with pytest.raises((RootMismatch, wire.CodecError)):
        decode_tree(bytes(mutated))


def test_snapshot_version_and_k_checks(master):
    tree, _ = build_tree(leaves_from([5, 2, 1]), 2, 0, master)
    blob = bytearray(encode_tree(tree))
    blob[4] = 9  # version
    with pytest.raises(wire.FieldRange):
        decode_tree(bytes(blob))
    blob = bytearray(encode_tree(tree))
    blob[5] = 0  # k below 2
    with pytest.raises(wire.FieldRange):
        decode_tree(bytes(blob))


def test_empty_snapshot_round_trip(master):
    signed = make_empty_signed_root(3, 4, master)
    blob = encode_snapshot(None, signed)
    tree, decoded = decode_snapshot(blob)
    assert tree is None
    assert decoded == signed
    assert encode_snapshot(None, decoded) == blob
    with pytest.raises(wire.FieldRange):
        decode_tree(blob)  # an empty snapshot is not a tree


# --- proofs ---------------------------------------------------------------------


def test_proof_round_trip(master):
    rng = random.Random(4)
    for _ in range(10):
        t = rng.randint(1, 20)
        k = rng.randint(2, 5)
        tree, _ = build_tree(leaves_from([rng.randint(0, 30) for _ in range(t)]), k, 0, master)
        leaf = tree.leaves[rng.randrange(len(tree.leaves))]
        proof = generate_proof(tree, leaf.pseudonym)
        assert decode_proof(encode_proof(proof)) == proof


def test_proof_rejections(master):
    tree, _ = build_tree(leaves_from([5, 2, 1, 1]), 3, 0, master)
    proof = generate_proof(tree, pseudonym(2))
    blob = encode_proof(proof)

    with pytest.raises(wire.BadMagic):
        decode_proof(b"HPRX" + blob[4:])
    with pytest.raises(wire.Truncated):
        decode_proof(blob[:-2])
    with pytest.raises(wire.TrailingBytes):
        decode_proof(blob + b"ab")
    bad_branch = bytearray(blob)
    bad_branch[8] = 7  # first path byte out of range for k=3
    with pytest.raises(wire.FieldRange):
        decode_proof(bytes(bad_branch))
    zero_path = bytearray(blob)
    zero_path[6:8] = b"\x00\x00"
    with pytest.raises(wire.CodecError):
        decode_proof(bytes(zero_path))


def test_proof_size_linear_in_depth(master):
    # fibonacci-ish frequencies force a deep binary tree
    freqs = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55]
    tree, _ = build_tree(leaves_from(freqs), 2, 0, master)
    per_level = 1 + 32  # one path byte + one sibling digest per level at k=2
    sizes = {}
    for leaf in tree.leaves:
        proof = generate_proof(tree, leaf.pseudonym)
        sizes[proof.depth] = len(encode_proof(proof))
    depths = sorted(sizes)
    for a, b in zip(depths, depths[1:]):
        assert sizes[b] - sizes[a] == (b - a) * per_level


# --- protocol messages ----------------------------------------------------------


def _sample_messages(master):
    leaves = [RevokedLeaf(pseudonym(i), 2, f) for i, f in enumerate((9, 4, 2))]
    built, _ = build_tree(leaves, 3, 5, master)
    proof = generate_proof(built, pseudonym(1))
    rsu_id = 12
    key = extract(master, protocol.rsu_identity(rsu_id))
    ok = protocol.OkResponse(
        pseudonym=pseudonym(7),
        epoch=5,
        rsu_id=rsu_id,
        rsu_signature=sign(key, protocol.ok_signing_bytes(pseudonym(7), 5, rsu_id)),
    )
    return [
        protocol.Query(pseudonym=pseudonym(0)),
        protocol.ProofResponse(proof=proof),
        ok,
        protocol.Impeachment(ok=ok, contradiction=proof),
        protocol.TreeUpdate(snapshot=encode_tree(built)),
        protocol.FrequencyReport(epoch=5, counters={pseudonym(0): 3, pseudonym(1): 11}),
    ]


def test_message_round_trips(master):
    for message in _sample_messages(master):
        blob = protocol.encode_message(message)
        assert protocol.decode_message(blob) == message


def test_message_trailing_rejected(master):
    blob = protocol.encode_message(protocol.Query(pseudonym=pseudonym(0)))
    with pytest.raises(wire.TrailingBytes):
        protocol.decode_message(blob + b"\x00")


def test_unknown_tag_rejected():
    with pytest.raises(wire.FieldRange):
        protocol.decode_message(b"\xee" + b"\x00" * 32)


def test_frequency_report_canonical_order():
    counters = {pseudonym(3): 1, pseudonym(1): 2}
    blob = protocol.encode_message(protocol.FrequencyReport(epoch=1, counters=counters))
    # entries are sorted on encode, so a non-sorted body must be rejected
    assert protocol.decode_message(blob).counters == counters
    entry_size = 32 + 8
    body = bytearray(blob)
    first = body[13 : 13 + entry_size]
    second = body[13 + entry_size : 13 + 2 * entry_size]
    body[13 : 13 + entry_size] = second
    body[13 + entry_size : 13 + 2 * entry_size] = first
    with pytest.raises(wire.FieldRange):
        protocol.decode_message(bytes(body))


GOLDEN_NAMES = [
    "query",
    "proof_response",
    "ok_response",
    "impeachment",
    "tree_update",
    "frequency_report",
]


@pytest.mark.parametrize("name", GOLDEN_NAMES)
def test_golden_vectors_stable(name):
    # The fixed scenario from scripts/make_golden_vectors.py.
    master = setup(b"\x24" * 32)

    def gp(i):
        return hashlib.sha3_256(b"golden-pseudonym" + bytes([i])).digest()

    leaves = [RevokedLeaf(gp(i), 2, f) for i, f in enumerate((9, 4, 2))]
    built, _ = build_tree(leaves, 3, 5, master)
    proof = generate_proof(built, gp(1))
    key = extract(master, protocol.rsu_identity(12))
    ok = protocol.OkResponse(
        pseudonym=gp(7), epoch=5, rsu_id=12,
        rsu_signature=sign(key, protocol.ok_signing_bytes(gp(7), 5, 12)),
    )
    expected = {
        "query": protocol.Query(pseudonym=gp(0)),
        "proof_response": protocol.ProofResponse(proof=proof),
        "ok_response": ok,
        "impeachment": protocol.Impeachment(ok=ok, contradiction=proof),
        "tree_update": protocol.TreeUpdate(snapshot=encode_tree(built)),
        "frequency_report": protocol.FrequencyReport(
            epoch=5, counters={gp(0): 3, gp(1): 11}
        ),
    }[name]
    blob = (GOLDEN / f"message_{name}.bin").read_bytes()
    assert protocol.decode_message(blob) == expected
    assert protocol.encode_message(expected) == blob


@settings(max_examples=40, deadline=None)
@given(
    freqs=st.lists(st.integers(min_value=0, max_value=2**32), min_size=1, max_size=20),
    k=st.integers(min_value=2, max_value=6),
    pick=st.integers(min_value=0, max_value=10**9),
)
def test_generated_trees_round_trip(freqs, k, pick):
    from conftest import leaves_from

    master = setup(b"\x66" * 32)
    tree, _ = build_tree(leaves_from(freqs), k, 0, master)
    assert decode_tree(encode_tree(tree)) == tree
    leaf = tree.leaves[pick % len(tree.leaves)]
    proof = generate_proof(tree, leaf.pseudonym)
    assert decode_proof(encode_proof(proof)) == proof


# --- wire primitives ------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.binary(max_size=200))
def test_lp_bytes_round_trip(payload):
    reader = wire.Reader(wire.lp_bytes(payload))
    assert reader.lp_bytes() == payload
    reader.finish()


def test_reader_truncation():
    reader = wire.Reader(b"\x00\x00\x00\x05ab")
    with pytest.raises(wire.Truncated):
        reader.lp_bytes()


@pytest.mark.parametrize("value,width", [(256, "u8"), (2**32, "u32"), (2**64, "u64"), (-1, "u8")])
def test_int_range_checks(value, width):
    with pytest.raises(wire.FieldRange):
        getattr(wire, width)(value)
