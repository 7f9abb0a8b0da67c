import hashlib
import random

import pytest

from huffrev.crypto import (
    TTP_IDENTITY,
    CryptoError,
    DEFAULT_BACKEND,
    DeterministicBackend,
    extract,
    setup,
    sign,
    sign_root,
    verify,
)

from conftest import pseudonym


def test_setup_deterministic():
    seed = b"\x42" * 32
    a = setup(seed)
    b = setup(seed)
    assert a.master_public == b.master_public
    assert a.master_private == b.master_private


def test_distinct_seeds_distinct_masters():
    a = setup(b"\x01" * 32)
    b = setup(b"\x02" * 32)
    assert a.master_public != b.master_public


def test_all_zero_seed_accepted():
    keys = setup(bytes(32))
    assert len(keys.master_public) == 32


def test_bad_seed_length_rejected():
    with pytest.raises(CryptoError):
        setup(b"short")


def test_extract_deterministic_and_round_trip(master):
    p = pseudonym(1)
    k1 = extract(master, p)
    k2 = extract(master, p)
    assert k1 == k2
    sig = sign(k1, b"hello road")
    assert verify(master.master_public, p, b"hello road", sig)


def test_verify_rejects_other_pseudonym(master):
    key = extract(master, pseudonym(1))
    sig = sign(key, b"msg")
    assert not verify(master.master_public, pseudonym(2), b"msg", sig)


def test_sign_empty_message(master):
    key = extract(master, pseudonym(3))
    sig = sign(key, b"")
    assert verify(master.master_public, pseudonym(3), b"", sig)


def test_flipped_message_bit_fails(master):
    key = extract(master, pseudonym(4))
    msg = bytearray(b"beacon payload")
    sig = sign(key, bytes(msg))
    msg[3] ^= 0x01
    assert not verify(master.master_public, pseudonym(4), bytes(msg), sig)


def test_signatures_deterministic(master):
    key = extract(master, pseudonym(5))
    assert sign(key, b"m") == sign(key, b"m")


def test_truncated_signature_fails(master):
    key = extract(master, pseudonym(6))
    sig = sign(key, b"m")
    assert not verify(master.master_public, pseudonym(6), b"m", sig[:-1])
    assert not verify(master.master_public, pseudonym(6), b"m", sig + b"\x00")
    assert not verify(master.master_public, pseudonym(6), b"m", b"")


def test_wrong_master_fails(master):
    other = setup(b"\x09" * 32)
    key = extract(master, pseudonym(7))
    sig = sign(key, b"m")
    assert not verify(other.master_public, pseudonym(7), b"m", sig)
    assert not verify(b"\x00" * 32, pseudonym(7), b"m", sig)


def test_sign_root_uses_ttp_identity(master):
    root = hashlib.sha3_256(b"some root").digest()
    sig = sign_root(master, root)
    assert verify(master.master_public, TTP_IDENTITY, root, sig)
    assert not verify(master.master_public, pseudonym(8), root, sig)
    mutated = bytearray(root)
    mutated[0] ^= 0x80
    assert not verify(master.master_public, TTP_IDENTITY, bytes(mutated), sig)


def test_random_triples_correct_and_sound():
    rng = random.Random(20240)
    for _ in range(100):
        seed = rng.randbytes(32)
        master = setup(seed)
        p = rng.randbytes(32)
        msg = rng.randbytes(rng.randrange(0, 64))
        sig = sign(extract(master, p), msg)
        assert verify(master.master_public, p, msg, sig)
        other_p = rng.randbytes(32)
        assert not verify(master.master_public, other_p, msg, sig)
        assert not verify(master.master_public, p, msg + b"x", sig)
        other = setup(rng.randbytes(32))
        assert not verify(other.master_public, p, msg, sig)


def test_signature_length_fixed(master):
    key = extract(master, pseudonym(9))
    for msg in (b"", b"a", b"x" * 1000):
        assert len(sign(key, msg)) == DEFAULT_BACKEND.signature_len


def test_verifier_blob_round_trip(master):
    blob = DEFAULT_BACKEND.export_verifier(master)
    fresh = DeterministicBackend()
    key = extract(master, pseudonym(10))
    sig = sign(key, b"m")
    # A fresh backend cannot verify until the blob is imported.
    assert not fresh.verify(master.master_public, pseudonym(10), b"m", sig)
    assert fresh.import_verifier(blob) == master.master_public
    assert fresh.verify(master.master_public, pseudonym(10), b"m", sig)


def test_verifier_blob_consistency_checked(master):
    blob = bytearray(DEFAULT_BACKEND.export_verifier(master))
    blob[-1] ^= 0x01
    with pytest.raises(CryptoError):
        DeterministicBackend().import_verifier(bytes(blob))
