"""Identity-based signatures where the verification key is a pseudonym.

A trusted third party (TTP) runs ``setup`` once, publishes the master
public key, and hands each node the private keys extracted for its
pseudonyms. Any party holding the master public key can then check a
signature against the signer's pseudonym alone; no certificates are
involved. The TTP signs revocation-tree roots with the same scheme,
under a reserved all-zero pseudonym.

Backends
--------
The default :class:`DeterministicBackend` is hash-based and exists so the
protocol is exactly testable and replayable:

* ``key_material`` for a pseudonym is ``H(master_private || pseudonym)``,
  carried together with the public half ``H(master_private || pseudonym ||
  "pub")``.
* a signature is ``H(master_private || pseudonym || "pub") ||
  H(key_material || message)`` (64 bytes, no per-signature randomness).

**This backend is NOT publicly verifiable.** Verification recomputes both
halves, which requires the master private key; the backend keeps a
process-local registry mapping each master public key to its private key,
so ``verify`` only works inside the trust domain that ran ``setup``. Every
behavior the revocation protocol observes (determinism, round-trip
correctness, rejection of wrong pseudonym/message/master, fixed signature
length) matches a real identity-based scheme. A pairing-based backend with
genuine public verifiability can be added by implementing
:class:`IbsBackend`; none ships here because no pairing library is
available and the protocol logic does not depend on one.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field

from . import wire

PSEUDONYM_LEN = 32

# Reserved identity under which the TTP signs tree roots. Real pseudonyms
# are hash outputs, so the all-zero string never collides with one.
TTP_IDENTITY = bytes(PSEUDONYM_LEN)

IbsSignature = bytes
Pseudonym = bytes


def _h(*parts: bytes) -> bytes:
    digest = hashlib.sha3_256()
    for part in parts:
        digest.update(part)
    return digest.digest()


class CryptoError(ValueError):
    pass


@dataclass(frozen=True)
class MasterKeys:
    """Master key pair held by the TTP; the private half never leaves it."""

    master_public: bytes
    master_private: bytes = field(repr=False)


@dataclass(frozen=True)
class PseudonymPrivateKey:
    pseudonym: Pseudonym
    key_material: bytes = field(repr=False)


def check_pseudonym(p: Pseudonym) -> Pseudonym:
    if not isinstance(p, (bytes, bytearray)) or len(p) != PSEUDONYM_LEN:
        raise CryptoError(f"pseudonym must be {PSEUDONYM_LEN} bytes")
    return bytes(p)


class IbsBackend:
    """Contract every signature backend implements.

    All five operations must be deterministic for fixed inputs, and
    ``signature_len`` is the exact length of every signature the backend
    emits; ``verify`` returns False (never raises) on wrong-length input.
    """

    name: str
    signature_len: int

    def setup(self, seed: bytes) -> MasterKeys:
        raise NotImplementedError

    def extract(self, master: MasterKeys, pseudonym: Pseudonym) -> PseudonymPrivateKey:
        raise NotImplementedError

    def sign(self, key: PseudonymPrivateKey, message: bytes) -> IbsSignature:
        raise NotImplementedError

    def verify(self, master_public: bytes, pseudonym: Pseudonym, message: bytes,
               signature: IbsSignature) -> bool:
        raise NotImplementedError

    def export_verifier(self, master: MasterKeys) -> bytes:
        """Opaque blob a separate process needs before it can verify.

        For a publicly verifiable backend this is just the master public
        key. For the deterministic backend it must carry the trust-domain
        state, so it is secret; see that class.
        """
        raise NotImplementedError

    def import_verifier(self, blob: bytes) -> bytes:
        """Load an exported verifier blob; returns the master public key."""
        raise NotImplementedError


class DeterministicBackend(IbsBackend):
    """Hash-based backend; see the module docstring for the loud caveats."""

    name = "deterministic"
    signature_len = 64

    def __init__(self) -> None:
        # Trust-domain oracle: master public -> master private, populated by
        # setup(). Verification is only possible for masters created in this
        # process; that is the price of skipping pairings.
        self._masters: dict[bytes, bytes] = {}

    def setup(self, seed: bytes) -> MasterKeys:
        if len(seed) != 32:
            raise CryptoError("seed must be 32 bytes")
        master_private = _h(b"ibs.master-priv", seed)
        master_public = _h(b"ibs.master-pub", master_private)
        self._masters[master_public] = master_private
        return MasterKeys(master_public=master_public, master_private=master_private)

    def _halves(self, master_private: bytes, pseudonym: Pseudonym) -> tuple[bytes, bytes]:
        secret = _h(master_private, pseudonym)
        public_tag = _h(master_private, pseudonym, b"pub")
        return secret, public_tag

    def extract(self, master: MasterKeys, pseudonym: Pseudonym) -> PseudonymPrivateKey:
        pseudonym = check_pseudonym(pseudonym)
        secret, public_tag = self._halves(master.master_private, pseudonym)
        return PseudonymPrivateKey(pseudonym=pseudonym, key_material=secret + public_tag)

    def sign(self, key: PseudonymPrivateKey, message: bytes) -> IbsSignature:
        secret, public_tag = key.key_material[:32], key.key_material[32:]
        return public_tag + _h(secret, message)

    def verify(self, master_public: bytes, pseudonym: Pseudonym, message: bytes,
               signature: IbsSignature) -> bool:
        if len(signature) != self.signature_len:
            return False
        if not isinstance(pseudonym, (bytes, bytearray)) or len(pseudonym) != PSEUDONYM_LEN:
            return False
        master_private = self._masters.get(bytes(master_public))
        if master_private is None:
            return False
        secret, public_tag = self._halves(master_private, bytes(pseudonym))
        expected = public_tag + _h(secret, message)
        return hmac.compare_digest(expected, bytes(signature))

    def export_verifier(self, master: MasterKeys) -> bytes:
        """WARNING: the exported blob contains the master private key.

        This backend can only verify inside the trust domain, so moving
        verification to another process means moving the trust domain with
        it. Never publish this blob; with a pairing backend the equivalent
        export would be the bare master public key.
        """
        return wire.lp_bytes(master.master_public) + wire.lp_bytes(master.master_private)

    def import_verifier(self, blob: bytes) -> bytes:
        reader = wire.Reader(blob)
        master_public = reader.lp_bytes()
        master_private = reader.lp_bytes()
        reader.finish()
        if _h(b"ibs.master-pub", master_private) != master_public:
            raise CryptoError("verifier blob is inconsistent")
        self._masters[master_public] = master_private
        return master_public


DEFAULT_BACKEND = DeterministicBackend()


def setup(seed: bytes, backend: IbsBackend = DEFAULT_BACKEND) -> MasterKeys:
    """Create the TTP master key pair deterministically from a 32-byte seed."""
    return backend.setup(seed)


def extract(master: MasterKeys, pseudonym: Pseudonym,
            backend: IbsBackend = DEFAULT_BACKEND) -> PseudonymPrivateKey:
    """Derive the private key a node uses to sign under ``pseudonym``."""
    return backend.extract(master, pseudonym)


def sign(key: PseudonymPrivateKey, message: bytes,
         backend: IbsBackend = DEFAULT_BACKEND) -> IbsSignature:
    return backend.sign(key, message)


def verify(master_public: bytes, pseudonym: Pseudonym, message: bytes,
           signature: IbsSignature, backend: IbsBackend = DEFAULT_BACKEND) -> bool:
    """True iff ``signature`` binds ``message`` to ``pseudonym`` under this master."""
    return backend.verify(master_public, pseudonym, message, signature)


def sign_root(master: MasterKeys, root_bytes: bytes,
              backend: IbsBackend = DEFAULT_BACKEND) -> IbsSignature:
    """Sign a tree-root encoding under the TTP's reserved identity."""
    ttp_key = backend.extract(master, TTP_IDENTITY)
    return backend.sign(ttp_key, root_bytes)
