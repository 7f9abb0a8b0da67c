"""TTP, RSU, and OBU state machines for revocation queries and impeachment.

The TTP owns the leaf set and signs every tree root; RSUs answer queries
from their copy of the tree (a revocation proof for revoked pseudonyms, a
signed 'OK' otherwise) and count queries per pseudonym; OBUs keep two
disjoint caches (revoked, reliable) and cross-examine RSUs: an 'OK' is only
trusted after enough distinct RSUs confirm it, and an 'OK' contradicted by
a revocation proof whose revocation epoch is not after the 'OK' epoch
becomes evidence that revokes the lying RSU.

Actors communicate by value: each operation consumes one message and
returns the messages or outcomes it produced. Delivery order is the
caller's job (the simulator uses a seeded total order).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from . import tree as treemod
from . import wire
from .crypto import (
    PSEUDONYM_LEN,
    TTP_IDENTITY,
    IbsSignature,
    MasterKeys,
    Pseudonym,
    PseudonymPrivateKey,
    extract,
    sign,
    verify,
)
from .tree import RevocationProof, RevocationTree, RevokedLeaf, SignedRoot


class ProtocolError(ValueError):
    pass


class UnknownObu(ProtocolError):
    pass


class UnknownRsu(ProtocolError):
    pass


def _h32(*parts: bytes) -> bytes:
    import hashlib

    digest = hashlib.sha3_256()
    for part in parts:
        digest.update(part)
    return digest.digest()


def rsu_identity(rsu_id: int) -> Pseudonym:
    """Deterministic 32-byte signing identity for an RSU id."""
    return _h32(b"rsu-identity", wire.u32(rsu_id))


def obu_pseudonym(master_public: bytes, obu_id: int, index: int) -> Pseudonym:
    """Deterministic pseudonym for an OBU's index-th identity."""
    return _h32(b"obu-pseudonym", master_public, wire.u32(obu_id), wire.u32(index))


# --- messages ----------------------------------------------------------------


@dataclass(frozen=True)
class Query:
    pseudonym: Pseudonym


@dataclass(frozen=True)
class ProofResponse:
    proof: RevocationProof


@dataclass(frozen=True)
class OkResponse:
    """Signed claim by one RSU that a pseudonym was not revoked at an epoch."""

    pseudonym: Pseudonym
    epoch: int
    rsu_id: int
    rsu_signature: IbsSignature

    def signing_bytes(self) -> bytes:
        return ok_signing_bytes(self.pseudonym, self.epoch, self.rsu_id)


def ok_signing_bytes(pseudonym: Pseudonym, epoch: int, rsu_id: int) -> bytes:
    return pseudonym + wire.u64(epoch) + wire.u32(rsu_id)


@dataclass(frozen=True)
class Impeachment:
    """An 'OK' paired with a revocation proof that contradicts it."""

    ok: OkResponse
    contradiction: RevocationProof


@dataclass(frozen=True)
class TreeUpdate:
    snapshot: bytes


@dataclass(frozen=True)
class FrequencyReport:
    epoch: int
    counters: dict[Pseudonym, int]

    def __post_init__(self):
        object.__setattr__(self, "counters", dict(self.counters))


ProtocolMessage = Union[Query, ProofResponse, OkResponse, Impeachment,
                        TreeUpdate, FrequencyReport]

_TAG_QUERY = 1
_TAG_PROOF_RESPONSE = 2
_TAG_OK_RESPONSE = 3
_TAG_IMPEACHMENT = 4
_TAG_TREE_UPDATE = 5
_TAG_FREQUENCY_REPORT = 6


def encode_message(message: ProtocolMessage) -> bytes:
    if isinstance(message, Query):
        return wire.u8(_TAG_QUERY) + message.pseudonym
    if isinstance(message, ProofResponse):
        return wire.u8(_TAG_PROOF_RESPONSE) + wire.lp_bytes(treemod.encode_proof(message.proof))
    if isinstance(message, OkResponse):
        return (wire.u8(_TAG_OK_RESPONSE) + message.pseudonym + wire.u64(message.epoch)
                + wire.u32(message.rsu_id) + wire.lp_bytes(message.rsu_signature))
    if isinstance(message, Impeachment):
        return (wire.u8(_TAG_IMPEACHMENT)
                + wire.lp_bytes(encode_message(message.ok))
                + wire.lp_bytes(treemod.encode_proof(message.contradiction)))
    if isinstance(message, TreeUpdate):
        return wire.u8(_TAG_TREE_UPDATE) + wire.lp_bytes(message.snapshot)
    if isinstance(message, FrequencyReport):
        entries = sorted(message.counters.items())
        parts = [wire.u8(_TAG_FREQUENCY_REPORT), wire.u64(message.epoch),
                 wire.u32(len(entries))]
        for pseudonym, count in entries:
            if len(pseudonym) != PSEUDONYM_LEN:
                raise wire.FieldRange("counter key is not a pseudonym")
            parts.append(pseudonym)
            parts.append(wire.u64(count))
        return b"".join(parts)
    raise TypeError(f"not a protocol message: {type(message).__name__}")


def decode_message(data: bytes) -> ProtocolMessage:
    reader = wire.Reader(data)
    message = _decode_from(reader)
    reader.finish()
    return message


def _decode_from(reader: wire.Reader) -> ProtocolMessage:
    tag = reader.u8()
    if tag == _TAG_QUERY:
        return Query(pseudonym=reader.take(PSEUDONYM_LEN))
    if tag == _TAG_PROOF_RESPONSE:
        return ProofResponse(proof=treemod.decode_proof(reader.lp_bytes()))
    if tag == _TAG_OK_RESPONSE:
        return OkResponse(
            pseudonym=reader.take(PSEUDONYM_LEN),
            epoch=reader.u64(),
            rsu_id=reader.u32(),
            rsu_signature=reader.lp_bytes(),
        )
    if tag == _TAG_IMPEACHMENT:
        ok = decode_message(reader.lp_bytes())
        if not isinstance(ok, OkResponse):
            raise wire.FieldRange("impeachment must embed an OK response")
        return Impeachment(ok=ok, contradiction=treemod.decode_proof(reader.lp_bytes()))
    if tag == _TAG_TREE_UPDATE:
        return TreeUpdate(snapshot=reader.lp_bytes())
    if tag == _TAG_FREQUENCY_REPORT:
        epoch = reader.u64()
        count = reader.u32()
        if reader.remaining < count * (PSEUDONYM_LEN + 8):
            raise wire.Truncated("report shorter than its entry count implies")
        counters: dict[Pseudonym, int] = {}
        previous = None
        for _ in range(count):
            pseudonym = reader.take(PSEUDONYM_LEN)
            if previous is not None and pseudonym <= previous:
                raise wire.FieldRange("report entries not in canonical order")
            previous = pseudonym
            counters[pseudonym] = reader.u64()
        return FrequencyReport(epoch=epoch, counters=counters)
    raise wire.FieldRange(f"unknown message tag {tag}")


# --- actor state -------------------------------------------------------------


@dataclass
class RsuRecord:
    identity: Pseudonym
    status: str = "active"  # active | revoked


@dataclass
class TtpState:
    """Key authority and tree owner; also adjudicates impeachments."""

    master: MasterKeys
    k: int
    epoch: int = 0
    max_root_age: int = 1
    ewma_alpha: float = 1.0
    obu_registry: dict[int, tuple[Pseudonym, ...]] = field(default_factory=dict)
    revoked_obus: set[int] = field(default_factory=set)
    revoked_leaves: dict[Pseudonym, RevokedLeaf] = field(default_factory=dict)
    rsu_registry: dict[int, RsuRecord] = field(default_factory=dict)
    pending_frequency_reports: dict[int, dict[Pseudonym, int]] = field(default_factory=dict)
    tree: Optional[RevocationTree] = None
    signed_root: Optional[SignedRoot] = None


@dataclass
class RsuState:
    id: int
    signing_key: PseudonymPrivateKey
    ttp_mpu: bytes
    behavior: str = "honest"  # honest | cheater
    tree: Optional[RevocationTree] = None
    signed_root: Optional[SignedRoot] = None
    query_counters: dict[Pseudonym, int] = field(default_factory=dict)
    proofs_issued_this_epoch: int = 0


class Decision(enum.Enum):
    REJECT = "reject"
    ACCEPT = "accept"
    MUST_QUERY = "must_query"


@dataclass
class ObuState:
    """Querying vehicle: disjoint revoked/reliable caches plus pending OKs."""

    id: int
    ttp_mpu: bytes
    trust_threshold: int = 3
    max_root_age: int = 1
    pseudonym_keys: dict[Pseudonym, PseudonymPrivateKey] = field(default_factory=dict)
    revoked_cache: set[Pseudonym] = field(default_factory=set)
    reliable_cache: dict[Pseudonym, int] = field(default_factory=dict)
    pending: dict[Pseudonym, list[OkResponse]] = field(default_factory=dict)
    revoked_rsus: set[int] = field(default_factory=set)


# --- operation outcomes -------------------------------------------------------


@dataclass(frozen=True)
class CacheUpdate:
    kind: str  # revoked | reliable
    pseudonym: Pseudonym


@dataclass(frozen=True)
class ImpeachmentEmitted:
    impeachment: Impeachment
    pseudonym: Pseudonym


@dataclass(frozen=True)
class Pending:
    pseudonym: Pseudonym
    distinct_rsus: int


@dataclass(frozen=True)
class Discarded:
    pseudonym: Pseudonym
    reason: str


ObuOutcome = Union[CacheUpdate, ImpeachmentEmitted, Pending, Discarded]


@dataclass(frozen=True)
class RsuRevoked:
    rsu_id: int


@dataclass(frozen=True)
class Dismissed:
    reason: str


# --- TTP operations -----------------------------------------------------------


def make_ttp(master: MasterKeys, k: int, max_root_age: int = 1,
             ewma_alpha: float = 1.0) -> TtpState:
    if not 0.0 < ewma_alpha <= 1.0:
        raise ProtocolError("ewma_alpha must be in (0, 1]")
    ttp = TtpState(master=master, k=k, max_root_age=max_root_age,
                   ewma_alpha=ewma_alpha)
    ttp.signed_root = treemod.make_empty_signed_root(k, ttp.epoch, master)
    return ttp


def ttp_register_obu(ttp: TtpState, obu_id: int, num_pseudonyms: int) -> dict[Pseudonym, PseudonymPrivateKey]:
    """Issue an OBU its pseudonyms and the matching private keys."""
    if obu_id in ttp.obu_registry:
        raise ProtocolError(f"obu {obu_id} already registered")
    if num_pseudonyms < 1:
        raise ProtocolError("an OBU needs at least one pseudonym")
    pseudonyms = tuple(
        obu_pseudonym(ttp.master.master_public, obu_id, i) for i in range(num_pseudonyms)
    )
    ttp.obu_registry[obu_id] = pseudonyms
    return {p: extract(ttp.master, p) for p in pseudonyms}


def ttp_register_rsu(ttp: TtpState, rsu_id: int) -> RsuState:
    if rsu_id in ttp.rsu_registry:
        raise ProtocolError(f"rsu {rsu_id} already registered")
    identity = rsu_identity(rsu_id)
    ttp.rsu_registry[rsu_id] = RsuRecord(identity=identity)
    return RsuState(
        id=rsu_id,
        signing_key=extract(ttp.master, identity),
        ttp_mpu=ttp.master.master_public,
        signed_root=ttp.signed_root,
        tree=None,
    )


def _ttp_rebuild(ttp: TtpState) -> TreeUpdate:
    if ttp.revoked_leaves:
        leaves = [ttp.revoked_leaves[p] for p in sorted(ttp.revoked_leaves)]
        ttp.tree, ttp.signed_root = treemod.build_tree(leaves, ttp.k, ttp.epoch, ttp.master)
    else:
        ttp.tree = None
        ttp.signed_root = treemod.make_empty_signed_root(ttp.k, ttp.epoch, ttp.master)
    return TreeUpdate(snapshot=treemod.encode_snapshot(ttp.tree, ttp.signed_root))


def ttp_revoke_obu(ttp: TtpState, obu_id: int) -> Optional[TreeUpdate]:
    """Insert every pseudonym of the OBU; None means it was already revoked."""
    pseudonyms = ttp.obu_registry.get(obu_id)
    if pseudonyms is None:
        raise UnknownObu(str(obu_id))
    if obu_id in ttp.revoked_obus:
        return None
    ttp.revoked_obus.add(obu_id)
    for p in pseudonyms:
        ttp.revoked_leaves[p] = RevokedLeaf(
            pseudonym=p, revocation_epoch=ttp.epoch, frequency=0
        )
    return _ttp_rebuild(ttp)


def ttp_receive_frequency_report(ttp: TtpState, report: FrequencyReport) -> None:
    bucket = ttp.pending_frequency_reports.setdefault(report.epoch, {})
    for pseudonym, count in report.counters.items():
        bucket[pseudonym] = bucket.get(pseudonym, 0) + count


def ttp_epoch_update(ttp: TtpState, expired: set[Pseudonym] = frozenset()) -> TreeUpdate:
    """Close the epoch: fold in reported frequencies, drop expired leaves.

    Missing reports simply contribute zero. With ewma_alpha < 1 the new
    frequency blends this epoch's aggregate into the previous value.
    """
    for p in expired:
        if p not in ttp.revoked_leaves:
            raise treemod.UnknownPseudonym(p.hex())
    aggregated = ttp.pending_frequency_reports.pop(ttp.epoch, {})
    alpha = ttp.ewma_alpha
    for p in sorted(ttp.revoked_leaves):
        if p in expired:
            del ttp.revoked_leaves[p]
            continue
        leaf = ttp.revoked_leaves[p]
        observed = aggregated.get(p, 0)
        smoothed = int(round(alpha * observed + (1.0 - alpha) * leaf.frequency))
        ttp.revoked_leaves[p] = RevokedLeaf(
            pseudonym=p, revocation_epoch=leaf.revocation_epoch, frequency=smoothed
        )
    ttp.epoch += 1
    for stale in [e for e in ttp.pending_frequency_reports if e < ttp.epoch]:
        del ttp.pending_frequency_reports[stale]
    return _ttp_rebuild(ttp)


def ttp_handle_impeachment(ttp: TtpState, imp: Impeachment) -> Union[RsuRevoked, Dismissed]:
    """Adjudicate evidence against an RSU; a false impeachment never revokes.

    The accused RSU's registered key must verify the 'OK', the proof must
    verify on its own, and the revocation must predate (or share) the 'OK'
    epoch -- only then did the RSU certify a pseudonym it knew was revoked.
    """
    record = ttp.rsu_registry.get(imp.ok.rsu_id)
    if record is None:
        return Dismissed("unknown_rsu")
    if record.status != "active":
        return Dismissed("rsu_not_active")
    if not verify(ttp.master.master_public, record.identity,
                  imp.ok.signing_bytes(), imp.ok.rsu_signature):
        return Dismissed("bad_ok_signature")
    result = treemod.verify_proof(
        imp.contradiction, imp.ok.pseudonym, ttp.master.master_public,
        current_epoch=ttp.epoch, max_age=ttp.max_root_age,
    )
    if not result:
        return Dismissed(f"bad_proof:{result.reason}")
    if imp.ok.epoch < imp.contradiction.revocation_epoch:
        return Dismissed("no_contradiction")
    record.status = "revoked"
    return RsuRevoked(rsu_id=imp.ok.rsu_id)


# --- RSU operations -----------------------------------------------------------


def rsu_apply_update(rsu: RsuState, update: TreeUpdate) -> None:
    """Install a snapshot after checking the TTP signature and epoch order."""
    new_tree, signed = treemod.decode_snapshot(update.snapshot)
    if not verify(rsu.ttp_mpu, TTP_IDENTITY, signed.signing_bytes(), signed.ttp_signature):
        raise ProtocolError("tree update root signature invalid")
    if rsu.signed_root is not None and signed.epoch < rsu.signed_root.epoch:
        raise ProtocolError("tree update epoch moves backwards")
    if rsu.signed_root is not None and signed.epoch > rsu.signed_root.epoch:
        rsu.query_counters = {}
        rsu.proofs_issued_this_epoch = 0
    rsu.tree = new_tree
    rsu.signed_root = signed


def rsu_handle_query(rsu: RsuState, query: Query) -> Union[ProofResponse, OkResponse]:
    """Answer with a proof for revoked pseudonyms, a signed 'OK' otherwise.

    A cheater RSU answers 'OK' unconditionally; it cannot forge proofs, so
    lying about a revoked pseudonym is its only available fraud.
    """
    if rsu.signed_root is None:
        raise ProtocolError("rsu has no tree state")
    pseudonym = query.pseudonym
    revoked = rsu.tree is not None and pseudonym in rsu.tree.path_table
    if revoked and rsu.behavior != "cheater":
        proof = treemod.generate_proof(rsu.tree, pseudonym)
        assert proof is not None
        rsu.query_counters[pseudonym] = rsu.query_counters.get(pseudonym, 0) + 1
        rsu.proofs_issued_this_epoch += 1
        return ProofResponse(proof=proof)
    epoch = rsu.signed_root.epoch
    signature = sign(rsu.signing_key, ok_signing_bytes(pseudonym, epoch, rsu.id))
    return OkResponse(pseudonym=pseudonym, epoch=epoch, rsu_id=rsu.id,
                      rsu_signature=signature)


def rsu_report_frequencies(rsu: RsuState, epoch: int) -> FrequencyReport:
    """Snapshot this epoch's per-pseudonym query counts and reset them."""
    if rsu.signed_root is None or epoch != rsu.signed_root.epoch:
        raise ProtocolError("report epoch does not match the RSU's tree epoch")
    report = FrequencyReport(epoch=epoch, counters=dict(rsu.query_counters))
    rsu.query_counters = {}
    rsu.proofs_issued_this_epoch = 0
    return report


# --- OBU operations -----------------------------------------------------------


def obu_check(obu: ObuState, pseudonym: Pseudonym) -> Decision:
    """Cache-only decision; MUST_QUERY means the caches say nothing."""
    if pseudonym in obu.revoked_cache:
        return Decision.REJECT
    if pseudonym in obu.reliable_cache:
        return Decision.ACCEPT
    return Decision.MUST_QUERY


def obu_process_response(obu: ObuState, response: Union[ProofResponse, OkResponse],
                         current_epoch: int) -> ObuOutcome:
    """Fold one RSU answer into the caches.

    A verified proof caches the pseudonym as revoked and, if a pending 'OK'
    claimed it was fine at an epoch at or after the revocation, emits the
    impeachment pairing the two. An 'OK' accumulates until
    ``trust_threshold`` distinct RSUs agree, then caches as reliable.
    """
    if isinstance(response, ProofResponse):
        proof = response.proof
        pseudonym = proof.pseudonym
        result = treemod.verify_proof(proof, pseudonym, obu.ttp_mpu,
                                      current_epoch, obu.max_root_age)
        if not result:
            return Discarded(pseudonym, f"proof_rejected:{result.reason}")
        contradicted = None
        for ok in obu.pending.get(pseudonym, []):
            if ok.epoch >= proof.revocation_epoch:
                contradicted = ok
                break
        obu.revoked_cache.add(pseudonym)
        obu.reliable_cache.pop(pseudonym, None)
        obu.pending.pop(pseudonym, None)
        if contradicted is not None:
            return ImpeachmentEmitted(
                impeachment=Impeachment(ok=contradicted, contradiction=proof),
                pseudonym=pseudonym,
            )
        return CacheUpdate(kind="revoked", pseudonym=pseudonym)

    if isinstance(response, OkResponse):
        pseudonym = response.pseudonym
        if response.rsu_id in obu.revoked_rsus:
            return Discarded(pseudonym, "revoked_rsu")
        if not verify(obu.ttp_mpu, rsu_identity(response.rsu_id),
                      response.signing_bytes(), response.rsu_signature):
            return Discarded(pseudonym, "bad_ok_signature")
        if pseudonym in obu.revoked_cache:
            return Discarded(pseudonym, "already_revoked")
        oks = obu.pending.setdefault(pseudonym, [])
        oks.append(response)
        distinct = len({ok.rsu_id for ok in oks})
        if distinct >= obu.trust_threshold:
            obu.reliable_cache[pseudonym] = max(ok.epoch for ok in oks)
            obu.pending.pop(pseudonym, None)
            return CacheUpdate(kind="reliable", pseudonym=pseudonym)
        return Pending(pseudonym=pseudonym, distinct_rsus=distinct)

    raise TypeError(f"not an RSU answer: {type(response).__name__}")


def obu_advance_epoch(obu: ObuState, new_epoch: int) -> None:
    """Expire reliable entries whose newest supporting 'OK' predates the epoch."""
    obu.reliable_cache = {
        p: epoch for p, epoch in obu.reliable_cache.items() if epoch >= new_epoch
    }


def obu_note_rsu_revoked(obu: ObuState, rsu_id: int) -> None:
    """Stop trusting an RSU: drop its pending 'OK's and ignore future ones."""
    obu.revoked_rsus.add(rsu_id)
    for pseudonym in list(obu.pending):
        kept = [ok for ok in obu.pending[pseudonym] if ok.rsu_id != rsu_id]
        if kept:
            obu.pending[pseudonym] = kept
        else:
            del obu.pending[pseudonym]


def check_obu_invariants(obu: ObuState) -> None:
    """Assert the cache-disjointness invariant; used by the simulator."""
    overlap = obu.revoked_cache & obu.reliable_cache.keys()
    if overlap:
        raise AssertionError(
            f"caches overlap on {len(overlap)} pseudonyms (obu {obu.id})"
        )
