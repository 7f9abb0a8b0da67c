"""Frequency-ordered k-ary hash trees with signed roots and membership proofs.

Revoked pseudonyms are the leaves; each leaf's digest commits to the
pseudonym and the epoch it was revoked in. Internal nodes hash the
concatenation of their children's digests, and the tree shape comes from a
k-at-a-time Huffman merge on query frequencies, so heavily queried leaves
sit near the root and their proofs are short. The TTP signs the root, which
makes any root-to-leaf path plus siblings self-verifying evidence.

Construction is deterministic: merge candidates are taken by (frequency,
then age -- original leaves in digest order before derived parents in
creation order), children are ordered by (real-before-dummy, frequency,
digest), and zero-frequency dummy leaves pad the count so every internal
node has exactly k children. Identical leaf sets therefore rebuild to
bytewise-identical roots, which is what lets RSUs reproduce the TTP's tree
from a plain leaf snapshot. Breaking frequency ties by age instead of
digest keeps equal-frequency regions balanced (digest order lets
zero-frequency parents chain into arbitrarily deep paths) and does not
affect optimality: any choice of k minimum-frequency nodes yields a
minimum weighted path length.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from . import wire
from .crypto import (
    PSEUDONYM_LEN,
    TTP_IDENTITY,
    IbsSignature,
    MasterKeys,
    Pseudonym,
    sign_root,
    verify,
)

DIGEST_LEN = 32

_LEAF_TAG = b"\x00"
_INTERNAL_TAG = b"\x01"
_DUMMY_TAG = b"\x02"
_EMPTY_TAG = b"\x03"

SNAPSHOT_MAGIC = b"HCRT"
PROOF_MAGIC = b"HPRF"
FORMAT_VERSION = 1

MAX_K = 255

TreePath = tuple[int, ...]


class TreeError(ValueError):
    pass


class EmptyLeafSet(TreeError):
    pass


class BadArity(TreeError):
    pass


class DuplicatePseudonym(TreeError):
    pass


class UnknownPseudonym(TreeError):
    pass


class EpochNotAdvanced(TreeError):
    pass


class RootMismatch(wire.CodecError):
    """Snapshot leaves do not rebuild to the stored root digest."""


@dataclass(frozen=True)
class RevokedLeaf:
    """One revoked pseudonym: when it was revoked and how often it is queried."""

    pseudonym: Pseudonym
    revocation_epoch: int
    frequency: int

    def digest(self) -> bytes:
        return _h(_LEAF_TAG, self.pseudonym, wire.u64(self.revocation_epoch))


@dataclass(frozen=True)
class SignedRoot:
    """Trust anchor: the root digest plus tree parameters, TTP-signed."""

    root_digest: bytes
    epoch: int
    k: int
    leaf_count: int
    ttp_signature: IbsSignature

    def signing_bytes(self) -> bytes:
        """Canonical byte string the TTP signature covers."""
        return (
            self.root_digest
            + wire.u64(self.epoch)
            + wire.u8(self.k)
            + wire.u32(self.leaf_count)
        )

    def encode(self) -> bytes:
        return self.signing_bytes() + wire.lp_bytes(self.ttp_signature)

    @classmethod
    def decode_from(cls, reader: wire.Reader) -> "SignedRoot":
        root_digest = reader.take(DIGEST_LEN)
        epoch = reader.u64()
        k = reader.u8()
        leaf_count = reader.u32()
        signature = reader.lp_bytes()
        if k < 2:
            raise wire.FieldRange(f"k must be >= 2, got {k}")
        return cls(root_digest=root_digest, epoch=epoch, k=k,
                   leaf_count=leaf_count, ttp_signature=signature)


@dataclass(frozen=True)
class RevocationProof:
    """Route from root to one revoked leaf, with every sibling digest.

    ``path[i]`` is the branch taken at depth i; ``siblings[i]`` holds the
    other k-1 child digests at that level in child order. Recomputing the
    hashes bottom-up must land exactly on ``signed_root.root_digest``.
    """

    pseudonym: Pseudonym
    revocation_epoch: int
    path: TreePath
    siblings: tuple[tuple[bytes, ...], ...]
    signed_root: SignedRoot

    @property
    def depth(self) -> int:
        return len(self.path)


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.accepted


_ACCEPT = VerifyResult(True)


def _reject(reason: str) -> VerifyResult:
    return VerifyResult(False, reason)


@dataclass
class _Node:
    digest: bytes
    frequency: int
    children: tuple["_Node", ...] = ()
    leaf: Optional[RevokedLeaf] = None
    is_dummy: bool = False


@dataclass(frozen=True)
class RevocationTree:
    """Immutable built tree; equal leaf sets always give equal roots."""

    k: int
    epoch: int
    leaves: tuple[RevokedLeaf, ...]
    root: _Node = field(repr=False, compare=False)
    path_table: dict[Pseudonym, TreePath] = field(repr=False, compare=False)
    depth: int
    signed_root: SignedRoot

    @property
    def root_digest(self) -> bytes:
        return self.root.digest

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)


def _h(*parts: bytes) -> bytes:
    digest = hashlib.sha3_256()
    for part in parts:
        digest.update(part)
    return digest.digest()


def _dummy_digest(index: int) -> bytes:
    return _h(_DUMMY_TAG, wire.u64(index))


def empty_root_digest(epoch: int) -> bytes:
    """Digest standing in for a tree with no revocations at this epoch."""
    return _h(_EMPTY_TAG, wire.u64(epoch))


def _check_leaves(leaves: Iterable[RevokedLeaf], epoch: int) -> list[RevokedLeaf]:
    out = []
    seen: set[bytes] = set()
    for leaf in leaves:
        if len(leaf.pseudonym) != PSEUDONYM_LEN:
            raise TreeError(f"pseudonym must be {PSEUDONYM_LEN} bytes")
        if not 0 <= leaf.revocation_epoch <= wire.U64_MAX:
            raise TreeError("revocation_epoch out of u64 range")
        if not 0 <= leaf.frequency <= wire.U64_MAX:
            raise TreeError("frequency out of u64 range")
        if leaf.revocation_epoch > epoch:
            raise TreeError("leaf revoked after the tree epoch")
        if leaf.pseudonym in seen:
            raise DuplicatePseudonym(leaf.pseudonym.hex())
        seen.add(leaf.pseudonym)
        out.append(leaf)
    if not out:
        raise EmptyLeafSet("a revocation tree needs at least one leaf")
    out.sort(key=lambda l: l.pseudonym)
    return out


def _build_structure(leaves: list[RevokedLeaf], k: int) -> tuple[_Node, dict[Pseudonym, TreePath], int]:
    """Deterministic Huffman merge; returns (root, path table, depth)."""
    nodes = [
        _Node(digest=leaf.digest(), frequency=leaf.frequency, leaf=leaf)
        for leaf in leaves
    ]
    nodes.sort(key=lambda n: n.digest)
    # The root must be an internal node, so a lone leaf pads up to k children.
    pad = k - 1 if len(nodes) == 1 else (-(len(nodes) - 1)) % (k - 1)
    for i in range(pad):
        nodes.append(_Node(digest=_dummy_digest(i), frequency=0, is_dummy=True))

    # Heap key is (frequency, age): node indexes double as ages, with leaves
    # laid out in digest order ahead of every derived parent.
    heap: list[tuple[int, int]] = [
        (node.frequency, i) for i, node in enumerate(nodes)
    ]
    heapq.heapify(heap)
    while len(heap) > 1:
        group = [heapq.heappop(heap) for _ in range(k)]
        children = [nodes[i] for _, i in group]
        children.sort(key=lambda n: (n.is_dummy, n.frequency, n.digest))
        parent = _Node(
            digest=_h(_INTERNAL_TAG, *(c.digest for c in children)),
            frequency=sum(c.frequency for c in children),
            children=tuple(children),
        )
        nodes.append(parent)
        heapq.heappush(heap, (parent.frequency, len(nodes) - 1))
    root = nodes[heap[0][1]]

    path_table: dict[Pseudonym, TreePath] = {}
    depth = 0
    stack: list[tuple[_Node, TreePath]] = [(root, ())]
    while stack:
        node, path = stack.pop()
        if node.children:
            for idx, child in enumerate(node.children):
                stack.append((child, path + (idx,)))
        else:
            depth = max(depth, len(path))
            if node.leaf is not None:
                path_table[node.leaf.pseudonym] = path
    return root, path_table, depth


def build_tree(leaves: Iterable[RevokedLeaf], k: int, epoch: int,
               master: MasterKeys) -> tuple[RevocationTree, SignedRoot]:
    """Build and sign the Huffman k-ary tree over ``leaves``.

    Rejects an empty leaf set, k < 2, and duplicate pseudonyms, each with
    its own error type.
    """
    if k < 2 or k > MAX_K:
        raise BadArity(f"k must be in [2, {MAX_K}], got {k}")
    if not 0 <= epoch <= wire.U64_MAX:
        raise TreeError("epoch out of u64 range")
    checked = _check_leaves(leaves, epoch)
    root, path_table, depth = _build_structure(checked, k)
    signed = SignedRoot(
        root_digest=root.digest,
        epoch=epoch,
        k=k,
        leaf_count=len(checked),
        ttp_signature=b"",
    )
    signed = replace(signed, ttp_signature=sign_root(master, signed.signing_bytes()))
    tree = RevocationTree(
        k=k,
        epoch=epoch,
        leaves=tuple(checked),
        root=root,
        path_table=path_table,
        depth=depth,
        signed_root=signed,
    )
    return tree, signed


def make_empty_signed_root(k: int, epoch: int, master: MasterKeys) -> SignedRoot:
    """Signed stand-in for the no-revocations state (leaf_count 0)."""
    if k < 2 or k > MAX_K:
        raise BadArity(f"k must be in [2, {MAX_K}], got {k}")
    signed = SignedRoot(
        root_digest=empty_root_digest(epoch),
        epoch=epoch,
        k=k,
        leaf_count=0,
        ttp_signature=b"",
    )
    return replace(signed, ttp_signature=sign_root(master, signed.signing_bytes()))


def lookup_path(tree: RevocationTree, pseudonym: Pseudonym) -> Optional[TreePath]:
    """Path table lookup; None means the pseudonym is not revoked."""
    return tree.path_table.get(pseudonym)


def generate_proof(tree: RevocationTree, pseudonym: Pseudonym) -> Optional[RevocationProof]:
    """Proof of revocation for ``pseudonym``, or None if it is not a leaf."""
    path = tree.path_table.get(pseudonym)
    if path is None:
        return None
    siblings: list[tuple[bytes, ...]] = []
    node = tree.root
    for branch in path:
        siblings.append(tuple(
            child.digest for i, child in enumerate(node.children) if i != branch
        ))
        node = node.children[branch]
    leaf = node.leaf
    assert leaf is not None
    return RevocationProof(
        pseudonym=leaf.pseudonym,
        revocation_epoch=leaf.revocation_epoch,
        path=path,
        siblings=tuple(siblings),
        signed_root=tree.signed_root,
    )


def _proof_structure_ok(proof: RevocationProof) -> bool:
    k = proof.signed_root.k
    if not 2 <= k <= MAX_K:
        return False
    if len(proof.pseudonym) != PSEUDONYM_LEN:
        return False
    if not 0 <= proof.revocation_epoch <= wire.U64_MAX:
        return False
    if len(proof.signed_root.root_digest) != DIGEST_LEN:
        return False
    d = len(proof.path)
    if d < 1 or len(proof.siblings) != d:
        return False
    for branch, level in zip(proof.path, proof.siblings):
        if not 0 <= branch < k:
            return False
        if len(level) != k - 1:
            return False
        if any(len(s) != DIGEST_LEN for s in level):
            return False
    return True


def recompute_root(proof: RevocationProof) -> bytes:
    """Fold the leaf digest up the claimed path using the sibling digests."""
    current = RevokedLeaf(proof.pseudonym, proof.revocation_epoch, 0).digest()
    for branch, level in zip(reversed(proof.path), reversed(proof.siblings)):
        children = list(level[:branch]) + [current] + list(level[branch:])
        current = _h(_INTERNAL_TAG, *children)
    return current


def verify_proof(proof: RevocationProof, pseudonym: Pseudonym, ttp_mpu: bytes,
                 current_epoch: int, max_age: int) -> VerifyResult:
    """Check a proof end to end; safe on adversarial input.

    Accept means: the proof names ``pseudonym``, its hashes rebuild the
    signed root digest, the root signature verifies under the TTP identity,
    and the root is no more than ``max_age`` epochs old. Reject carries the
    first check that failed.
    """
    if proof.pseudonym != pseudonym:
        return _reject("pseudonym_mismatch")
    if not _proof_structure_ok(proof):
        return _reject("malformed")
    if recompute_root(proof) != proof.signed_root.root_digest:
        return _reject("root_mismatch")
    if not verify(ttp_mpu, TTP_IDENTITY, proof.signed_root.signing_bytes(),
                  proof.signed_root.ttp_signature):
        return _reject("bad_signature")
    if current_epoch - proof.signed_root.epoch > max_age:
        return _reject("stale")
    return _ACCEPT


def update_tree(tree: RevocationTree, add: Iterable[RevokedLeaf],
                expire: Iterable[Pseudonym], new_frequencies: Mapping[Pseudonym, int],
                new_epoch: int, master: MasterKeys) -> tuple[RevocationTree, SignedRoot]:
    """Full rebuild on the edited leaf set; never an incremental rotation.

    Expiring an absent pseudonym and adding a duplicate are rejections;
    frequency overrides must name pseudonyms present after the edit.
    """
    if new_epoch <= tree.epoch:
        raise EpochNotAdvanced(f"epoch {new_epoch} does not advance {tree.epoch}")
    by_pseudonym = {leaf.pseudonym: leaf for leaf in tree.leaves}
    for p in expire:
        if p not in by_pseudonym:
            raise UnknownPseudonym(p.hex())
        del by_pseudonym[p]
    for leaf in add:
        if leaf.pseudonym in by_pseudonym:
            raise DuplicatePseudonym(leaf.pseudonym.hex())
        by_pseudonym[leaf.pseudonym] = leaf
    for p, freq in new_frequencies.items():
        if p not in by_pseudonym:
            raise UnknownPseudonym(p.hex())
        by_pseudonym[p] = replace(by_pseudonym[p], frequency=freq)
    return build_tree(by_pseudonym.values(), tree.k, new_epoch, master)


def weighted_path_length(tree: RevocationTree) -> int:
    """Sum of frequency x depth over the real (non-dummy) leaves."""
    return sum(
        leaf.frequency * len(tree.path_table[leaf.pseudonym]) for leaf in tree.leaves
    )


# --- snapshot codec ---------------------------------------------------------
#
# Layout: "HCRT" | version u8 | k u8 | epoch u64 | leaf_count u32 |
# leaf_count x (pseudonym 32 | revocation_epoch u64 | frequency u64) |
# SignedRoot block. Leaves are sorted by pseudonym, so equal leaf sets give
# identical bytes; decoders rebuild the tree and must land on the stored
# root digest. leaf_count 0 encodes the no-revocations state (tree is None).


def encode_snapshot(tree: Optional[RevocationTree], signed_root: SignedRoot) -> bytes:
    parts = [
        SNAPSHOT_MAGIC,
        wire.u8(FORMAT_VERSION),
        wire.u8(signed_root.k),
        wire.u64(signed_root.epoch),
        wire.u32(0 if tree is None else tree.leaf_count),
    ]
    if tree is not None:
        for leaf in tree.leaves:
            parts.append(leaf.pseudonym)
            parts.append(wire.u64(leaf.revocation_epoch))
            parts.append(wire.u64(leaf.frequency))
    parts.append(signed_root.encode())
    return b"".join(parts)


def decode_snapshot(data: bytes) -> tuple[Optional[RevocationTree], SignedRoot]:
    reader = wire.Reader(data)
    reader.expect_magic(SNAPSHOT_MAGIC)
    version = reader.u8()
    if version != FORMAT_VERSION:
        raise wire.FieldRange(f"unsupported snapshot version {version}")
    k = reader.u8()
    if k < 2:
        raise wire.FieldRange(f"k must be >= 2, got {k}")
    epoch = reader.u64()
    leaf_count = reader.u32()
    if reader.remaining < leaf_count * (PSEUDONYM_LEN + 16):
        raise wire.Truncated("snapshot shorter than its leaf count implies")
    leaves = []
    for _ in range(leaf_count):
        pseudonym = reader.take(PSEUDONYM_LEN)
        revocation_epoch = reader.u64()
        frequency = reader.u64()
        leaves.append(RevokedLeaf(pseudonym, revocation_epoch, frequency))
    signed = SignedRoot.decode_from(reader)
    reader.finish()
    if signed.k != k or signed.epoch != epoch or signed.leaf_count != leaf_count:
        raise wire.FieldRange("signed root disagrees with snapshot header")

    if leaf_count == 0:
        if signed.root_digest != empty_root_digest(epoch):
            raise RootMismatch("empty snapshot root digest mismatch")
        return None, signed

    for prev, cur in zip(leaves, leaves[1:]):
        if prev.pseudonym >= cur.pseudonym:
            raise wire.FieldRange("snapshot leaves not in canonical order")
    try:
        checked = _check_leaves(leaves, epoch)
    except TreeError as exc:
        raise wire.FieldRange(str(exc)) from exc
    root, path_table, depth = _build_structure(checked, k)
    if root.digest != signed.root_digest:
        raise RootMismatch("rebuilt root does not match stored root digest")
    tree = RevocationTree(
        k=k,
        epoch=epoch,
        leaves=tuple(checked),
        root=root,
        path_table=path_table,
        depth=depth,
        signed_root=signed,
    )
    return tree, signed


def encode_tree(tree: RevocationTree) -> bytes:
    return encode_snapshot(tree, tree.signed_root)


def decode_tree(data: bytes) -> RevocationTree:
    tree, _ = decode_snapshot(data)
    if tree is None:
        raise wire.FieldRange("snapshot holds no leaves")
    return tree


# --- proof codec ------------------------------------------------------------
#
# Layout: "HPRF" | version u8 | k u8 | path_len u16 | path bytes |
# sibling digests level by level, leaf-adjacent level first |
# pseudonym 32 | revocation_epoch u64 | SignedRoot block.


def encode_proof(proof: RevocationProof) -> bytes:
    k = proof.signed_root.k
    parts = [
        PROOF_MAGIC,
        wire.u8(FORMAT_VERSION),
        wire.u8(k),
        wire.u16(len(proof.path)),
        bytes(proof.path),
    ]
    for level in reversed(proof.siblings):
        parts.extend(level)
    parts.append(proof.pseudonym)
    parts.append(wire.u64(proof.revocation_epoch))
    parts.append(proof.signed_root.encode())
    return b"".join(parts)


def decode_proof(data: bytes) -> RevocationProof:
    reader = wire.Reader(data)
    reader.expect_magic(PROOF_MAGIC)
    version = reader.u8()
    if version != FORMAT_VERSION:
        raise wire.FieldRange(f"unsupported proof version {version}")
    k = reader.u8()
    if k < 2:
        raise wire.FieldRange(f"k must be >= 2, got {k}")
    path_len = reader.u16()
    if path_len < 1:
        raise wire.FieldRange("proof path must have at least one level")
    if reader.remaining < path_len + path_len * (k - 1) * DIGEST_LEN:
        raise wire.Truncated("proof shorter than its path length implies")
    path = tuple(reader.take(path_len))
    if any(branch >= k for branch in path):
        raise wire.FieldRange("branch index out of range for k")
    levels = []
    for _ in range(path_len):
        levels.append(tuple(reader.take(DIGEST_LEN) for _ in range(k - 1)))
    pseudonym = reader.take(PSEUDONYM_LEN)
    revocation_epoch = reader.u64()
    signed = SignedRoot.decode_from(reader)
    reader.finish()
    if signed.k != k:
        raise wire.FieldRange("signed root k disagrees with proof header")
    return RevocationProof(
        pseudonym=pseudonym,
        revocation_epoch=revocation_epoch,
        path=path,
        siblings=tuple(reversed(levels)),
        signed_root=signed,
    )
