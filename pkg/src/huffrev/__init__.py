"""Frequency-ordered Huffman k-ary hash trees for pseudonym revocation.

The library has five parts: ``crypto`` (identity-based signatures keyed by
pseudonyms), ``tree`` (the signed revocation tree with membership proofs),
``protocol`` (TTP/RSU/OBU state machines including impeachment of cheating
RSUs), ``sim`` (the seeded measurement harness), and ``cli`` (the
``huffrev`` command).
"""

from .crypto import MasterKeys, extract, setup, sign, sign_root, verify
from .sim import MetricsReport, SimConfig, gen_workload, run_simulation
from .tree import (
    RevocationProof,
    RevocationTree,
    RevokedLeaf,
    SignedRoot,
    build_tree,
    decode_proof,
    decode_tree,
    encode_proof,
    encode_tree,
    generate_proof,
    lookup_path,
    update_tree,
    verify_proof,
    weighted_path_length,
)

__version__ = "0.1.0"

__all__ = [
    "MasterKeys", "extract", "setup", "sign", "sign_root", "verify",
    "MetricsReport", "SimConfig", "gen_workload", "run_simulation",
    "RevocationProof", "RevocationTree", "RevokedLeaf", "SignedRoot",
    "build_tree", "decode_proof", "decode_tree", "encode_proof", "encode_tree",
    "generate_proof", "lookup_path", "update_tree", "verify_proof",
    "weighted_path_length", "__version__",
]
