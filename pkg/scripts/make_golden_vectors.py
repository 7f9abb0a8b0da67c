#!/usr/bin/env python3
"""Regenerate the frozen protocol-message vectors in tests/golden/.

The vectors pin the wire format across versions; regenerating them is only
correct when the format version changes on purpose.
"""

import hashlib
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from huffrev import protocol, tree
from huffrev.crypto import extract, setup, sign
from huffrev.tree import RevokedLeaf

GOLDEN = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"


def pseudonym(i: int) -> bytes:
    return hashlib.sha3_256(b"golden-pseudonym" + bytes([i])).digest()


def main() -> None:
    master = setup(b"\x24" * 32)
    leaves = [RevokedLeaf(pseudonym(i), 2, f) for i, f in enumerate((9, 4, 2))]
    built, _ = tree.build_tree(leaves, 3, 5, master)
    proof = tree.generate_proof(built, pseudonym(1))

    rsu_id = 12
    key = extract(master, protocol.rsu_identity(rsu_id))
    ok = protocol.OkResponse(
        pseudonym=pseudonym(7),
        epoch=5,
        rsu_id=rsu_id,
        rsu_signature=sign(key, protocol.ok_signing_bytes(pseudonym(7), 5, rsu_id)),
    )

    messages = {
        "query": protocol.Query(pseudonym=pseudonym(0)),
        "proof_response": protocol.ProofResponse(proof=proof),
        "ok_response": ok,
        "impeachment": protocol.Impeachment(ok=ok, contradiction=proof),
        "tree_update": protocol.TreeUpdate(snapshot=tree.encode_tree(built)),
        "frequency_report": protocol.FrequencyReport(
            epoch=5, counters={pseudonym(0): 3, pseudonym(1): 11}
        ),
    }
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name, message in messages.items():
        path = GOLDEN / f"message_{name}.bin"
        path.write_bytes(protocol.encode_message(message))
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
