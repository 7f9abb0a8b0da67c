import hashlib
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from huffrev.crypto import setup
from huffrev.tree import RevokedLeaf


def pseudonym(label: int | bytes) -> bytes:
    if isinstance(label, int):
        label = label.to_bytes(8, "big")
    return hashlib.sha3_256(b"test-pseudonym:" + label).digest()


def leaves_from(freqs, epoch: int = 0) -> list[RevokedLeaf]:
    return [RevokedLeaf(pseudonym(i), epoch, f) for i, f in enumerate(freqs)]


@pytest.fixture
def master():
    return setup(hashlib.sha3_256(b"test-master-seed").digest())
