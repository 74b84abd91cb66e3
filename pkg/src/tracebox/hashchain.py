"""Chain of integrity proofs.

Every selected message extends a SHA-256 chain: the new head is the hash of
the previous head's raw 32 bytes followed by the canonical encoding of the
message. The chain starts from the hash of a 32-byte random seed, so two
recordings of identical streams never share digests. Only the initial head
is ever persisted; the raw seed is discarded after use.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .errors import ConfigError

if TYPE_CHECKING:
    from .recorder import MessageRecord

SEED_LENGTH = 32
DIGEST_LENGTH = 32


class SeedLengthError(ConfigError):
    """Chain seed is not exactly 32 bytes."""


class Digest(bytes):
    """A 32-byte SHA-256 digest. Renders as 64 lowercase hex chars via hex()."""

    def __new__(cls, value: bytes) -> "Digest":
        if len(value) != DIGEST_LENGTH:
            raise ValueError(f"digest must be {DIGEST_LENGTH} bytes, got {len(value)}")
        return super().__new__(cls, value)

    @classmethod
    def from_hex(cls, text: str) -> "Digest":
        return cls(bytes.fromhex(text))


@dataclass(frozen=True)
class ChainState:
    """Evolving chain head: current digest, entry count, and the initial head."""

    head: Digest
    length: int
    h0: Digest


def random_seed() -> bytes:
    """32 random bytes from a cryptographically secure source."""
    return secrets.token_bytes(SEED_LENGTH)


def init_chain(seed: bytes) -> ChainState:
    """Start a chain whose head is the hash of the seed.

    Raises:
        SeedLengthError: if the seed is not exactly 32 bytes.
    """
    if len(seed) != SEED_LENGTH:
        raise SeedLengthError(f"seed must be {SEED_LENGTH} bytes, got {len(seed)}")
    h0 = Digest(hashlib.sha256(seed).digest())
    return ChainState(head=h0, length=0, h0=h0)


def canonical_record_bytes(record: "MessageRecord") -> bytes:
    """Deterministic byte encoding of a record for hashing.

    Layout: UTF-8 "topic\\n<seq>\\n<t_ns>\\n" header followed by the raw
    payload. Binding topic, sequence number, and timestamp into the hash
    prevents transplanting a payload onto another topic or position.
    """
    header = f"{record.topic}\n{record.seq}\n{record.t_ns}\n".encode("utf-8")
    return header + record.payload


def append(state: ChainState, record: "MessageRecord") -> tuple[ChainState, Digest]:
    """Extend the chain with one record; returns the new state and entry.

    The new head is SHA-256(previous head bytes ++ canonical record bytes),
    previous digest first.
    """
    head = Digest(hashlib.sha256(bytes(state.head) + canonical_record_bytes(record)).digest())
    return ChainState(head=head, length=state.length + 1, h0=state.h0), head


def recompute(h0: Digest, records: Iterable["MessageRecord"]) -> list[Digest]:
    """Fold the chain over records in selection order; returns h_1..h_m."""
    digests: list[Digest] = []
    head = h0
    for record in records:
        head = Digest(hashlib.sha256(bytes(head) + canonical_record_bytes(record)).digest())
        digests.append(head)
    return digests
