"""Recompute a bag's integrity chain and check it against the ledger.

Selection is re-derived from the manifest policy (never trusted from the
file body), the chain is folded from the manifest's initial head, and every
recomputed digest is looked up on the ledger. The first digest absent from
the ledger localizes where tampering began: one altered selected record
changes that digest and every one after it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from . import hashchain
from .errors import ConfigError
from .hashchain import Digest
from .ledger import Ledger
from .policy import TopicCounter, selects
from .recorder import Bag, read_bag

STORED_MESSAGE = "The hash value is stored in {block_number}."
NOT_STORED_MESSAGE = "The hash value is not stored."


@dataclass(frozen=True)
class VerificationReport:
    ok: bool
    checked: int
    confirmed: int
    first_missing_index: int | None
    final_digest_match: bool
    incomplete: bool
    messages: tuple[str, ...]

    def to_dict(self) -> dict:
        doc = {
            "ok": self.ok,
            "checked": self.checked,
            "confirmed": self.confirmed,
            "final_digest_match": self.final_digest_match,
            "incomplete": self.incomplete,
            "messages": list(self.messages),
        }
        if self.first_missing_index is not None:
            doc["first_missing_index"] = self.first_missing_index
        return doc


def recompute_digests(bag: Bag) -> list[Digest]:
    """Re-derive selection and fold the chain; returns h_1..h_m."""
    h0 = Digest.from_hex(bag.manifest.h0)
    counters: dict[str, TopicCounter] = {}
    selected = []
    for record in bag.records:
        counter = counters.setdefault(record.topic, TopicCounter(topic=record.topic))
        counter.increment()
        if selects(bag.manifest.policy, counter):
            selected.append(record)
    return hashchain.recompute(h0, selected)


def recompute_from_bag(path: str | Path) -> list[Digest]:
    return recompute_digests(read_bag(path))


def verify_digest(ledger: Ledger, contract_id: str, digest: Digest) -> str:
    """Status message for one digest; read-only."""
    block_number = ledger.query_proof(contract_id, digest)
    if block_number != 0:
        return STORED_MESSAGE.format(block_number=block_number)
    return NOT_STORED_MESSAGE


def verify_bag(
    path: str | Path,
    ledger: Ledger,
    contract_id: str | None = None,
    head_only: bool = False,
) -> VerificationReport:
    """Full verification of a recorded bag against the ledger.

    With head_only=True only the chain head is looked up (fast mode, no
    localization); otherwise every recomputed digest is checked and the
    first one absent from the ledger is reported.
    """
    bag = read_bag(path)
    if contract_id is None:
        contract_id = bag.manifest.contract
    if contract_id is None:
        raise ConfigError("bag was recorded without a contract binding; nothing to verify against")

    digests = recompute_digests(bag)
    to_check = digests[-1:] if head_only else digests

    confirmed = 0
    first_missing_index: int | None = None
    messages: list[str] = []
    for offset, digest in enumerate(to_check):
        index = len(digests) if head_only else offset + 1
        block_number = ledger.query_proof(contract_id, digest)
        if block_number != 0:
            confirmed += 1
            messages.append(STORED_MESSAGE.format(block_number=block_number))
        else:
            if first_missing_index is None:
                first_missing_index = index
            messages.append(NOT_STORED_MESSAGE)

    final_head = digests[-1].hex() if digests else bag.manifest.h0
    incomplete = bag.footer is None
    if incomplete:
        final_digest_match = True
    else:
        final_digest_match = final_head == bag.footer.final_digest

    ok = confirmed == len(to_check) and final_digest_match
    if incomplete and ok:
        messages.append(
            f"Recording incomplete: no footer; chain consistent through index {len(digests)}."
        )
    if first_missing_index is None and not final_digest_match and not incomplete:
        messages.append(
            f"Final digest mismatch: recomputed {final_head}, footer says {bag.footer.final_digest}."
        )

    return VerificationReport(
        ok=ok,
        checked=len(to_check),
        confirmed=confirmed,
        first_missing_index=None if ok else first_missing_index,
        final_digest_match=final_digest_match,
        incomplete=incomplete,
        messages=tuple(messages),
    )
