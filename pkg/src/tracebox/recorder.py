"""Bag recording: message ingestion, chain building, and proof batching.

A bag is a line-delimited UTF-8 file: one manifest line, one line per
record (payload base64-encoded), and a footer line written on stop. Chain
entries for selected records accumulate into a batch; each full batch is
submitted to the bound ledger as one signed transaction, and whatever
remains is flushed as a final short transaction when recording stops.

Ledger failures never block bag writing: unsubmitted digests stay pending,
are retried on the next trigger, and are reported when the writer stops.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from . import hashchain
from .errors import FormatError, LedgerError, TraceboxError
from .hashchain import ChainState, Digest
from .ledger import Account, Ledger
from .policy import SamplingPolicy, TopicCounter, selects

BAG_VERSION = 1
DEFAULT_BATCH_LIMIT = 32


class WriterClosed(TraceboxError):
    """The bag writer was already stopped."""


@dataclass(frozen=True)
class MessageRecord:
    """One timestamped message on a named topic."""

    topic: str
    seq: int
    t_ns: int
    payload: bytes


@dataclass(frozen=True)
class BagManifest:
    version: int
    h0: str
    policy: SamplingPolicy
    created_ns: int
    contract: str | None


@dataclass(frozen=True)
class BagFooter:
    final_digest: str
    record_count: int
    selected_count: int
    tx_count: int


@dataclass(frozen=True)
class Bag:
    """A parsed bag; footer is None for interrupted recordings."""

    manifest: BagManifest
    records: list[MessageRecord]
    footer: BagFooter | None


@dataclass(frozen=True)
class IngestReceipt:
    recorded: bool
    selected: bool
    digest: Digest | None


@dataclass(frozen=True)
class LedgerBinding:
    """Where the writer submits proof batches."""

    ledger: Ledger
    contract_id: str
    account: Account


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


class BagWriter:
    """Single-writer bag recorder; appends are totally ordered."""

    def __init__(
        self,
        path: str | Path,
        policy: SamplingPolicy,
        seed: bytes | None = None,
        ledger_binding: LedgerBinding | None = None,
        batch_limit: int = DEFAULT_BATCH_LIMIT,
        created_ns: int | None = None,
    ):
        if batch_limit < 1:
            raise FormatError(f"batch limit must be >= 1, got {batch_limit}")
        self.path = Path(path)
        self.policy = policy
        self.binding = ledger_binding
        self.batch_limit = batch_limit
        self.chain: ChainState = hashchain.init_chain(seed if seed is not None else hashchain.random_seed())
        self.manifest = BagManifest(
            version=BAG_VERSION,
            h0=self.chain.h0.hex(),
            policy=policy,
            created_ns=created_ns if created_ns is not None else time.time_ns(),
            contract=ledger_binding.contract_id if ledger_binding else None,
        )
        self.record_count = 0
        self.tx_count = 0
        self.pending_digests: list[Digest] = []
        self.last_ledger_error: LedgerError | None = None
        self.footer: BagFooter | None = None
        self._counters: dict[str, TopicCounter] = {}
        self._last_seq: dict[str, int] = {}
        self._last_t: dict[str, int] = {}
        self._closed = False
        self._fh = self.path.open("w", encoding="utf-8")
        self._fh.write(manifest_line(self.manifest) + "\n")

    def ingest(self, record: MessageRecord) -> IngestReceipt:
        """Append a record to the bag; chain and batch it when selected."""
        if self._closed:
            raise WriterClosed("writer already stopped")
        self._check_order(record)
        self._fh.write(record_line(record) + "\n")
        self.record_count += 1

        counter = self._counters.setdefault(record.topic, TopicCounter(topic=record.topic))
        counter.increment()
        if not selects(self.policy, counter):
            return IngestReceipt(recorded=True, selected=False, digest=None)

        self.chain, entry = hashchain.append(self.chain, record)
        self.pending_digests.append(entry)
        self._submit_full_batches()
        return IngestReceipt(recorded=True, selected=True, digest=entry)

    def stop(self) -> BagFooter:
        """Flush the residual batch, write the footer, and close the file.

        Raises:
            WriterClosed: on a second call.
            LedgerError: when digests remain unsubmitted; the footer is
                written regardless and the pending list stays readable.
        """
        if self._closed:
            raise WriterClosed("writer already stopped")
        self._closed = True
        self._submit_full_batches()
        if self.binding is not None and self.pending_digests:
            try:
                self.binding.ledger.submit_proofs(
                    self.binding.contract_id, self.binding.account, list(self.pending_digests)
                )
                self.tx_count += 1
                self.pending_digests.clear()
            except LedgerError as exc:
                self.last_ledger_error = exc

        self.footer = BagFooter(
            final_digest=self.chain.head.hex(),
            record_count=self.record_count,
            selected_count=self.chain.length,
            tx_count=self.tx_count,
        )
        self._fh.write(footer_line(self.footer) + "\n")
        self._fh.close()
        if self.binding is not None and self.pending_digests:
            raise LedgerError(
                f"{len(self.pending_digests)} digests left unsubmitted: {self.last_ledger_error}"
            )
        return self.footer

    def _submit_full_batches(self) -> None:
        if self.binding is None:
            return
        while len(self.pending_digests) >= self.batch_limit:
            batch = self.pending_digests[: self.batch_limit]
            try:
                self.binding.ledger.submit_proofs(self.binding.contract_id, self.binding.account, batch)
            except LedgerError as exc:
                self.last_ledger_error = exc
                return
            self.tx_count += 1
            del self.pending_digests[: self.batch_limit]

    def _check_order(self, record: MessageRecord) -> None:
        last_seq = self._last_seq.get(record.topic)
        if last_seq is not None and record.seq <= last_seq:
            raise FormatError(
                f"seq must increase on topic {record.topic!r}: {record.seq} after {last_seq}"
            )
        last_t = self._last_t.get(record.topic)
        if last_t is not None and record.t_ns < last_t:
            raise FormatError(
                f"t_ns must not decrease on topic {record.topic!r}: {record.t_ns} after {last_t}"
            )
        self._last_seq[record.topic] = record.seq
        self._last_t[record.topic] = record.t_ns


def open_bag(
    path: str | Path,
    policy: SamplingPolicy,
    seed: bytes | None = None,
    ledger_binding: LedgerBinding | None = None,
    batch_limit: int = DEFAULT_BATCH_LIMIT,
    created_ns: int | None = None,
) -> BagWriter:
    """Start recording to a new bag file."""
    return BagWriter(
        path,
        policy,
        seed=seed,
        ledger_binding=ledger_binding,
        batch_limit=batch_limit,
        created_ns=created_ns,
    )


def manifest_line(manifest: BagManifest) -> str:
    return _dumps(
        {
            "type": "manifest",
            "version": manifest.version,
            "h0": manifest.h0,
            "policy": manifest.policy.to_dict(),
            "created_ns": manifest.created_ns,
            "contract": manifest.contract,
        }
    )


def record_line(record: MessageRecord) -> str:
    return _dumps(
        {
            "type": "record",
            "topic": record.topic,
            "seq": record.seq,
            "t_ns": record.t_ns,
            "payload_b64": base64.b64encode(record.payload).decode("ascii"),
        }
    )


def footer_line(footer: BagFooter) -> str:
    return _dumps(
        {
            "type": "footer",
            "final_digest": footer.final_digest,
            "record_count": footer.record_count,
            "selected_count": footer.selected_count,
            "tx_count": footer.tx_count,
        }
    )


def _parse_manifest(obj: dict, line_number: int) -> BagManifest:
    try:
        version = obj["version"]
        h0 = obj["h0"]
        policy = SamplingPolicy.from_dict(obj["policy"])
        created_ns = obj["created_ns"]
        contract = obj.get("contract")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad manifest: {exc}", line_number) from exc
    if version != BAG_VERSION:
        raise FormatError(f"unsupported bag version {version!r}", line_number)
    if not isinstance(h0, str) or len(h0) != 64:
        raise FormatError(f"h0 must be 64 hex chars, got {h0!r}", line_number)
    return BagManifest(version=version, h0=h0, policy=policy, created_ns=created_ns, contract=contract)


def _parse_record(obj: dict, line_number: int) -> MessageRecord:
    try:
        return MessageRecord(
            topic=obj["topic"],
            seq=obj["seq"],
            t_ns=obj["t_ns"],
            payload=base64.b64decode(obj["payload_b64"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad record: {exc}", line_number) from exc


def _parse_footer(obj: dict, line_number: int) -> BagFooter:
    try:
        return BagFooter(
            final_digest=obj["final_digest"],
            record_count=obj["record_count"],
            selected_count=obj["selected_count"],
            tx_count=obj["tx_count"],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"bad footer: {exc}", line_number) from exc


def read_bag(path: str | Path) -> Bag:
    """Parse a bag file.

    A partial final line without a trailing newline is treated as a crash
    truncation (records up to that point, footer absent); any other
    malformed line raises FormatError with its line number.
    """
    text = Path(path).read_text(encoding="utf-8")
    complete = text.endswith("\n")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    manifest: BagManifest | None = None
    records: list[MessageRecord] = []
    footer: BagFooter | None = None
    for i, line in enumerate(lines, start=1):
        last = i == len(lines)
        truncated_tail = last and not complete
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            if truncated_tail:
                break
            raise FormatError(f"not a JSON object: {exc}", i) from exc
        if not isinstance(obj, dict):
            raise FormatError("not a JSON object", i)
        kind = obj.get("type")
        if i == 1:
            if kind != "manifest":
                raise FormatError("first line must be the manifest", i)
            manifest = _parse_manifest(obj, i)
        elif kind == "record":
            if footer is not None:
                raise FormatError("record after footer", i)
            records.append(_parse_record(obj, i))
        elif kind == "footer":
            if footer is not None:
                raise FormatError("duplicate footer", i)
            footer = _parse_footer(obj, i)
        else:
            raise FormatError(f"unknown line type {kind!r}", i)
    if manifest is None:
        raise FormatError("empty bag: manifest missing", 1)
    return Bag(manifest=manifest, records=records, footer=footer)


def read_stream(path: str | Path) -> Iterator[MessageRecord]:
    """Yield records from a stream file (bag record-line format).

    Manifest and footer lines are skipped, so a full bag is also a valid
    input stream.
    """
    with Path(path).open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"not a JSON object: {exc}", i) from exc
            kind = obj.get("type") if isinstance(obj, dict) else None
            if kind in ("manifest", "footer"):
                continue
            if kind != "record":
                raise FormatError(f"expected a record line, got type {kind!r}", i)
            yield _parse_record(obj, i)


def write_stream(path: str | Path, records: Iterable[MessageRecord]) -> int:
    """Write records in the stream/bag record-line format; returns the count."""
    count = 0
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record_line(record) + "\n")
            count += 1
    return count
