"""HTTP facade for auditors: records, timelines, verification, proofs, QA.

Read-mostly by design; recording happens through the CLI or library so the
hot ingestion path never sits behind a request cycle. Every response body
has a stable field layout. Per-record artifacts (parsed bag, timeline,
vector index, verification) are cached and invalidated when the bag file's
size or mtime changes.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import explain, verifier
from .curation import curate_records, render_timeline
from .errors import FormatError, TraceboxError
from .hashchain import Digest
from .ledger import Ledger
from .recorder import Bag, read_bag

BAG_SUFFIX = ".bag"

_DIGEST_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass
class ServiceConfig:
    records_dir: Path
    ledger_path: Path | None = None
    answerer: str = "extractive"
    cors_origins: list[str] = field(default_factory=lambda: ["*"])


class AskRequest(BaseModel):
    question: str
    k: int | None = None


@dataclass
class _RecordCache:
    stat_key: tuple[int, int]
    bag: Bag | None
    error: str | None
    timeline: str | None = None
    store: explain.VectorStore | None = None
    verification: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class RecordIndex:
    """Bag discovery plus per-record caching keyed by (size, mtime)."""

    def __init__(self, records_dir: Path):
        self.records_dir = records_dir
        self._cache: dict[str, _RecordCache] = {}
        self._lock = threading.Lock()

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.records_dir.glob(f"*{BAG_SUFFIX}"))

    def path_for(self, record_id: str) -> Path:
        return self.records_dir / f"{record_id}{BAG_SUFFIX}"

    def entry(self, record_id: str) -> _RecordCache:
        path = self.path_for(record_id)
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown record {record_id!r}")
        stat = path.stat()
        stat_key = (stat.st_size, stat.st_mtime_ns)
        with self._lock:
            cached = self._cache.get(record_id)
            if cached is not None and cached.stat_key == stat_key:
                return cached
            try:
                entry = _RecordCache(stat_key=stat_key, bag=read_bag(path), error=None)
            except FormatError as exc:
                entry = _RecordCache(stat_key=stat_key, bag=None, error=str(exc))
            self._cache[record_id] = entry
            return entry


def _manifest_doc(bag: Bag) -> dict:
    manifest = bag.manifest
    return {
        "version": manifest.version,
        "h0": manifest.h0,
        "policy": manifest.policy.to_dict(),
        "created_ns": manifest.created_ns,
        "contract": manifest.contract,
    }


def _footer_doc(bag: Bag) -> dict | None:
    footer = bag.footer
    if footer is None:
        return None
    return {
        "final_digest": footer.final_digest,
        "record_count": footer.record_count,
        "selected_count": footer.selected_count,
        "tx_count": footer.tx_count,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="tracebox", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    index = RecordIndex(Path(config.records_dir))

    def load_ledger() -> Ledger:
        if config.ledger_path is None or not Path(config.ledger_path).is_file():
            raise HTTPException(status_code=502, detail="ledger unavailable")
        try:
            return Ledger.load(config.ledger_path)
        except (TraceboxError, OSError) as exc:
            raise HTTPException(status_code=502, detail=f"ledger unavailable: {exc}") from exc

    def ensure_parsed(entry: _RecordCache) -> Bag:
        if entry.bag is None:
            raise HTTPException(status_code=500, detail=f"bag unparseable: {entry.error}")
        return entry.bag

    @app.get("/v1/records")
    def list_records() -> list[dict]:
        if not index.records_dir.is_dir():
            raise HTTPException(
                status_code=500, detail=f"records directory {index.records_dir} unreadable"
            )
        entries = []
        for record_id in index.ids():
            entry = index.entry(record_id)
            if entry.bag is None:
                entries.append({
                    "id": record_id,
                    "path": str(index.path_for(record_id)),
                    "status": "unparseable",
                    "manifest": None,
                    "footer": None,
                    "verification": entry.verification,
                })
                continue
            entries.append({
                "id": record_id,
                "path": str(index.path_for(record_id)),
                "status": "ok" if entry.bag.footer is not None else "incomplete",
                "manifest": _manifest_doc(entry.bag),
                "footer": _footer_doc(entry.bag),
                "verification": entry.verification,
            })
        return entries

    @app.get("/v1/records/{record_id}/timeline", response_class=PlainTextResponse)
    def record_timeline(record_id: str) -> str:
        entry = index.entry(record_id)
        bag = ensure_parsed(entry)
        with entry.lock:
            if entry.timeline is None:
                entry.timeline = render_timeline(curate_records(bag.records).events)
            return entry.timeline

    @app.post("/v1/records/{record_id}/verify")
    def record_verify(record_id: str) -> dict:
        entry = index.entry(record_id)
        ensure_parsed(entry)
        ledger = load_ledger()
        try:
            report = verifier.verify_bag(index.path_for(record_id), ledger)
        except TraceboxError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        doc = report.to_dict()
        entry.verification = {"ok": report.ok, "checked": report.checked,
                              "confirmed": report.confirmed}
        return doc

    @app.post("/v1/records/{record_id}/ask")
    def record_ask(record_id: str, request: AskRequest) -> dict:
        if not request.question.strip():
            raise HTTPException(status_code=422, detail="question must be non-empty")
        entry = index.entry(record_id)
        bag = ensure_parsed(entry)
        with entry.lock:
            if entry.store is None:
                if entry.timeline is None:
                    entry.timeline = render_timeline(curate_records(bag.records).events)
                entry.store = explain.build_index(entry.timeline)
            store = entry.store
        try:
            result = explain.answer(
                request.question, store,
                answerer=config.answerer,
                k=request.k if request.k is not None else explain.DEFAULT_TOP_K,
            )
        except explain.EmptyStore as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except explain.AnswererUnavailable as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        return {
            "text": result.text,
            "sources": [[chunk_id, score] for chunk_id, score in result.sources],
            "prompt": result.prompt,
        }

    @app.get("/v1/ledger/proof/{digest}")
    def ledger_proof(digest: str) -> dict:
        if not _DIGEST_RE.match(digest):
            raise HTTPException(status_code=400, detail="digest must be 64 lowercase hex chars")
        ledger = load_ledger()
        contract_ids = sorted(ledger.contracts)
        value = Digest.from_hex(digest)
        block_number = 0
        for contract_id in contract_ids:
            block_number = ledger.query_proof(contract_id, value)
            if block_number:
                break
        message = (
            verifier.STORED_MESSAGE.format(block_number=block_number)
            if block_number
            else verifier.NOT_STORED_MESSAGE
        )
        return {"block_number": block_number, "message": message}

    return app
