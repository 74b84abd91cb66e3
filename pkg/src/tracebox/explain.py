"""Retrieval-based question answering over curated timelines.

The pipeline is deliberately model-free by default: documents are split
into line-respecting overlapping chunks, embedded with a deterministic
hashed bag-of-words vector, stored in an in-process cosine-similarity
store, and answered by an extractive answerer that only ever returns
sentences found in the retrieved chunks. A generative backend can be
plugged in behind the same answerer interface without touching the store.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, TraceboxError

DEFAULT_DIMENSION = 512
DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
DEFAULT_TOP_K = 4
MAX_ANSWER_SENTENCES = 3

PROMPT_TEMPLATE = "Context:\n{context}\n\nQuestion: {query}\nAnswer:"


class EmptyStore(TraceboxError):
    """Retrieval attempted against a store with no chunks."""


class DimensionMismatch(TraceboxError):
    """Vector dimension differs from the store dimension."""


class AnswererUnavailable(TraceboxError):
    """The configured answering backend cannot be reached."""


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs."""
    return _TOKEN_RE.findall(text.lower())


def _bucket_and_sign(token: str, dimension: int) -> tuple[int, float]:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    bucket = int.from_bytes(digest[:4], "big") % dimension
    sign = 1.0 if digest[4] & 1 else -1.0
    return bucket, sign


def embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    """Deterministic signed hashed bag-of-words vector, L2-normalized.

    Text with no tokens embeds to the zero vector (norm 0), which scores 0
    against everything. Vectors are float64 in memory; persistence downcasts
    to 32-bit floats and renormalizes on load.
    """
    vector = np.zeros(dimension, dtype=np.float64)
    for token in tokenize(text):
        bucket, sign = _bucket_and_sign(token, dimension)
        vector[bucket] += sign
    norm = float(np.linalg.norm(vector))
    if norm > 0:
        vector /= norm
    return vector


def chunk_spans(document: str, chunk_size: int = DEFAULT_CHUNK_SIZE,
                overlap: int = DEFAULT_OVERLAP) -> list[tuple[int, int]]:
    """Character spans of overlapping, line-respecting windows.

    Windows advance by chunk_size - overlap; when a window would cut a line
    in half, it is shortened to end just after the last newline it contains
    (provided that still makes progress). Concatenating the spans with the
    first `overlap` characters of every span after the first stripped
    reproduces the document exactly.
    """
    if overlap < 0 or chunk_size <= overlap:
        raise ConfigError(f"need chunk_size > overlap >= 0, got {chunk_size}/{overlap}")
    length = len(document)
    if length == 0:
        return []
    spans: list[tuple[int, int]] = []
    start = 0
    while start < length:
        raw_end = start + chunk_size
        end = min(raw_end, length)
        snapped = False
        if end < length:
            cut = document.rfind("\n", start, end)
            if cut != -1 and cut + 1 > start + overlap:
                end = cut + 1
                snapped = True
        spans.append((start, end))
        start = (end - overlap) if snapped else (start + chunk_size - overlap)
    return spans


def chunk_text(document: str, chunk_size: int = DEFAULT_CHUNK_SIZE,
               overlap: int = DEFAULT_OVERLAP) -> list[str]:
    """The chunk texts for a document."""
    return [document[a:b] for a, b in chunk_spans(document, chunk_size, overlap)]


@dataclass(frozen=True, eq=False)
class Chunk:
    id: int
    text: str
    line_range: tuple[int, int]
    vector: np.ndarray


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float


@dataclass(frozen=True)
class Answer:
    text: str
    sources: tuple[tuple[int, float], ...]
    prompt: str


class VectorStore:
    """In-process cosine-similarity store; reads are snapshot-consistent."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._chunks: list[Chunk] = []
        self._matrix = np.zeros((0, dimension), dtype=np.float64)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def chunks(self) -> list[Chunk]:
        with self._lock:
            return list(self._chunks)

    def add_chunks(self, texts_with_ranges: Sequence[tuple[str, tuple[int, int]]]) -> None:
        if not texts_with_ranges:
            return
        vectors = np.stack([embed(text, self.dimension) for text, _ in texts_with_ranges])
        if vectors.shape[1] != self.dimension:
            raise DimensionMismatch(f"expected dimension {self.dimension}, got {vectors.shape[1]}")
        with self._lock:
            next_id = len(self._chunks)
            new_chunks = self._chunks + [
                Chunk(id=next_id + i, text=text, line_range=line_range, vector=vectors[i])
                for i, (text, line_range) in enumerate(texts_with_ranges)
            ]
            self._chunks = new_chunks
            self._matrix = np.concatenate([self._matrix, vectors], axis=0)

    def snapshot(self) -> tuple[list[Chunk], np.ndarray]:
        with self._lock:
            return self._chunks, self._matrix


def _line_range(document: str, start: int, end: int) -> tuple[int, int]:
    first = document.count("\n", 0, start) + 1
    last = document.count("\n", 0, max(start, end - 1)) + 1
    return (first, last)


def refresh_index(store: VectorStore, document: str,
                  chunk_size: int = DEFAULT_CHUNK_SIZE,
                  overlap: int = DEFAULT_OVERLAP) -> VectorStore:
    """Append the document's chunks to the store; existing chunks are untouched."""
    spans = chunk_spans(document, chunk_size, overlap)
    store.add_chunks([(document[a:b], _line_range(document, a, b)) for a, b in spans])
    return store


def build_index(document: str, dimension: int = DEFAULT_DIMENSION,
                chunk_size: int = DEFAULT_CHUNK_SIZE,
                overlap: int = DEFAULT_OVERLAP) -> VectorStore:
    return refresh_index(VectorStore(dimension), document, chunk_size, overlap)


def retrieve(store: VectorStore, query: str, k: int = DEFAULT_TOP_K) -> list[ScoredChunk]:
    """Top-k chunks by cosine similarity, ties broken by ascending chunk id."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    chunks, matrix = store.snapshot()
    if not chunks:
        raise EmptyStore("vector store holds no chunks")
    scores = matrix @ embed(query, store.dimension)
    order = sorted(range(len(chunks)), key=lambda i: (-float(scores[i]), chunks[i].id))
    return [ScoredChunk(chunk=chunks[i], score=float(scores[i])) for i in order[:k]]


def assemble_prompt(query: str, chunk_texts: Sequence[str]) -> str:
    return PROMPT_TEMPLATE.format(context="\n\n".join(chunk_texts), query=query)


# --- answerers ------------------------------------------------------------

# An answerer maps (query, retrieved chunks, assembled prompt) to answer text.
AnswererFn = Callable[[str, Sequence[ScoredChunk], str], str]

_STOPWORDS = {
    "a", "an", "and", "any", "are", "at", "be", "been", "being", "by", "did",
    "do", "does", "during", "for", "from", "had", "has", "have", "how", "in",
    "is", "it", "its", "many", "much", "of", "on", "or", "s", "that", "the",
    "these", "this", "those", "to", "was", "were", "what", "when", "where",
    "which", "while", "who", "whom", "why", "with",
    # Domain stopword: every timeline line concerns the robot, so the token
    # carries no signal and its rarity would otherwise dominate the IDF.
    "robot",
}

# Maps question vocabulary onto the timeline's wording; applied to both
# sides so imperfect stemming stays symmetric.
_SYNONYMS = {
    "reach": "succeeded",
    "reached": "succeeded",
    "reaches": "succeeded",
    "achieve": "succeeded",
    "achieved": "succeeded",
    "complete": "succeeded",
    "completed": "succeeded",
    "ended": "succeeded",
    "finish": "succeeded",
    "finished": "succeeded",
    "cancel": "canceled",
    "cancelled": "canceled",
    "fail": "failed",
    "fails": "failed",
    "failure": "failed",
    "find": "found",
    "finding": "found",
    "first": "1",
    "second": "2",
    "third": "3",
    "located": "position",
    "location": "position",
    "locations": "position",
    "objective": "goal",
    "objectives": "goal",
    "waypoint": "goal",
    "waypoints": "goal",
}

_COUNT_RE = re.compile(r"\bhow many\b", re.IGNORECASE)
_OUTCOME_TOKENS = ("aborted", "canceled", "failed")


def _normalize(token: str) -> str | None:
    if token in _STOPWORDS:
        return None
    if token in _SYNONYMS:
        return _SYNONYMS[token]
    if len(token) > 3 and token.endswith("s"):
        token = token[:-1]
    return _SYNONYMS.get(token, token)


def _normalized_set(text: str) -> set[str]:
    return {norm for tok in tokenize(text) if (norm := _normalize(tok)) is not None}


def _candidate_sentences(chunks: Sequence[ScoredChunk]) -> list[str]:
    seen: set[str] = set()
    sentences: list[str] = []
    for scored in chunks:
        for i, line in enumerate(scored.chunk.text.splitlines()):
            # A chunk's overlap prefix can open mid-line; such fragments are
            # repeats of a line carried whole by the preceding chunk.
            if i == 0 and scored.chunk.line_range[0] != 1:
                continue
            line = line.strip()
            if line and line not in seen:
                seen.add(line)
                sentences.append(line)
    return sentences


def extractive_answer(query: str, chunks: Sequence[ScoredChunk], prompt: str = "") -> str:
    """Compose an answer strictly from sentences in the retrieved chunks.

    Sentences are scored by IDF-weighted token overlap with the query. For
    "how many" questions the matched sentences are counted and the count is
    emitted as a bare numeral line (not a sentence), followed by the
    matching sentences and, when the subject has other terminal outcomes in
    the context (aborted, canceled, failed), a numeral annotation plus
    those sentences.
    """
    sentences = _candidate_sentences(chunks)
    if not sentences:
        return "No matching events"
    query_tokens = _normalized_set(query)
    sentence_tokens = [_normalized_set(s) for s in sentences]

    df: dict[str, int] = {}
    for tokens in sentence_tokens:
        for token in tokens:
            df[token] = df.get(token, 0) + 1
    total = len(sentences)
    weight = {t: float(np.log(1.0 + total / (1.0 + df.get(t, 0)))) for t in query_tokens}
    coverable = {t for t in query_tokens if df.get(t, 0) > 0}
    denominator = sum(weight[t] for t in coverable)
    if denominator == 0:
        return "No matching events"

    scores = [
        sum(weight[t] for t in query_tokens & tokens) / denominator
        for tokens in sentence_tokens
    ]
    best = max(scores)
    if best <= 0:
        return "No matching events"

    if _COUNT_RE.search(query):
        matched = [i for i, s in enumerate(scores) if s >= best * 0.98]
        lines = [str(len(matched))] + [sentences[i] for i in matched]
        lines += _outcome_breakdown(query_tokens, sentences, sentence_tokens, set(matched))
        return "\n".join(lines)

    ranked = sorted(range(total), key=lambda i: (-scores[i], i))
    top = [sentences[i] for i in ranked[:MAX_ANSWER_SENTENCES] if scores[i] > 0]
    return "\n".join(top)


def _outcome_breakdown(
    query_tokens: set[str],
    sentences: list[str],
    sentence_tokens: list[set[str]],
    already: set[int],
) -> list[str]:
    subject = query_tokens - set(_OUTCOME_TOKENS) - {"succeeded"}
    lines: list[str] = []
    for outcome in _OUTCOME_TOKENS:
        group = [
            i
            for i, tokens in enumerate(sentence_tokens)
            if i not in already and outcome in tokens and subject & tokens
        ]
        if group:
            lines.append(f"{len(group)} {outcome}")
            lines += [sentences[i] for i in group]
    return lines


class HttpAnswerer:
    """Generative backend behind a plain HTTP completion endpoint.

    The assembled prompt is POSTed as the request body; the response body
    is the answer text. Unreachable or failing endpoints raise
    AnswererUnavailable; there is no silent fallback.
    """

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, query: str, chunks: Sequence[ScoredChunk], prompt: str) -> str:
        import httpx

        try:
            response = httpx.post(
                self.url,
                content=prompt.encode("utf-8"),
                headers={"content-type": "text/plain; charset=utf-8"},
                timeout=self.timeout,
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise AnswererUnavailable(f"answerer endpoint {self.url} failed: {exc}") from exc
        return response.text


_ANSWERERS: dict[str, AnswererFn] = {"extractive": extractive_answer}


def register_answerer(name: str, fn: AnswererFn) -> None:
    _ANSWERERS[name] = fn


def resolve_answerer(spec: str | AnswererFn) -> AnswererFn:
    if callable(spec):
        return spec
    if spec in _ANSWERERS:
        return _ANSWERERS[spec]
    if spec.startswith(("http://", "https://")):
        return HttpAnswerer(spec)
    raise ConfigError(f"unknown answerer {spec!r}")


def answer(query: str, store: VectorStore,
           answerer: str | AnswererFn = "extractive",
           k: int = DEFAULT_TOP_K) -> Answer:
    """Retrieve, assemble the prompt, and run the answerer.

    The Answer always carries its ranked sources and the exact prompt for
    auditability.
    """
    fn = resolve_answerer(answerer)
    retrieved = retrieve(store, query, k)
    prompt = assemble_prompt(query, [sc.chunk.text for sc in retrieved])
    text = fn(query, retrieved, prompt)
    return Answer(
        text=text,
        sources=tuple((sc.chunk.id, sc.score) for sc in retrieved),
        prompt=prompt,
    )


# --- persistence ----------------------------------------------------------


def save_store(store: VectorStore, directory: str | Path) -> None:
    """Persist as chunks.jsonl + vectors.bin + single-line meta.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    chunks, matrix = store.snapshot()
    meta = {"dimension": store.dimension, "count": len(chunks)}
    (directory / "meta.json").write_text(json.dumps(meta, separators=(",", ":")) + "\n", "utf-8")
    with (directory / "chunks.jsonl").open("w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps(
                {"id": chunk.id, "text": chunk.text, "range": list(chunk.line_range)},
                separators=(",", ":"),
            ) + "\n")
    matrix.astype("<f4").tofile(directory / "vectors.bin")


def load_store(directory: str | Path) -> VectorStore:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text("utf-8"))
    dimension, count = meta["dimension"], meta["count"]
    raw = np.fromfile(directory / "vectors.bin", dtype="<f4")
    if raw.size != dimension * count:
        raise DimensionMismatch(
            f"vectors.bin holds {raw.size} floats, expected {dimension * count}"
        )
    matrix = raw.reshape(count, dimension).astype(np.float64)
    # Restore unit norms lost to the 32-bit on-disk representation.
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    np.divide(matrix, norms, out=matrix, where=norms > 0)
    store = VectorStore(dimension)
    chunks: list[Chunk] = []
    with (directory / "chunks.jsonl").open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            obj = json.loads(line)
            chunks.append(Chunk(
                id=obj["id"],
                text=obj["text"],
                line_range=tuple(obj["range"]),
                vector=matrix[i],
            ))
    store._chunks = chunks
    store._matrix = matrix
    return store
