"""Corpus ingestion: raw multi-source news reports to a canonical document model.

The canonical model is immutable. Within each source, documents are ranked
chronologically (``report_index``); this rank is what diachronic relation
rules count distance in. Tokenization is rule-based: whitespace/punctuation
segmentation, lemmas from a plain-text lexicon, named-entity labels from a
gazetteer matched greedily longest-first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
import re

from .errors import DuplicateDocId, MalformedRecord, UnparsableTimestamp

UTC = timezone.utc

# A token is a maximal run of word characters (hyphens/apostrophes allowed
# inside, so "Al-Jazeera" stays whole) or a single punctuation character.
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:[-'][A-Za-z0-9]+)*|[^\sA-Za-z0-9]")


@dataclass(frozen=True)
class Token:
    surface: str
    lemma: str
    ne: str | None = None
    start: int = 0   # character offsets into the sentence text
    end: int = 0


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    tokens: tuple[Token, ...]

    def lemmas(self) -> list[str]:
        return [t.lemma for t in self.tokens]

    def ne_labels(self) -> set[str]:
        return {t.ne for t in self.tokens if t.ne is not None}


@dataclass(frozen=True)
class Document:
    doc_id: str
    source: str
    publish_time: datetime
    sentences: tuple[Sentence, ...]
    report_index: int = 0


@dataclass(frozen=True)
class Corpus:
    event_id: str
    documents: tuple[Document, ...]

    @property
    def sources(self) -> set[str]:
        return {d.source for d in self.documents}

    def document(self, doc_id: str) -> Document:
        for d in self.documents:
            if d.doc_id == doc_id:
                return d
        raise KeyError(doc_id)


def parse_rfc3339(value: str) -> datetime:
    """Parse an RFC 3339 date-time, normalized to UTC at minute precision.

    Naive timestamps are taken as UTC. Raises UnparsableTimestamp.
    """
    if not isinstance(value, str):
        raise UnparsableTimestamp(repr(value))
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise UnparsableTimestamp(value) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC).replace(second=0, microsecond=0)


def format_rfc3339(dt: datetime) -> str:
    return dt.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Load a surface<TAB>lemma table; surfaces are matched case-insensitively."""
    return _load_tsv(path)


def load_gazetteer(path: str | Path) -> dict[str, str]:
    """Load a surface<TAB>NE-label table; multi-word surfaces are allowed."""
    return _load_tsv(path)


def _load_tsv(path: str | Path) -> dict[str, str]:
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
                raise MalformedRecord("expected surface<TAB>value", str(path), ln)
            table[parts[0].strip()] = parts[1].strip()
    return table


def tokenize(text: str,
             lexicon: dict[str, str] | None = None,
             ne_gazetteer: dict[str, str] | None = None) -> tuple[Token, ...]:
    """Segment a sentence into tokens with lemmas and NE labels.

    Deterministic: whitespace/punctuation segmentation, lemma = lexicon entry
    for the lowercased surface (default: the lowercased surface itself),
    gazetteer entries matched greedily longest-first with no overlaps.
    """
    lexicon = lexicon or {}
    spans = [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]
    lemmas = [lexicon.get(s.lower(), s.lower()) for s, _, _ in spans]
    labels: list[str | None] = [None] * len(spans)

    if ne_gazetteer:
        # Pre-segment each gazetteer surface with the same tokenizer so that
        # multi-word entries align with token boundaries.
        entries: list[tuple[tuple[str, ...], str]] = []
        for surface, label in ne_gazetteer.items():
            key = tuple(m.group(0).lower() for m in _TOKEN_RE.finditer(surface))
            if key:
                entries.append((key, label))
        entries.sort(key=lambda e: (-len(e[0]), e[0]))
        folded = [s.lower() for s, _, _ in spans]
        i = 0
        while i < len(folded):
            for key, label in entries:
                if tuple(folded[i:i + len(key)]) == key:
                    for j in range(i, i + len(key)):
                        labels[j] = label
                    i += len(key) - 1
                    break
            i += 1

    return tuple(
        Token(surface=s, lemma=lemmas[k], ne=labels[k], start=a, end=b)
        for k, (s, a, b) in enumerate(spans)
    )


def _split_sentences(text) -> list[str]:
    if isinstance(text, list):
        parts = [str(s) for s in text]
    elif isinstance(text, str):
        parts = text.split("\n")
    else:
        raise TypeError("text must be a string or a list of sentences")
    return [p.strip() for p in parts if p.strip()]


def load_corpus(path: str | Path, format: str = "jsonl-v1",
                lexicon: dict[str, str] | None = None,
                gazetteer: dict[str, str] | None = None,
                event_id: str | None = None) -> Corpus:
    """Load a raw corpus file into the canonical model.

    Only the "jsonl-v1" format is supported: one JSON record per line with
    fields ``doc_id``, ``source``, ``publish_time`` (RFC 3339) and ``text``
    (a sentence list, or raw text split one sentence per line). Records with
    missing ids, sources or timestamps are rejected, not skipped.
    """
    if format != "jsonl-v1":
        raise MalformedRecord(f"unsupported corpus format {format!r}", str(path))
    path = Path(path)
    raw_docs: list[tuple[str, str, datetime, list[str]]] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", str(path), ln) from None
            if not isinstance(rec, dict):
                raise MalformedRecord("record is not an object", str(path), ln)
            doc_id = rec.get("doc_id")
            if not doc_id or not isinstance(doc_id, str):
                raise MalformedRecord("missing doc_id", str(path), ln)
            if doc_id in seen_ids:
                raise DuplicateDocId(doc_id)
            seen_ids.add(doc_id)
            source = rec.get("source")
            if not source or not isinstance(source, str):
                raise MalformedRecord(f"document {doc_id!r} has no source", str(path), ln)
            if "publish_time" not in rec or rec["publish_time"] in (None, ""):
                raise MalformedRecord(f"document {doc_id!r} has no publish_time", str(path), ln)
            publish_time = parse_rfc3339(rec["publish_time"])
            try:
                sentences = _split_sentences(rec.get("text"))
            except TypeError as exc:
                raise MalformedRecord(str(exc), str(path), ln) from None
            if not sentences:
                raise MalformedRecord(f"document {doc_id!r} has no sentences", str(path), ln)
            raw_docs.append((doc_id, source, publish_time, sentences))

    return build_corpus(
        event_id if event_id is not None else path.stem,
        raw_docs, lexicon=lexicon, gazetteer=gazetteer)


def build_corpus(event_id: str,
                 raw_docs: list[tuple[str, str, datetime, list[str]]],
                 lexicon: dict[str, str] | None = None,
                 gazetteer: dict[str, str] | None = None) -> Corpus:
    """Assemble a Corpus from (doc_id, source, publish_time, sentences) rows.

    Computes per-source report_index (chronological, ties broken by doc_id)
    and sorts documents by (source, publish_time, doc_id).
    """
    documents = []
    by_source: dict[str, list[tuple[datetime, str]]] = {}
    for doc_id, source, publish_time, _ in raw_docs:
        by_source.setdefault(source, []).append((publish_time, doc_id))
    rank: dict[str, int] = {}
    for source, rows in by_source.items():
        for i, (_, doc_id) in enumerate(sorted(rows)):
            rank[doc_id] = i
    for doc_id, source, publish_time, sentence_texts in raw_docs:
        sentences = tuple(
            Sentence(index=i, text=t, tokens=tokenize(t, lexicon, gazetteer))
            for i, t in enumerate(sentence_texts))
        documents.append(Document(
            doc_id=doc_id, source=source, publish_time=publish_time,
            sentences=sentences, report_index=rank[doc_id]))
    documents.sort(key=lambda d: (d.source, d.publish_time, d.doc_id))
    return Corpus(event_id=event_id, documents=tuple(documents))


def report_index_map(corpus: Corpus) -> dict[str, int]:
    return {d.doc_id: d.report_index for d in corpus.documents}


# ---------------------------------------------------------------------------
# Normalized corpus artifact (the ingest stage output): carries tokens so
# downstream stages do not need the lexicon/gazetteer again.

def write_corpus_artifact(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"event_id": corpus.event_id}, sort_keys=True) + "\n")
        for d in corpus.documents:
            rec = {
                "doc_id": d.doc_id,
                "source": d.source,
                "publish_time": format_rfc3339(d.publish_time),
                "report_index": d.report_index,
                "sentences": [
                    {
                        "index": s.index,
                        "text": s.text,
                        "tokens": [[t.surface, t.lemma, t.ne, t.start, t.end]
                                   for t in s.tokens],
                    }
                    for s in d.sentences
                ],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_corpus_artifact(path: str | Path) -> Corpus:
    documents = []
    event_id = Path(path).stem
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"invalid JSON ({exc.msg})", str(path), ln) from None
            if "event_id" in rec and "doc_id" not in rec:
                event_id = rec["event_id"]
                continue
            sentences = tuple(
                Sentence(
                    index=s["index"], text=s["text"],
                    tokens=tuple(Token(*row) for row in s["tokens"]))
                for s in rec["sentences"])
            documents.append(Document(
                doc_id=rec["doc_id"], source=rec["source"],
                publish_time=parse_rfc3339(rec["publish_time"]),
                sentences=sentences, report_index=rec["report_index"]))
    return Corpus(event_id=event_id, documents=tuple(documents))
