"""Disclosure-document ingestion and sliding-window chunking.

Chunks carry exact character offsets into the parent document so downstream
annotations can be rendered as standoff highlights regardless of encoding.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .exceptions import DocumentError

_TOKEN = re.compile(r"\S+")


@dataclass(frozen=True)
class Document:
    doc_id: str
    company: str
    title: str
    text: str
    page_offsets: tuple[tuple[int, int], ...] = ()  # (page_number, char_start)

    def __post_init__(self):
        if not self.text:
            raise DocumentError(f"document {self.doc_id!r} has empty text")
        prev = -1
        for page, start in self.page_offsets:
            if start <= prev or start >= len(self.text):
                raise DocumentError(
                    f"document {self.doc_id!r}: page offsets must be strictly "
                    f"increasing and inside the text (page {page} at {start})"
                )
            prev = start


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    chunk_id: str
    char_start: int
    char_end: int
    text: str


def make_chunk_id(doc_id: str, char_start: int, char_end: int) -> str:
    return f"{doc_id}:{char_start}-{char_end}"


def _normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _doc_id_for(text: str) -> str:
    return "doc-" + hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def ingest_document(path: str | Path, company: str = "", title: str = "") -> Document:
    """Read a disclosure document from disk.

    Plain-text files are ingested as-is (newlines normalized to LF). A `.json`
    file is treated as the structured format: a single object with metadata
    plus either a `text` field or a `pages` array of strings; page offsets are
    derived by joining pages with one LF.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc
    try:
        decoded = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DocumentError(f"{path} is not valid UTF-8: {exc}") from exc

    page_offsets: tuple[tuple[int, int], ...] = ()
    if path.suffix.lower() == ".json":
        try:
            rec = json.loads(decoded)
        except json.JSONDecodeError as exc:
            raise DocumentError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(rec, dict):
            raise DocumentError(f"{path}: structured document must be a JSON object")
        company = company or str(rec.get("company", ""))
        title = title or str(rec.get("title", ""))
        has_text = "text" in rec
        has_pages = "pages" in rec
        if has_text == has_pages:
            raise DocumentError(f"{path}: provide exactly one of 'text' or 'pages'")
        if has_text:
            text = _normalize_newlines(str(rec["text"]))
        else:
            pages = [_normalize_newlines(str(p)) for p in rec["pages"]]
            text = "\n".join(pages)
            offsets = []
            pos = 0
            for i, page in enumerate(pages, start=1):
                offsets.append((i, pos))
                pos += len(page) + 1  # +1 for the joining LF
            page_offsets = tuple(offsets)
    else:
        text = _normalize_newlines(decoded)

    if not text:
        raise DocumentError(f"{path} contains no text")
    if not title:
        title = path.stem
    return Document(
        doc_id=_doc_id_for(text),
        company=company,
        title=title,
        text=text,
        page_offsets=page_offsets,
    )


def chunk_document(doc: Document, target_size: int = 256, overlap: int = 32) -> list[Chunk]:
    """Split a document into sliding windows of whitespace-delimited tokens.

    Consecutive chunks share exactly `overlap` tokens; the final chunk may be
    shorter. Spans start at the first token's first character and end at the
    last token's final character, so every chunk text is an exact slice of the
    document.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    if not 0 <= overlap < target_size:
        raise ValueError("overlap must satisfy 0 <= overlap < target_size")

    spans = [(m.start(), m.end()) for m in _TOKEN.finditer(doc.text)]
    if not spans:
        return []

    step = target_size - overlap
    chunks = []
    start_tok = 0
    while True:
        end_tok = min(start_tok + target_size, len(spans))
        char_start = spans[start_tok][0]
        char_end = spans[end_tok - 1][1]
        chunks.append(
            Chunk(
                doc_id=doc.doc_id,
                chunk_id=make_chunk_id(doc.doc_id, char_start, char_end),
                char_start=char_start,
                char_end=char_end,
                text=doc.text[char_start:char_end],
            )
        )
        if end_tok >= len(spans):
            break
        start_tok += step
    return chunks


def document_to_record(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "company": doc.company,
        "title": doc.title,
        "text": doc.text,
        "page_offsets": [list(p) for p in doc.page_offsets],
    }


def document_from_record(rec: dict) -> Document:
    return Document(
        doc_id=rec["doc_id"],
        company=rec.get("company", ""),
        title=rec.get("title", ""),
        text=rec["text"],
        page_offsets=tuple((int(p), int(s)) for p, s in rec.get("page_offsets", [])),
    )
