"""Turn raw inputs (WARC archives, plain text, JSONL) into Documents."""
from __future__ import annotations

import json
from pathlib import Path
from typing import BinaryIO, Iterator

from .documents import Document, make_document
from .extract import extract_text_ex
from .warc import read_warc, split_http_response


def documents_from_warc(stream: BinaryIO, stats: dict | None = None) -> Iterator[Document]:
    """Extract one Document per HTML response record.

    ``stats`` (optional dict) accumulates counts: records, responses,
    documents, empty, malformed, truncated, replaced_chars.
    """
    stats = stats if stats is not None else {}
    for key in ("records", "responses", "documents", "empty", "malformed", "truncated", "replaced_chars"):
        stats.setdefault(key, 0)
    reader = read_warc(stream)
    for record in reader:
        stats["records"] += 1
        if record.record_type != "response":
            continue
        stats["responses"] += 1
        http_headers, body = split_http_response(record.payload)
        content_type = http_headers.get("content-type", record.content_type)
        result = extract_text_ex(body, content_type)
        stats["replaced_chars"] += result.replaced
        if not result.text:
            stats["empty"] += 1
            continue
        stats["documents"] += 1
        yield make_document(
            result.text,
            url=record.target_uri,
            fetched_at=record.date,
            source="web",
        )
    stats["malformed"] += reader.malformed
    stats["truncated"] += reader.truncated


def documents_from_text_file(path: str | Path, source: str = "book") -> Iterator[Document]:
    """One Document per plain-text file (the generic book/news ingestion path)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8", errors="replace")
    if text.strip():
        yield make_document(text, url=path.name, fetched_at=0, source=source)


def documents_from_jsonl(path: str | Path) -> Iterator[Document]:
    """Documents from a JSONL file; accepts full records or bare {text: ...}."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            if set(obj) >= {"id", "url", "fetched_at", "lang", "lang_confidence", "text", "source"}:
                yield Document.from_json(line)
            else:
                yield make_document(
                    obj["text"],
                    url=obj.get("url", ""),
                    fetched_at=obj.get("fetched_at", 0),
                    lang=obj.get("lang", "und"),
                    lang_confidence=obj.get("lang_confidence", 0.0),
                    source=obj.get("source", "other"),
                )
