"""Canonical document model shared by every pipeline stage."""
from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass, replace

LANGUAGES = ("as", "bn", "en", "gu", "hi", "kn", "ml", "mr", "or", "pa", "ta", "te")
UNDETERMINED = "und"
SOURCES = ("web", "book", "news", "wiki", "other")

_JSON_FIELDS = ("id", "url", "fetched_at", "lang", "lang_confidence", "text", "source")


def document_id(url: str, fetched_at: int, text: str) -> str:
    """Stable 128-bit identifier, a pure function of (url, fetched_at, text)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(url.encode("utf-8"))
    h.update(b"\x00")
    h.update(str(int(fetched_at)).encode("ascii"))
    h.update(b"\x00")
    h.update(text.encode("utf-8"))
    return h.hexdigest()


@dataclass
class Document:
    id: str
    url: str
    fetched_at: int  # epoch seconds, 0 if unknown
    lang: str
    lang_confidence: float
    text: str
    source: str

    def to_json(self) -> str:
        return json.dumps(
            {name: getattr(self, name) for name in _JSON_FIELDS},
            ensure_ascii=False,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Document":
        obj = json.loads(line)
        return cls(**{name: obj[name] for name in _JSON_FIELDS})

    def with_language(self, lang: str, confidence: float) -> "Document":
        if lang == UNDETERMINED or confidence <= 0.0:
            return replace(self, lang=UNDETERMINED, lang_confidence=0.0)
        return replace(self, lang=lang, lang_confidence=min(confidence, 1.0))


def make_document(
    text: str,
    url: str = "",
    fetched_at: int = 0,
    lang: str = UNDETERMINED,
    lang_confidence: float = 0.0,
    source: str = "web",
) -> Document:
    """Build a Document with normalized text and a content-derived id.

    Text is NFC-normalized and stripped of NUL bytes; the (lang, confidence)
    pair is coerced so that lang == "und" exactly when confidence == 0.
    """
    text = unicodedata.normalize("NFC", text).replace("\x00", "")
    fetched_at = int(fetched_at)
    if lang == UNDETERMINED or lang_confidence <= 0.0:
        lang, lang_confidence = UNDETERMINED, 0.0
    else:
        lang_confidence = min(float(lang_confidence), 1.0)
    if source not in SOURCES:
        source = "other"
    return Document(
        id=document_id(url, fetched_at, text),
        url=url,
        fetched_at=fetched_at,
        lang=lang,
        lang_confidence=lang_confidence,
        text=text,
        source=source,
    )
