"""Unicode script blocks for the supported languages.

Shared by script detection, language candidate restriction, and the
tokenizer-cleaning allowlist.
"""
from __future__ import annotations

import unicodedata

OTHER = "Other"

# (start, end) inclusive code point ranges per script
SCRIPT_BLOCKS: dict[str, tuple[tuple[int, int], ...]] = {
    "Latin": ((0x0041, 0x005A), (0x0061, 0x007A), (0x00C0, 0x024F), (0x1E00, 0x1EFF)),
    "Devanagari": ((0x0900, 0x097F),),
    "Bengali": ((0x0980, 0x09FF),),
    "Gurmukhi": ((0x0A00, 0x0A7F),),
    "Gujarati": ((0x0A80, 0x0AFF),),
    "Oriya": ((0x0B00, 0x0B7F),),
    "Tamil": ((0x0B80, 0x0BFF),),
    "Telugu": ((0x0C00, 0x0C7F),),
    "Kannada": ((0x0C80, 0x0CFF),),
    "Malayalam": ((0x0D00, 0x0D7F),),
}

SCRIPT_LANGUAGES: dict[str, tuple[str, ...]] = {
    "Latin": ("en",),
    "Devanagari": ("hi", "mr"),
    "Bengali": ("bn", "as"),
    "Gurmukhi": ("pa",),
    "Gujarati": ("gu",),
    "Oriya": ("or",),
    "Tamil": ("ta",),
    "Telugu": ("te",),
    "Kannada": ("kn",),
    "Malayalam": ("ml",),
}

LANGUAGE_SCRIPT: dict[str, str] = {
    lang: script for script, langs in SCRIPT_LANGUAGES.items() for lang in langs
}

_LOOKUP = sorted(
    (start, end, script)
    for script, ranges in SCRIPT_BLOCKS.items()
    for start, end in ranges
)


def script_of(ch: str) -> str | None:
    """Script block of a code point, or None if outside all known blocks."""
    cp = ord(ch)
    for start, end, script in _LOOKUP:
        if cp < start:
            return None
        if cp <= end:
            return script
    return None


def is_countable_letter(ch: str) -> str | None:
    """Script name if ch counts toward script fractions, else None.

    Letters count everywhere; combining marks count inside Indic blocks
    (vowel signs and viramas are part of written words there). Digits,
    whitespace and punctuation never count.
    """
    cat = unicodedata.category(ch)
    script = script_of(ch)
    if cat.startswith("L"):
        return script or OTHER
    if cat.startswith("M") and script is not None and script != "Latin":
        return script
    return None


# Allowlist for tokenizer cleaning: the Indic script blocks plus Basic Latin.
ALLOWED_BLOCKS: tuple[tuple[int, int], ...] = (
    (0x0000, 0x007F),  # Basic Latin
    (0x0900, 0x097F),
    (0x0980, 0x09FF),
    (0x0A00, 0x0A7F),
    (0x0A80, 0x0AFF),
    (0x0B00, 0x0B7F),
    (0x0B80, 0x0BFF),
    (0x0C00, 0x0C7F),
    (0x0C80, 0x0CFF),
    (0x0D00, 0x0D7F),
)


def is_allowed_char(ch: str, extra_ranges: tuple[tuple[int, int], ...] = ()) -> bool:
    cp = ord(ch)
    for start, end in ALLOWED_BLOCKS + extra_ranges:
        if start <= cp <= end:
            return True
    return False
