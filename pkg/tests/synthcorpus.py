"""Deterministic synthetic multilingual corpora for tests.

Each language gets its own lexicon drawn from its script block, so languages
sharing a script (hi/mr, bn/as) remain statistically separable. Word-length
ranges are tuned so clean documents pass the shipped filter thresholds.
"""
from __future__ import annotations

import random
import unicodedata
from functools import lru_cache

from refinery.documents import Document, make_document
from refinery.scripts import LANGUAGE_SCRIPT, SCRIPT_BLOCKS

DANDA = "।"

# (min, max) word lengths in base letters, tuned to the per-language
# mean-word-length windows of the shipped filter table
WORD_LENGTHS = {
    "hi": (3, 7),
    "bn": (4, 8),
    "ta": (6, 8),
    "ml": (6, 9),
    "mr": (4, 6),
    "te": (5, 8),
    "kn": (5, 8),
    "gu": (4, 6),
    "pa": (3, 6),
    "or": (4, 7),
    "as": (4, 7),
    "en": (3, 8),
}

ALL_LANGS = tuple(WORD_LENGTHS)
INDIC_LANGS = tuple(l for l in ALL_LANGS if l != "en")


@lru_cache(maxsize=None)
def script_letters(lang: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(base letters, combining vowel signs) for a language's script."""
    if lang == "en":
        return tuple("abcdefghijklmnopqrstuvwxyz"), ()
    script = LANGUAGE_SCRIPT[lang]
    (start, end), = SCRIPT_BLOCKS[script]
    base = []
    marks = []
    for cp in range(start, end + 1):
        ch = chr(cp)
        if unicodedata.normalize("NFD", ch) != ch:
            continue  # precomposed forms would change length under NFC
        cat = unicodedata.category(ch)
        if cat == "Lo":
            base.append(ch)
        elif cat in ("Mc", "Mn") and "NUKTA" not in unicodedata.name(ch, ""):
            marks.append(ch)
    return tuple(base), tuple(marks)


@lru_cache(maxsize=None)
def make_lexicon(lang: str, size: int = 400, seed: int = 0) -> tuple[str, ...]:
    rng = random.Random(f"lexicon:{lang}:{seed}")
    base, marks = script_letters(lang)
    lo, hi = WORD_LENGTHS[lang]
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        length = rng.randint(lo, hi)
        chars = [rng.choice(base)]
        while len(chars) < length:
            if marks and rng.random() < 0.35:
                chars.append(rng.choice(base))
                if len(chars) < length:
                    chars.append(rng.choice(marks))
            else:
                chars.append(rng.choice(base))
        word = unicodedata.normalize("NFC", "".join(chars[:length]))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return tuple(words)


def zipf_sample(rng: random.Random, lexicon: tuple[str, ...], n: int) -> list[str]:
    weights = [1.0 / (i + 1) for i in range(len(lexicon))]
    return rng.choices(lexicon, weights=weights, k=n)


def terminator(lang: str) -> str:
    return "." if lang == "en" else DANDA


def make_text(
    lang: str,
    n_words: int,
    rng: random.Random,
    sentence_every: int = 8,
    lexicon: tuple[str, ...] | None = None,
) -> str:
    lexicon = lexicon or make_lexicon(lang)
    words = zipf_sample(rng, lexicon, n_words)
    out = []
    for i, word in enumerate(words, start=1):
        if i % sentence_every == 0 or i == len(words):
            word = word + terminator(lang)
        out.append(word)
    return " ".join(out)


def make_clean_doc(
    lang: str,
    rng: random.Random,
    n_words: int = 90,
    url: str = "",
    fetched_at: int = 0,
    confidence: float = 0.95,
) -> Document:
    return make_document(
        make_text(lang, n_words, rng),
        url=url or f"http://{lang}.example/{rng.randrange(1 << 30)}",
        fetched_at=fetched_at or rng.randrange(1_500_000_000, 1_700_000_000),
        lang=lang,
        lang_confidence=confidence,
    )


def make_violator(lang: str, predicate: str, rng: random.Random) -> Document:
    """A document violating exactly one basic-filter predicate."""
    if predicate == "lang_confidence":
        return make_clean_doc(lang, rng, confidence=0.05)
    if predicate == "token_count":
        doc = make_clean_doc(lang, rng)
        text = make_text(lang, 10, rng)
        return make_document(text, url=doc.url, lang=lang, lang_confidence=0.95)
    if predicate == "mean_word_length":
        base, _ = script_letters(lang)
        words = []
        for i in range(80):
            word = "".join(rng.choice(base) for _ in range(20))
            if (i + 1) % 8 == 0:
                word += terminator(lang)
            words.append(word)
        return make_document(" ".join(words), lang=lang, lang_confidence=0.95)
    if predicate == "symbol_to_word":
        # every 8th token is a run of symbols; keeps the length mean in range
        lexicon = make_lexicon(lang)
        words = zipf_sample(rng, lexicon, 88)
        for i in range(7, len(words), 8):
            words[i] = "@@@@@@"
        text_words = []
        for i, word in enumerate(words, start=1):
            if i % 8 == 0:
                word += terminator(lang)
            text_words.append(word)
        return make_document(" ".join(text_words), lang=lang, lang_confidence=0.95)
    if predicate == "mean_sentence_length":
        text = make_text(lang, 90, rng, sentence_every=2)
        return make_document(text, lang=lang, lang_confidence=0.95)
    raise ValueError(predicate)


def make_labeled_training_corpus(
    langs: tuple[str, ...] = ALL_LANGS,
    docs_per_lang: int = 40,
    words_per_doc: int = 60,
    seed: int = 0,
) -> list[tuple[str, str]]:
    pairs = []
    for lang in langs:
        rng = random.Random(f"train:{lang}:{seed}")
        for _ in range(docs_per_lang):
            pairs.append((lang, make_text(lang, words_per_doc, rng)))
    return pairs


def make_near_duplicate_cluster(
    lang: str, rng: random.Random, members: int = 3, n_words: int = 200
) -> list[Document]:
    """Documents differing by single-word edits; pairwise shingle Jaccard >= 0.9."""
    lexicon = make_lexicon(lang)
    base_words = zipf_sample(rng, lexicon, n_words)
    docs = []
    for m in range(members):
        words = list(base_words)
        if m > 0:
            # one replacement far from other members' edit positions
            pos = 20 * m
            words[pos] = lexicon[(pos + m) % len(lexicon)]
        docs.append(
            make_document(
                " ".join(words),
                url=f"http://{lang}.example/dup/{rng.randrange(1 << 30)}",
                fetched_at=rng.randrange(1_500_000_000, 1_700_000_000),
                lang=lang,
                lang_confidence=0.95,
            )
        )
    return docs
