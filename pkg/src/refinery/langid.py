"""Script detection and character n-gram language identification.

Script detection is pure Unicode block accounting. The trainable classifier
is a character 1-3-gram model with additive smoothing; its confidence is the
posterior of the winning language restricted to the dominant script's
candidate set, weighted by script consistency. The pipeline only consumes
the confidence through thresholds, so any monotone score works.
"""
from __future__ import annotations

import math
import re
import struct
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from sklearn.base import BaseEstimator

from .documents import LANGUAGES, UNDETERMINED
from .errors import DataError
from .scripts import OTHER, SCRIPT_LANGUAGES, is_countable_letter

MODEL_MAGIC = b"LIDM"
MODEL_VERSION = 1

_WS_RE = re.compile(r"\s+")


@dataclass
class ScriptProfile:
    fractions: dict[str, float] = field(default_factory=dict)

    @property
    def dominant(self) -> str:
        if not self.fractions:
            return OTHER
        return max(self.fractions, key=lambda s: (self.fractions[s], s))


def detect_script(text: str) -> ScriptProfile:
    """Per-script fractions over letter characters; {Other: 1.0} if letterless."""
    counts: Counter[str] = Counter()
    for ch in text:
        script = is_countable_letter(ch)
        if script is not None:
            counts[script] += 1
    total = sum(counts.values())
    if total == 0:
        return ScriptProfile({OTHER: 1.0})
    return ScriptProfile({script: n / total for script, n in counts.items()})


def _normalize(text: str) -> str:
    return _WS_RE.sub(" ", unicodedata.normalize("NFC", text)).strip()


def _gram_counts(text: str, lo: int, hi: int) -> dict[int, Counter]:
    out = {n: Counter() for n in range(lo, hi + 1)}
    for n in range(lo, hi + 1):
        counter = out[n]
        for i in range(len(text) - n + 1):
            counter[text[i : i + n]] += 1
    return out


class CharNgramLangId(BaseEstimator):
    """Additively smoothed character n-gram language classifier.

    Fitted attributes: ``languages_``, ``priors_`` (log), ``log_probs_``
    keyed by (lang, order), ``default_logp_`` for unseen grams, and
    ``vocab_sizes_`` (global gram vocabulary per order).
    """

    def __init__(self, ngram_range: tuple[int, int] = (1, 3), alpha: float = 0.01):
        self.ngram_range = ngram_range
        self.alpha = alpha

    def fit(self, texts: Iterable[str], labels: Iterable[str]) -> "CharNgramLangId":
        lo, hi = self.ngram_range
        counts: dict[str, dict[int, Counter]] = {}
        doc_counts: Counter[str] = Counter()
        for text, lang in zip(texts, labels):
            doc_counts[lang] += 1
            per_lang = counts.setdefault(lang, {n: Counter() for n in range(lo, hi + 1)})
            for n, grams in _gram_counts(_normalize(text), lo, hi).items():
                per_lang[n].update(grams)
        if not counts:
            raise DataError("empty training corpus")
        for lang in sorted(counts):
            if sum(counts[lang][lo].values()) == 0:
                raise DataError(f"language {lang!r} has no training text")

        vocab: dict[int, set[str]] = {n: set() for n in range(lo, hi + 1)}
        for per_lang in counts.values():
            for n in range(lo, hi + 1):
                vocab[n].update(per_lang[n])

        total_docs = sum(doc_counts.values())
        self.languages_ = tuple(sorted(counts))
        self.priors_ = {
            lang: math.log(doc_counts[lang] / total_docs) for lang in self.languages_
        }
        self.vocab_sizes_ = {n: len(vocab[n]) for n in vocab}
        self.log_probs_ = {}
        self.default_logp_ = {}
        for lang in self.languages_:
            for n in range(lo, hi + 1):
                grams = counts[lang][n]
                total = sum(grams.values())
                denom = total + self.alpha * self.vocab_sizes_[n]
                self.log_probs_[(lang, n)] = {
                    g: math.log((c + self.alpha) / denom) for g, c in grams.items()
                }
                self.default_logp_[(lang, n)] = math.log(self.alpha / denom)
        self.version_ = MODEL_VERSION
        return self

    def _log_likelihood(self, lang: str, grams: dict[int, Counter]) -> float:
        score = self.priors_[lang]
        for n, counter in grams.items():
            table = self.log_probs_[(lang, n)]
            default = self.default_logp_[(lang, n)]
            for gram, count in counter.items():
                score += count * table.get(gram, default)
        return score

    def classify(self, text: str) -> tuple[str, float]:
        """(language, confidence in [0, 1]); ("und", 0) for letterless text."""
        norm = _normalize(text)
        profile = detect_script(norm)
        if not norm or profile.fractions.get(OTHER, 0.0) == 1.0:
            return UNDETERMINED, 0.0
        dominant = profile.dominant
        if dominant == OTHER:
            return UNDETERMINED, 0.0
        candidates = [
            lang for lang in SCRIPT_LANGUAGES.get(dominant, ()) if lang in self.languages_
        ]
        if not candidates:
            return UNDETERMINED, 0.0
        lo, hi = self.ngram_range
        grams = _gram_counts(norm, lo, hi)
        scores = {lang: self._log_likelihood(lang, grams) for lang in candidates}
        top = max(candidates, key=lambda lang: (scores[lang], lang))
        peak = scores[top]
        denom = sum(math.exp(scores[lang] - peak) for lang in candidates)
        posterior = 1.0 / denom
        confidence = posterior * profile.fractions[dominant]
        return top, max(min(confidence, 1.0), 1e-12)

    def predict(self, texts: Sequence[str]) -> list[str]:
        return [self.classify(t)[0] for t in texts]

    def save(self, path: str) -> None:
        lo, hi = self.ngram_range
        parts = [MODEL_MAGIC, struct.pack("<IdBB", MODEL_VERSION, self.alpha, lo, hi)]
        parts.append(struct.pack("<H", len(self.languages_)))
        for lang in self.languages_:
            raw = lang.encode("utf-8")
            parts.append(struct.pack("<B", len(raw)) + raw)
            parts.append(struct.pack("<d", self.priors_[lang]))
        for n in range(lo, hi + 1):
            parts.append(struct.pack("<Q", self.vocab_sizes_[n]))
        for lang in self.languages_:
            for n in range(lo, hi + 1):
                table = self.log_probs_[(lang, n)]
                parts.append(struct.pack("<dQ", self.default_logp_[(lang, n)], len(table)))
                for gram in sorted(table):
                    raw = gram.encode("utf-8")
                    parts.append(struct.pack("<H", len(raw)) + raw)
                    parts.append(struct.pack("<d", table[gram]))
        with open(path, "wb") as f:
            f.write(b"".join(parts))

    @classmethod
    def load(cls, path: str) -> "CharNgramLangId":
        with open(path, "rb") as f:
            data = f.read()
        if data[:4] != MODEL_MAGIC:
            raise DataError(f"{path} is not a language-id model (bad magic)")
        version, alpha, lo, hi = struct.unpack_from("<IdBB", data, 4)
        if version != MODEL_VERSION:
            raise DataError(f"unsupported language-id model version {version}")
        offset = 4 + struct.calcsize("<IdBB")
        (n_langs,) = struct.unpack_from("<H", data, offset)
        offset += 2
        languages, priors = [], {}
        for _ in range(n_langs):
            (ln,) = struct.unpack_from("<B", data, offset)
            offset += 1
            lang = data[offset : offset + ln].decode("utf-8")
            offset += ln
            (prior,) = struct.unpack_from("<d", data, offset)
            offset += 8
            languages.append(lang)
            priors[lang] = prior
        model = cls(ngram_range=(lo, hi), alpha=alpha)
        model.languages_ = tuple(languages)
        model.priors_ = priors
        model.vocab_sizes_ = {}
        for n in range(lo, hi + 1):
            (size,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            model.vocab_sizes_[n] = size
        model.log_probs_ = {}
        model.default_logp_ = {}
        for lang in languages:
            for n in range(lo, hi + 1):
                default, n_entries = struct.unpack_from("<dQ", data, offset)
                offset += 16
                table = {}
                for _ in range(n_entries):
                    (ln,) = struct.unpack_from("<H", data, offset)
                    offset += 2
                    gram = data[offset : offset + ln].decode("utf-8")
                    offset += ln
                    (logp,) = struct.unpack_from("<d", data, offset)
                    offset += 8
                    table[gram] = logp
                model.log_probs_[(lang, n)] = table
                model.default_logp_[(lang, n)] = default
        model.version_ = version
        return model


def train_langid(
    labeled_corpus: Iterable[tuple[str, str]],
    languages: Sequence[str] | None = None,
    ngram_range: tuple[int, int] = (1, 3),
    alpha: float = 0.01,
) -> CharNgramLangId:
    """Train from (language, text) pairs; every declared language needs text."""
    pairs = list(labeled_corpus)
    model = CharNgramLangId(ngram_range=ngram_range, alpha=alpha)
    model.fit([text for _, text in pairs], [lang for lang, _ in pairs])
    declared = tuple(languages) if languages is not None else model.languages_
    for lang in declared:
        if lang not in model.languages_:
            raise DataError(f"language {lang!r} has no training text")
    return model


def classify(model: CharNgramLangId, text: str) -> tuple[str, float]:
    return model.classify(text)


def iter_labeled_jsonl(path: str) -> Iterator[tuple[str, str]]:
    """(lang, text) pairs from a JSONL file with at least lang and text fields."""
    import json

    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            yield obj["lang"], obj["text"]


SUPPORTED_LANGUAGES = LANGUAGES
