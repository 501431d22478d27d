"""Per-document quality features, threshold filters, and percentile calibration.

The basic filter gates on language confidence, token count, mean word length,
symbol-to-word ratio, and mean sentence length, with shipped per-language
defaults. The full filter adds upper cutoffs on the noise-indicating features
(perplexity, duplication/repetition fractions, ellipsis and bullet rates),
calibrated as empirical percentiles on a corpus sample.
"""
from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping, Sequence

from sklearn.base import BaseEstimator

from .documents import Document
from .errors import ConfigError, DataError
from .scripts import LANGUAGE_SCRIPT

DANDA = "।"
DOUBLE_DANDA = "॥"
_SENTENCE_SPLIT_RE = re.compile(r"[.!?।\n]")
_BULLET_CHARS = frozenset("•‣▪-*")
_WS_RE = re.compile(r"\s+")

TOP_NGRAM_ORDERS = (2, 3, 4)
DUP_NGRAM_ORDERS = (5, 6, 7, 8, 9, 10, 11)

# Drop-reason / calibration order is fixed so stage reports are deterministic.
BASIC_PREDICATES = (
    "lang_confidence",
    "token_count",
    "mean_word_length",
    "symbol_to_word",
    "mean_sentence_length",
)
CALIBRATED_FEATURES = (
    ("ppl_score",)
    + ("frac_duplicate_lines", "frac_chars_in_duplicate_lines")
    + tuple(f"frac_chars_top_ngram_{n}" for n in TOP_NGRAM_ORDERS)
    + tuple(f"frac_chars_in_dup_ngrams_{n}" for n in DUP_NGRAM_ORDERS)
    + ("frac_lines_ellipsis", "frac_lines_bullet")
)


@dataclass
class FeatureVector:
    token_count: int = 0
    mean_word_length: float = 0.0
    mean_sentence_length: float = 0.0
    symbol_to_word_ratio: float = 0.0
    ppl_score: float = 0.0
    frac_duplicate_lines: float = 0.0
    frac_chars_in_duplicate_lines: float = 0.0
    frac_chars_top_ngram: dict[int, float] = field(
        default_factory=lambda: {n: 0.0 for n in TOP_NGRAM_ORDERS}
    )
    frac_chars_in_dup_ngrams: dict[int, float] = field(
        default_factory=lambda: {n: 0.0 for n in DUP_NGRAM_ORDERS}
    )
    frac_lines_ellipsis: float = 0.0
    frac_lines_bullet: float = 0.0

    def value(self, name: str) -> float:
        """Feature value by calibration name (indexed maps use _n suffixes)."""
        if name.startswith("frac_chars_top_ngram_"):
            return self.frac_chars_top_ngram[int(name.rsplit("_", 1)[1])]
        if name.startswith("frac_chars_in_dup_ngrams_"):
            return self.frac_chars_in_dup_ngrams[int(name.rsplit("_", 1)[1])]
        return getattr(self, name)


class CharBigramModel:
    """Additively smoothed character bigram scorer for perplexity features."""

    def __init__(self, alpha: float = 0.01):
        self.alpha = alpha
        self._pair_counts: Counter[tuple[str, str]] = Counter()
        self._context_counts: Counter[str] = Counter()
        self._charset: set[str] = set()

    @staticmethod
    def _normalize(text: str) -> str:
        return _WS_RE.sub(" ", unicodedata.normalize("NFC", text)).strip()

    def fit(self, texts: Iterable[str]) -> "CharBigramModel":
        for text in texts:
            norm = self._normalize(text)
            self._charset.update(norm)
            for a, b in zip(norm, norm[1:]):
                self._pair_counts[(a, b)] += 1
                self._context_counts[a] += 1
        return self

    def log_prob(self, a: str, b: str) -> float:
        denom = self._context_counts.get(a, 0) + self.alpha * (len(self._charset) + 1)
        return math.log((self._pair_counts.get((a, b), 0) + self.alpha) / denom)

    def perplexity(self, text: str) -> float:
        norm = self._normalize(text)
        if len(norm) < 2:
            return 0.0
        total = sum(self.log_prob(a, b) for a, b in zip(norm, norm[1:]))
        return math.exp(-total / (len(norm) - 1))


class PerplexityScorer:
    """Per-language bigram models trained on a clean sample."""

    def __init__(self, models: Mapping[str, CharBigramModel] | None = None):
        self.models = dict(models or {})

    @classmethod
    def fit(cls, labeled_texts: Iterable[tuple[str, str]], alpha: float = 0.01) -> "PerplexityScorer":
        grouped: dict[str, list[str]] = {}
        for lang, text in labeled_texts:
            grouped.setdefault(lang, []).append(text)
        return cls({lang: CharBigramModel(alpha).fit(texts) for lang, texts in grouped.items()})

    def for_lang(self, lang: str) -> CharBigramModel | None:
        return self.models.get(lang)


def _sentence_punct(lang: str) -> frozenset[str]:
    base = {".", "!", "?"}
    if LANGUAGE_SCRIPT.get(lang) != "Latin":
        base |= {DANDA, DOUBLE_DANDA}
    return frozenset(base)


def _is_symbol(ch: str, sentence_punct: frozenset[str]) -> bool:
    if ch.isspace() or ch in sentence_punct:
        return False
    cat = unicodedata.category(ch)
    return not (cat.startswith("L") or cat.startswith("M") or cat == "Nd")


def compute_features(doc: Document, lm: CharBigramModel | None = None) -> FeatureVector:
    """Deterministic quality features; degenerate inputs produce zeros.

    Lines are compared with surrounding whitespace trimmed, so the vector is
    invariant under trailing-whitespace changes per line.
    """
    lines = [line.rstrip() for line in doc.text.split("\n")]
    text = "\n".join(lines)
    words = text.split()
    if not words:
        return FeatureVector()

    token_count = len(words)
    word_chars = sum(len(w) for w in words)
    mean_word_length = word_chars / token_count

    sentence_count = sum(
        1 for seg in _SENTENCE_SPLIT_RE.split(text) if seg.split()
    )
    mean_sentence_length = token_count / sentence_count if sentence_count else 0.0

    punct = _sentence_punct(doc.lang)
    symbol_count = sum(1 for ch in text if _is_symbol(ch, punct))
    symbol_to_word_ratio = symbol_count / token_count

    nonblank = [line.strip() for line in lines if line.strip()]
    frac_dup_lines = 0.0
    frac_chars_dup_lines = 0.0
    if nonblank:
        line_counts = Counter(nonblank)
        dup_occurrences = sum(c - 1 for c in line_counts.values())
        frac_dup_lines = dup_occurrences / len(nonblank)
        line_chars = sum(len(line) for line in nonblank)
        dup_chars = sum((c - 1) * len(line) for line, c in line_counts.items())
        frac_chars_dup_lines = dup_chars / line_chars if line_chars else 0.0

    top_ngram: dict[int, float] = {}
    for n in TOP_NGRAM_ORDERS:
        top_ngram[n] = _top_ngram_char_fraction(words, n, word_chars)
    dup_ngrams: dict[int, float] = {}
    for n in DUP_NGRAM_ORDERS:
        dup_ngrams[n] = _dup_ngram_char_fraction(words, n, word_chars)

    frac_ellipsis = 0.0
    frac_bullet = 0.0
    if nonblank:
        frac_ellipsis = sum(
            1 for line in nonblank if line.endswith("...") or line.endswith("…")
        ) / len(nonblank)
        frac_bullet = sum(1 for line in nonblank if line[0] in _BULLET_CHARS) / len(nonblank)

    return FeatureVector(
        token_count=token_count,
        mean_word_length=mean_word_length,
        mean_sentence_length=mean_sentence_length,
        symbol_to_word_ratio=symbol_to_word_ratio,
        ppl_score=lm.perplexity(text) if lm is not None else 0.0,
        frac_duplicate_lines=frac_dup_lines,
        frac_chars_in_duplicate_lines=frac_chars_dup_lines,
        frac_chars_top_ngram=top_ngram,
        frac_chars_in_dup_ngrams=dup_ngrams,
        frac_lines_ellipsis=frac_ellipsis,
        frac_lines_bullet=frac_bullet,
    )


def _top_ngram_char_fraction(words: Sequence[str], n: int, word_chars: int) -> float:
    """Characters covered by the most common word n-gram / total word chars."""
    if len(words) < n or word_chars == 0:
        return 0.0
    counts: Counter[tuple[str, ...]] = Counter(
        tuple(words[i : i + n]) for i in range(len(words) - n + 1)
    )
    best = max(counts.values())
    covered = max(
        c * sum(len(w) for w in gram) for gram, c in counts.items() if c == best
    )
    return min(covered / word_chars, 1.0)


def _dup_ngram_char_fraction(words: Sequence[str], n: int, word_chars: int) -> float:
    """Characters inside any word n-gram occurring at least twice / total chars."""
    if len(words) < n or word_chars == 0:
        return 0.0
    counts: Counter[tuple[str, ...]] = Counter(
        tuple(words[i : i + n]) for i in range(len(words) - n + 1)
    )
    marked = [False] * len(words)
    for i in range(len(words) - n + 1):
        if counts[tuple(words[i : i + n])] >= 2:
            for j in range(i, i + n):
                marked[j] = True
    covered = sum(len(w) for w, m in zip(words, marked) if m)
    return min(covered / word_chars, 1.0)


@dataclass
class LanguageThresholds:
    token_count: tuple[int, int]
    mean_word_length: tuple[float, float]
    symbol_to_word_max: float
    mean_sentence_min: float


@dataclass
class FilterConfig:
    languages: dict[str, LanguageThresholds]
    lang_confidence_min: float = 0.1
    percentile_cutoffs: dict[str, float] | None = None

    def with_confidence(self, minimum: float) -> "FilterConfig":
        return replace(self, lang_confidence_min=minimum)

    def with_cutoffs(self, cutoffs: dict[str, float]) -> "FilterConfig":
        return replace(self, percentile_cutoffs=dict(cutoffs))

    def to_toml(self) -> str:
        out = [f"lang_confidence_min = {_toml_num(self.lang_confidence_min)}", ""]
        for lang, t in self.languages.items():
            out.append(f"[languages.{lang}]")
            out.append(
                f"token_count = [{_toml_num(t.token_count[0])}, {_toml_num(t.token_count[1])}]"
            )
            out.append(
                "mean_word_length = "
                f"[{_toml_num(t.mean_word_length[0])}, {_toml_num(t.mean_word_length[1])}]"
            )
            out.append(f"symbol_to_word_max = {_toml_num(t.symbol_to_word_max)}")
            out.append(f"mean_sentence_min = {_toml_num(t.mean_sentence_min)}")
            out.append("")
        if self.percentile_cutoffs is not None:
            out.append("[percentile_cutoffs]")
            for name in CALIBRATED_FEATURES:
                if name in self.percentile_cutoffs:
                    out.append(f"{name} = {_toml_num(self.percentile_cutoffs[name])}")
            out.append("")
        return "\n".join(out)

    @classmethod
    def from_toml(cls, text: str) -> "FilterConfig":
        try:
            import tomllib  # type: ignore[import-not-found]
        except ModuleNotFoundError:
            import tomli as tomllib
        obj = tomllib.loads(text)
        languages = {}
        for lang, row in obj.get("languages", {}).items():
            thresholds = LanguageThresholds(
                token_count=tuple(row["token_count"]),
                mean_word_length=tuple(row["mean_word_length"]),
                symbol_to_word_max=row["symbol_to_word_max"],
                mean_sentence_min=row["mean_sentence_min"],
            )
            if thresholds.token_count[0] > thresholds.token_count[1]:
                raise ConfigError(f"token_count range inverted for {lang}")
            if thresholds.mean_word_length[0] > thresholds.mean_word_length[1]:
                raise ConfigError(f"mean_word_length range inverted for {lang}")
            languages[lang] = thresholds
        return cls(
            languages=languages,
            lang_confidence_min=obj.get("lang_confidence_min", 0.1),
            percentile_cutoffs=obj.get("percentile_cutoffs"),
        )


def _toml_num(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def default_filter_config() -> FilterConfig:
    """Shipped per-language thresholds (token count, word length, symbol
    ratio upper bound, sentence length lower bound)."""
    rows = {
        "hi": ((50, 10000), (3, 10), 0.22, 4.2),
        "bn": ((40, 10000), (4, 9), 0.24, 4.4),
        "ta": ((45, 10000), (6, 9), 0.32, 5.1),
        "ml": ((55, 10000), (6, 10), 0.25, 3.5),
        "mr": ((43, 10000), (4, 6), 0.31, 4.3),
        "te": ((52, 10000), (5, 8), 0.28, 5.4),
        "kn": ((48, 10000), (5, 8), 0.32, 3.6),
        "gu": ((51, 10000), (4, 6), 0.23, 3.4),
        "pa": ((55, 10000), (3, 6), 0.24, 3.7),
        "or": ((47, 10000), (4, 7), 0.32, 4.2),
        "as": ((49, 10000), (4, 7), 0.25, 3.8),
    }
    return FilterConfig(
        languages={
            lang: LanguageThresholds(tc, mwl, s2w, msl)
            for lang, (tc, mwl, s2w, msl) in rows.items()
        }
    )


def apply_basic_filter(
    doc: Document, fv: FeatureVector, cfg: FilterConfig
) -> tuple[bool, str | None]:
    """Keep/drop with the first violated predicate (fixed order) as reason."""
    if doc.lang_confidence < cfg.lang_confidence_min:
        return False, "lang_confidence"
    thresholds = cfg.languages.get(doc.lang)
    if thresholds is None:
        raise DataError(f"no filter thresholds configured for language {doc.lang!r}")
    lo, hi = thresholds.token_count
    if not lo <= fv.token_count <= hi:
        return False, "token_count"
    lo, hi = thresholds.mean_word_length
    if not lo <= fv.mean_word_length <= hi:
        return False, "mean_word_length"
    if fv.symbol_to_word_ratio > thresholds.symbol_to_word_max:
        return False, "symbol_to_word"
    if not fv.mean_sentence_length > thresholds.mean_sentence_min:
        return False, "mean_sentence_length"
    return True, None


def calibrate_percentiles(
    corpus_sample: Iterable[FeatureVector], p: float = 0.90
) -> dict[str, float]:
    """Nearest-rank p-quantile per noise feature, used as upper cutoffs."""
    sample = list(corpus_sample)
    if len(sample) < 100:
        raise DataError(f"calibration needs at least 100 feature vectors, got {len(sample)}")
    cutoffs: dict[str, float] = {}
    rank = max(1, math.ceil(p * len(sample)))
    for name in CALIBRATED_FEATURES:
        values = sorted(fv.value(name) for fv in sample)
        cutoffs[name] = values[rank - 1]
    return cutoffs


def apply_full_filter(
    doc: Document, fv: FeatureVector, cfg: FilterConfig
) -> tuple[bool, str | None]:
    """Basic filter plus calibrated upper cutoffs on every noise feature."""
    if cfg.percentile_cutoffs is None:
        raise ConfigError("full filter requires percentile_cutoffs; calibrate first")
    keep, reason = apply_basic_filter(doc, fv, cfg)
    if not keep:
        return keep, reason
    for name in CALIBRATED_FEATURES:
        cutoff = cfg.percentile_cutoffs.get(name)
        if cutoff is not None and fv.value(name) > cutoff:
            return False, name
    return True, None


class QualityFilter(BaseEstimator):
    """Estimator wrapper: fit calibrates percentile cutoffs, predict keeps/drops."""

    def __init__(
        self,
        config: FilterConfig | None = None,
        mode: str = "basic",
        percentile: float = 0.90,
        ppl_models: PerplexityScorer | None = None,
    ):
        self.config = config
        self.mode = mode
        self.percentile = percentile
        self.ppl_models = ppl_models

    def _config(self) -> FilterConfig:
        return self.config if self.config is not None else default_filter_config()

    def _features(self, doc: Document) -> FeatureVector:
        lm = self.ppl_models.for_lang(doc.lang) if self.ppl_models else None
        return compute_features(doc, lm)

    def fit(self, docs: Iterable[Document], y=None) -> "QualityFilter":
        cfg = self._config()
        if self.mode == "full" and cfg.percentile_cutoffs is None:
            cutoffs = calibrate_percentiles(
                (self._features(d) for d in docs), self.percentile
            )
            cfg = cfg.with_cutoffs(cutoffs)
        self.config_ = cfg
        return self

    def decide(self, doc: Document) -> tuple[bool, str | None]:
        if not hasattr(self, "config_"):
            self.fit(())
        fv = self._features(doc)
        if self.mode == "full":
            return apply_full_filter(doc, fv, self.config_)
        return apply_basic_filter(doc, fv, self.config_)

    def predict(self, docs: Sequence[Document]) -> list[bool]:
        return [self.decide(doc)[0] for doc in docs]

    def transform(self, docs: Iterable[Document]) -> Iterator[Document]:
        for doc in docs:
            if self.decide(doc)[0]:
                yield doc
