"""Corpus refinement and tokenizer training toolkit.

Turns raw web-archive and plain-text input into a deduplicated,
quality-filtered pre-training corpus and a cleaned subword tokenizer.
"""

from .documents import Document, LANGUAGES, make_document
from .errors import ConfigError, DataError, RefineryError
from .dedup import MinHashDeduplicator
from .heuristics import FeatureVector, FilterConfig, QualityFilter, default_filter_config
from .langid import CharNgramLangId, detect_script
from .tokenizer import BpeTokenizer

__version__ = "0.1.0"

__all__ = [
    "BpeTokenizer",
    "CharNgramLangId",
    "ConfigError",
    "DataError",
    "Document",
    "FeatureVector",
    "FilterConfig",
    "LANGUAGES",
    "MinHashDeduplicator",
    "QualityFilter",
    "RefineryError",
    "default_filter_config",
    "detect_script",
    "make_document",
    "__version__",
]
