"""Batched near-duplicate removal via MinHash LSH.

Documents become sets of hashed 5-word shingles, sets become 250-value
signatures under a universal hash family, and an LSH index with 25 bands of
10 rows surfaces candidate pairs. Pairs whose signature-estimated similarity
clears the threshold are unioned into clusters; one survivor is kept per
cluster (earliest fetch date, then smallest URL, then smallest id).
"""
from __future__ import annotations

import hashlib
import random
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .documents import Document
from .errors import ConfigError, DataError

DEFAULT_NUM_PERM = 250
DEFAULT_BANDS = 25
DEFAULT_ROWS = 10
DEFAULT_THRESHOLD = 0.7
DEFAULT_BATCH_CAPACITY = 10_000_000
SHINGLE_WIDTH = 5

# 2^31 - 1 keeps a*x + b exact in uint64 for vectorized (a*x + b) mod p
_PRIME = np.uint64((1 << 31) - 1)
_CHUNK = 8192


@dataclass
class ShingleSet:
    doc_id: str
    shingles: frozenset[int]


@dataclass
class MinHashSignature:
    doc_id: str
    values: np.ndarray  # uint64, length num_perm
    seed: int

    @property
    def num_perm(self) -> int:
        return len(self.values)


def _normalize_words(text: str) -> list[str]:
    words = []
    for raw in text.lower().split():
        word = "".join(
            ch for ch in raw if not unicodedata.category(ch).startswith("P")
        )
        if word:
            words.append(word)
    return words


def _hash_window(words: Sequence[str]) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"shingle")
    h.update("\x1f".join(words).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def shingle(doc: Document, width: int = SHINGLE_WIDTH) -> ShingleSet:
    """Hashed word windows; a short document yields its full-sequence shingle."""
    words = _normalize_words(doc.text)
    if not words:
        raise DataError(f"document {doc.id} has no words to shingle")
    if len(words) < width:
        hashes = {_hash_window(words)}
    else:
        hashes = {
            _hash_window(words[i : i + width]) for i in range(len(words) - width + 1)
        }
    return ShingleSet(doc.id, frozenset(hashes))


class MinHasher:
    """num_perm universal hash functions (a*x + b) mod p derived from a seed."""

    def __init__(self, num_perm: int = DEFAULT_NUM_PERM, seed: int = 0):
        self.num_perm = num_perm
        self.seed = seed
        rng = random.Random(seed)
        p = int(_PRIME)
        self._a = np.array([rng.randrange(1, p) for _ in range(num_perm)], dtype=np.uint64)
        self._b = np.array([rng.randrange(0, p) for _ in range(num_perm)], dtype=np.uint64)

    def signature_of(self, shingle_hashes: Iterable[int]) -> np.ndarray:
        x = np.fromiter(shingle_hashes, dtype=np.uint64) % _PRIME
        if x.size == 0:
            raise DataError("cannot minhash an empty shingle set")
        mins = np.full(self.num_perm, np.iinfo(np.uint64).max, dtype=np.uint64)
        a = self._a[:, None]
        b = self._b[:, None]
        for start in range(0, x.size, _CHUNK):
            chunk = x[start : start + _CHUNK][None, :]
            hashed = (a * chunk + b) % _PRIME
            np.minimum(mins, hashed.min(axis=1), out=mins)
        return mins


_HASHER_CACHE: dict[tuple[int, int], MinHasher] = {}


def _hasher(num_perm: int, seed: int) -> MinHasher:
    key = (num_perm, seed)
    if key not in _HASHER_CACHE:
        _HASHER_CACHE[key] = MinHasher(num_perm, seed)
    return _HASHER_CACHE[key]


def minhash(shingles: ShingleSet, seed: int = 0, num_perm: int = DEFAULT_NUM_PERM) -> MinHashSignature:
    values = _hasher(num_perm, seed).signature_of(shingles.shingles)
    return MinHashSignature(shingles.doc_id, values, seed)


def estimated_similarity(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of agreeing signature rows; unbiased Jaccard estimator."""
    if a.seed != b.seed or a.num_perm != b.num_perm:
        raise ConfigError("signatures from different seeds/dimensions are not comparable")
    return float(np.mean(a.values == b.values))


def exact_jaccard(a: ShingleSet, b: ShingleSet) -> float:
    union = len(a.shingles | b.shingles)
    return len(a.shingles & b.shingles) / union if union else 0.0


@dataclass
class LshIndex:
    bands: int = DEFAULT_BANDS
    rows: int = DEFAULT_ROWS
    seed: int | None = None
    _tables: list[dict[bytes, list[str]]] = field(default_factory=list)
    _order: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self._tables:
            self._tables = [dict() for _ in range(self.bands)]

    def add(self, sig: MinHashSignature) -> None:
        if sig.num_perm != self.bands * self.rows:
            raise ConfigError(
                f"signature dimension {sig.num_perm} != bands*rows = {self.bands * self.rows}"
            )
        if self.seed is None:
            self.seed = sig.seed
        elif sig.seed != self.seed:
            raise ConfigError("mixed minhash seeds in one LSH index")
        self._order.setdefault(sig.doc_id, len(self._order))
        for band in range(self.bands):
            key = sig.values[band * self.rows : (band + 1) * self.rows].tobytes()
            self._tables[band].setdefault(key, []).append(sig.doc_id)

    def candidate_pairs(self) -> Iterator[tuple[str, str]]:
        """Unordered candidate pairs, each emitted once, deterministic order."""
        seen: set[tuple[str, str]] = set()
        for table in self._tables:
            for bucket in table.values():
                if len(bucket) < 2:
                    continue
                for i in range(len(bucket)):
                    for j in range(i + 1, len(bucket)):
                        a, b = bucket[i], bucket[j]
                        if self._order[a] > self._order[b]:
                            a, b = b, a
                        pair = (a, b)
                        if pair not in seen:
                            seen.add(pair)
                            yield pair


def lsh_candidates(
    signatures: Iterable[MinHashSignature],
    bands: int = DEFAULT_BANDS,
    rows: int = DEFAULT_ROWS,
) -> Iterator[tuple[str, str]]:
    index = LshIndex(bands=bands, rows=rows)
    for sig in signatures:
        index.add(sig)
    return index.candidate_pairs()


class UnionFind:
    """Disjoint sets with path compression; roots are the smallest member."""

    def __init__(self) -> None:
        self.parent: dict[str, str] = {}
        self._min: dict[str, str] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            self._min[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        self.parent[ry] = rx
        self._min[rx] = min(self._min[rx], self._min[ry])


@dataclass
class DedupResult:
    survivors: list[Document]
    clusters: dict[str, list[str]]  # survivor id -> duplicate ids removed
    report: dict


def dedup_batch(
    batch: Sequence[Document],
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    num_perm: int = DEFAULT_NUM_PERM,
    bands: int = DEFAULT_BANDS,
    rows: int = DEFAULT_ROWS,
    verify_exact: bool = False,
) -> DedupResult:
    """Near-duplicate removal within one batch.

    Candidate pairs are thresholded on the signature-estimated similarity;
    pass verify_exact to recompute true Jaccard for audit runs.
    """
    if num_perm != bands * rows:
        raise ConfigError(f"num_perm {num_perm} must equal bands*rows {bands * rows}")
    docs = list(batch)
    by_id = {doc.id: doc for doc in docs}
    shingle_sets: dict[str, ShingleSet] = {}
    index = LshIndex(bands=bands, rows=rows)
    signatures: dict[str, MinHashSignature] = {}
    for doc in docs:
        if doc.id in signatures:
            continue  # identical (url, date, text) duplicates share one signature
        ss = shingle(doc)
        sig = minhash(ss, seed=seed, num_perm=num_perm)
        signatures[doc.id] = sig
        if verify_exact:
            shingle_sets[doc.id] = ss
        index.add(sig)

    uf = UnionFind()
    for a, b in index.candidate_pairs():
        if verify_exact:
            sim = exact_jaccard(shingle_sets[a], shingle_sets[b])
        else:
            sim = estimated_similarity(signatures[a], signatures[b])
        if sim >= threshold:
            uf.union(a, b)

    clusters_by_root: dict[str, list[str]] = {}
    for doc_id in uf.parent:
        clusters_by_root.setdefault(uf.find(doc_id), []).append(doc_id)

    survivor_of: dict[str, str] = {}
    clusters: dict[str, list[str]] = {}
    for members in clusters_by_root.values():
        ordered = sorted(
            members,
            key=lambda i: (by_id[i].fetched_at, by_id[i].url, by_id[i].id),
        )
        survivor = ordered[0]
        clusters[survivor] = ordered[1:]
        for member in members:
            survivor_of[member] = survivor

    survivors = [
        doc for doc in docs if survivor_of.get(doc.id, doc.id) == doc.id
    ]
    # identical-id duplicates beyond the first occurrence are also dropped
    seen_ids: set[str] = set()
    unique_survivors = []
    for doc in survivors:
        if doc.id not in seen_ids:
            seen_ids.add(doc.id)
            unique_survivors.append(doc)
    report = {
        "docs_in": len(docs),
        "docs_out": len(unique_survivors),
        "clusters": len(clusters),
        "duplicates_removed": len(docs) - len(unique_survivors),
    }
    return DedupResult(unique_survivors, clusters, report)


def batch_planner(
    docs: Iterable[Document], capacity: int = DEFAULT_BATCH_CAPACITY
) -> Iterator[list[Document]]:
    """Sort by fetch date and chunk into capacity-sized batches.

    Dedup runs within batches only; cross-batch duplicates deliberately
    survive to bound data loss.
    """
    if capacity < 1:
        raise ConfigError("batch capacity must be >= 1")
    ordered = sorted(docs, key=lambda d: d.fetched_at)
    for start in range(0, len(ordered), capacity):
        yield ordered[start : start + capacity]


def cluster_dump_lines(clusters: dict[str, list[str]]) -> Iterator[str]:
    for survivor in sorted(clusters):
        for dup in clusters[survivor]:
            yield f"{survivor}\t{dup}"


class MinHashDeduplicator(BaseEstimator):
    """Estimator wrapper: transform(docs) returns the surviving documents."""

    def __init__(
        self,
        threshold: float = DEFAULT_THRESHOLD,
        num_perm: int = DEFAULT_NUM_PERM,
        bands: int = DEFAULT_BANDS,
        rows: int = DEFAULT_ROWS,
        seed: int = 0,
        batch_capacity: int = DEFAULT_BATCH_CAPACITY,
        verify_exact: bool = False,
    ):
        self.threshold = threshold
        self.num_perm = num_perm
        self.bands = bands
        self.rows = rows
        self.seed = seed
        self.batch_capacity = batch_capacity
        self.verify_exact = verify_exact

    def fit(self, docs: Iterable[Document] | None = None, y=None) -> "MinHashDeduplicator":
        return self

    def transform(self, docs: Iterable[Document]) -> list[Document]:
        survivors: list[Document] = []
        self.clusters_ = {}
        self.reports_ = []
        for batch in batch_planner(docs, self.batch_capacity):
            result = dedup_batch(
                batch,
                threshold=self.threshold,
                seed=self.seed,
                num_perm=self.num_perm,
                bands=self.bands,
                rows=self.rows,
                verify_exact=self.verify_exact,
            )
            survivors.extend(result.survivors)
            self.clusters_.update(result.clusters)
            self.reports_.append(result.report)
        return survivors
