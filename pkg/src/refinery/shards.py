"""Sharded corpus I/O: newline-delimited document records plus a manifest.

Shard files are named ``{prefix}-{00000}.jsonl`` (``.gz`` when compressed) and
a sidecar ``{prefix}.manifest`` lists one shard entry per line. Writes go to a
``.partial`` temp name and are renamed on success, so an interrupted write
leaves a discardable partial file and never a corrupt final shard.
"""
from __future__ import annotations

import gzip
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .documents import Document
from .errors import DataError

PARTIAL_SUFFIX = ".partial"


@dataclass
class Shard:
    path: str  # basename, relative to the manifest directory
    count: int
    bytes: int
    checksum: str  # 64-bit blake2b of the file bytes, hex

    def to_json(self) -> str:
        return json.dumps(
            {"path": self.path, "count": self.count, "bytes": self.bytes, "checksum": self.checksum},
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "Shard":
        obj = json.loads(line)
        return cls(obj["path"], obj["count"], obj["bytes"], obj["checksum"])


def file_checksum(path: Path) -> str:
    h = hashlib.blake2b(digest_size=8)
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def shard_name(prefix: str, index: int, compress: bool = False) -> str:
    return f"{prefix}-{index:05d}.jsonl" + (".gz" if compress else "")


def write_one_shard(docs: Sequence[Document], path: Path, compress: bool = False) -> Shard:
    """Write a single shard atomically; returns its manifest entry."""
    tmp = path.with_name(path.name + PARTIAL_SUFFIX)
    count = 0
    if compress:
        # mtime=0 keeps gzip output byte-identical across runs
        with open(tmp, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            for doc in docs:
                f.write(doc.to_json().encode("utf-8") + b"\n")
                count += 1
    else:
        with open(tmp, "wb") as f:
            for doc in docs:
                f.write(doc.to_json().encode("utf-8") + b"\n")
                count += 1
    os.replace(tmp, path)
    return Shard(path.name, count, path.stat().st_size, file_checksum(path))


def write_shard(
    docs: Iterable[Document],
    path: str | Path,
    max_docs_per_shard: int,
    compress: bool = False,
) -> list[Shard]:
    """Split a document stream into shards under prefix ``path``.

    ``path`` is the shard prefix (directory + basename stem); the manifest is
    written alongside as ``{prefix}.manifest`` once all shards committed.
    """
    if max_docs_per_shard < 1:
        raise ValueError("max_docs_per_shard must be >= 1")
    prefix = Path(path)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    shards: list[Shard] = []
    batch: list[Document] = []
    for doc in docs:
        batch.append(doc)
        if len(batch) >= max_docs_per_shard:
            target = prefix.parent / shard_name(prefix.name, len(shards), compress)
            shards.append(write_one_shard(batch, target, compress))
            batch = []
    if batch:
        target = prefix.parent / shard_name(prefix.name, len(shards), compress)
        shards.append(write_one_shard(batch, target, compress))
    write_manifest(prefix, shards)
    return shards


def write_manifest(prefix: str | Path, shards: Sequence[Shard]) -> Path:
    prefix = Path(prefix)
    manifest = prefix.parent / f"{prefix.name}.manifest"
    tmp = manifest.with_name(manifest.name + PARTIAL_SUFFIX)
    with open(tmp, "w", encoding="utf-8") as f:
        for shard in shards:
            f.write(shard.to_json() + "\n")
    os.replace(tmp, manifest)
    return manifest


def read_manifest(prefix: str | Path) -> list[Shard]:
    prefix = Path(prefix)
    manifest = prefix.parent / f"{prefix.name}.manifest"
    if not manifest.exists():
        raise DataError(f"missing manifest {manifest}")
    with open(manifest, encoding="utf-8") as f:
        return [Shard.from_json(line) for line in f if line.strip()]


def read_shard(path: str | Path, expected: Shard | None = None) -> Iterator[Document]:
    """Read one shard file; verifies the checksum when an entry is given."""
    path = Path(path)
    if expected is not None:
        actual = file_checksum(path)
        if actual != expected.checksum:
            raise DataError(
                f"checksum mismatch for {path.name}: {actual} != {expected.checksum}"
            )
    opener = gzip.open if path.name.endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield Document.from_json(line)


def read_shards(prefix: str | Path, verify: bool = True) -> Iterator[Document]:
    """Read all shards listed in a manifest, in manifest order."""
    prefix = Path(prefix)
    for shard in read_manifest(prefix):
        yield from read_shard(prefix.parent / shard.path, shard if verify else None)
