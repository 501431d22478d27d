"""Streaming WARC/1.0 reader.

Reads records one at a time so peak memory is bounded by the largest single
record, never the file size. Plain files and per-record gzip members are both
handled (Python's gzip layer is transparent across concatenated members);
other compression formats are rejected.
"""
from __future__ import annotations

import gzip
import io
from calendar import timegm
from dataclasses import dataclass, field
from time import strptime
from typing import BinaryIO, Iterator, Optional

from .errors import DataError

RECORD_TYPES = ("response", "request", "metadata", "other")

_GZIP_MAGIC = b"\x1f\x8b"
_OTHER_MAGICS = (
    (b"BZh", "bzip2"),
    (b"\x28\xb5\x2f\xfd", "zstd"),
    (b"\xfd7zXZ\x00", "xz"),
)
_VERSION_LINE = b"WARC/1.0"
_RESYNC_CHUNK = 1 << 16


@dataclass
class WarcRecord:
    record_type: str
    target_uri: str
    date: int  # epoch seconds, 0 if absent/unparsable
    content_type: str
    payload: bytes
    headers: dict = field(default_factory=dict)


def parse_warc_date(value: str) -> int:
    """WARC-Date (ISO 8601, UTC 'Z' suffix) to epoch seconds; 0 on failure."""
    value = value.strip()
    for fmt in ("%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%M:%S.%fZ"):
        try:
            return timegm(strptime(value, fmt))
        except ValueError:
            continue
    return 0


def split_http_response(payload: bytes) -> tuple[dict, bytes]:
    """Split an HTTP response payload into (lowercased header map, body)."""
    if not payload.startswith(b"HTTP/"):
        return {}, payload
    head, sep, body = payload.partition(b"\r\n\r\n")
    if not sep:
        head, sep, body = payload.partition(b"\n\n")
        if not sep:
            return {}, payload
    headers: dict = {}
    for line in head.split(b"\n")[1:]:
        name, colon, value = line.partition(b":")
        if colon:
            headers[name.strip().lower().decode("latin-1")] = value.strip().decode(
                "latin-1", "replace"
            )
    return headers, body


class _Buffered:
    """Minimal buffered reader with pushback, over any binary stream."""

    def __init__(self, stream: BinaryIO):
        self._stream = stream
        self._buf = b""

    def push_back(self, data: bytes) -> None:
        self._buf = data + self._buf

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            chunk = self._stream.read(n - len(self._buf))
            if not chunk:
                break
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def read_line(self, limit: int = 1 << 20) -> bytes:
        """Read up to and including b"\\n"; returns b"" at EOF."""
        while b"\n" not in self._buf and len(self._buf) < limit:
            chunk = self._stream.read(4096)
            if not chunk:
                break
            self._buf += chunk
        idx = self._buf.find(b"\n")
        cut = len(self._buf) if idx < 0 else idx + 1
        out, self._buf = self._buf[:cut], self._buf[cut:]
        return out


class WarcReader:
    """Iterator over WarcRecord with malformed/truncated accounting.

    Malformed records are skipped (the reader re-synchronizes on the next
    "WARC/1.0" magic) and counted in .malformed; a truncated final record
    yields nothing and sets .truncated.
    """

    def __init__(self, stream: BinaryIO):
        self.malformed = 0
        self.truncated = 0
        raw = _Buffered(stream)
        head = raw.read(8)
        raw.push_back(head)
        if head.startswith(_GZIP_MAGIC):
            self._in = _Buffered(gzip.GzipFile(fileobj=_RawAdapter(raw)))
        else:
            for magic, name in _OTHER_MAGICS:
                if head.startswith(magic):
                    raise DataError(
                        f"unsupported compression ({name}); only plain or gzip WARC is read"
                    )
            self._in = raw

    def __iter__(self) -> Iterator[WarcRecord]:
        while True:
            record = self._next_record()
            if record is None:
                return
            yield record

    def _next_record(self) -> Optional[WarcRecord]:
        while True:
            line = self._in.read_line()
            if not line:
                return None
            if not line.strip():
                continue  # inter-record padding
            if line.rstrip(b"\r\n") != _VERSION_LINE:
                self.malformed += 1
                if not self._resync():
                    return None
                continue
            record = self._read_record_body()
            if record is not None:
                return record
            if self.truncated:
                return None

    def _read_record_body(self) -> Optional[WarcRecord]:
        headers: dict = {}
        while True:
            line = self._in.read_line()
            if not line:
                self.truncated += 1
                return None
            if not line.strip():
                break
            name, colon, value = line.partition(b":")
            if not colon:
                self.malformed += 1
                self._resync()
                return None
            headers[name.strip().lower().decode("latin-1")] = value.strip().decode(
                "latin-1", "replace"
            )
        try:
            length = int(headers["content-length"])
            if length < 0:
                raise ValueError
        except (KeyError, ValueError):
            self.malformed += 1
            self._resync()
            return None
        payload = self._in.read(length)
        if len(payload) < length:
            self.truncated += 1
            return None
        trailer = self._in.read(4)
        if trailer != b"\r\n\r\n":
            # declared length did not land on a record boundary
            self._in.push_back(trailer)
            self._in.push_back(payload)
            self.malformed += 1
            self._resync()
            return None
        rtype = headers.get("warc-type", "").lower()
        if rtype not in RECORD_TYPES:
            rtype = "other"
        return WarcRecord(
            record_type=rtype,
            target_uri=headers.get("warc-target-uri", ""),
            date=parse_warc_date(headers.get("warc-date", "")),
            content_type=headers.get("content-type", ""),
            payload=payload,
            headers=headers,
        )

    def _resync(self) -> bool:
        """Scan forward to the next record magic; False if EOF reached."""
        window = b""
        while True:
            chunk = self._in.read(_RESYNC_CHUNK)
            if not chunk:
                return False
            window += chunk
            idx = window.find(_VERSION_LINE)
            if idx >= 0:
                self._in.push_back(window[idx:])
                return True
            # keep a tail in case the magic straddles a chunk boundary
            window = window[-(len(_VERSION_LINE) - 1):]


class _RawAdapter(io.RawIOBase):
    """Adapt _Buffered to the raw interface gzip.GzipFile expects."""

    def __init__(self, buffered: _Buffered):
        self._buffered = buffered

    def readable(self) -> bool:
        return True

    def readinto(self, b) -> int:
        data = self._buffered.read(len(b))
        b[: len(data)] = data
        return len(data)


def read_warc(stream: BinaryIO) -> WarcReader:
    """Open a WARC/1.0 stream (plain or gzip) for record iteration."""
    return WarcReader(stream)
