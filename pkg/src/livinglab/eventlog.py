"""Append-only event log.

On disk the log is a flat file of frames: a 4-byte big-endian payload length
followed by the payload (compact, key-sorted UTF-8 JSON). Frames are never
rewritten. A truncated trailing frame (crash during append) is ignored on
replay and overwritten by the next append.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import threading
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)

_HEADER = struct.Struct(">I")


def encode_frame(record: dict) -> bytes:
    payload = json.dumps(record, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(len(payload)) + payload


def iter_frames(data: bytes) -> Iterator[tuple[int, dict]]:
    """Yield ``(end_offset, record)`` for every complete frame in ``data``."""
    pos = 0
    while pos + _HEADER.size <= len(data):
        (n,) = _HEADER.unpack_from(data, pos)
        end = pos + _HEADER.size + n
        if end > len(data):
            break
        yield end, json.loads(data[pos + _HEADER.size : end].decode("utf-8"))
        pos = end


def read_log(path: str | os.PathLike) -> list[dict]:
    return [rec for _, rec in iter_frames(Path(path).read_bytes())]


class EventLog:
    """Single-writer append-only log; in memory only when ``path`` is None.

    Concurrent producers are serialized by an internal lock, so ``append``
    is safe from any request-handler thread.
    """

    def __init__(self, path: str | os.PathLike | None = None, fsync: bool = False):
        self.path = Path(path) if path is not None else None
        self.fsync = fsync
        self._records: list[dict] = []
        self._lock = threading.Lock()
        self._fh = None
        if self.path is not None:
            self._open()

    def _open(self) -> None:
        good_end = 0
        if self.path.exists():
            data = self.path.read_bytes()
            for good_end, rec in iter_frames(data):
                self._records.append(rec)
            if good_end != len(data):
                logger.warning("discarding %d trailing bytes in %s", len(data) - good_end, self.path)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "r+b" if self.path.exists() else "w+b")
        self._fh.truncate(good_end)
        self._fh.seek(good_end)

    def append(self, record: dict) -> int:
        """Append one record; returns its 0-based offset."""
        frame = encode_frame(record)
        with self._lock:
            if self._fh is not None:
                self._fh.write(frame)
                self._fh.flush()
                if self.fsync:
                    os.fsync(self._fh.fileno())
            self._records.append(record)
            return len(self._records) - 1

    def __len__(self) -> int:
        return len(self._records)

    def read(self, start: int = 0, stop: int | None = None) -> list[dict]:
        with self._lock:
            return list(self._records[start:stop])

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
