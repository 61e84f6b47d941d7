"""Content-addressed storage: objects live under the hex SHA-256 of their bytes.

Two interchangeable backends: an in-memory dict for tests and simulations,
and a directory of files for CLI runs.  Both verify the digest on every read,
so silent corruption surfaces as an integrity failure rather than bad data.
"""

from __future__ import annotations

import hashlib
import os
import re
from pathlib import Path

from .errors import IntegrityError, MalformedError, NotFoundError

_RLOC_RE = re.compile(r"\A[0-9a-f]{64}\Z")


def compute_rloc(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def validate_rloc(rloc) -> str:
    if not isinstance(rloc, str) or not _RLOC_RE.match(rloc):
        raise MalformedError(f"invalid resource locator {rloc!r}")
    return rloc


class MemoryStore:
    """Dict-backed store; the canonical reference behavior."""

    def __init__(self):
        self._objects = {}

    def put(self, data: bytes) -> str:
        if not isinstance(data, (bytes, bytearray)) or len(data) == 0:
            raise MalformedError("refusing to store empty or non-byte content")
        data = bytes(data)
        rloc = compute_rloc(data)
        existing = self._objects.get(rloc)
        if existing is not None and existing != data:
            raise IntegrityError(f"digest collision at {rloc}")
        self._objects[rloc] = data
        return rloc

    def get(self, rloc: str) -> bytes:
        rloc = validate_rloc(rloc)
        data = self._objects.get(rloc)
        if data is None:
            raise NotFoundError(f"no object stored at {rloc}")
        if compute_rloc(data) != rloc:
            raise IntegrityError(f"object at {rloc} fails its digest check")
        return data

    def has(self, rloc: str) -> bool:
        return validate_rloc(rloc) in self._objects

    def rlocs(self):
        return sorted(self._objects)

    # test hook: flip stored bytes to simulate corruption
    def corrupt(self, rloc: str, data: bytes):
        self._objects[validate_rloc(rloc)] = bytes(data)


class DirectoryStore:
    """One file per object, named by its rloc."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    def _file(self, rloc: str) -> Path:
        return self.path / rloc

    def put(self, data: bytes) -> str:
        if not isinstance(data, (bytes, bytearray)) or len(data) == 0:
            raise MalformedError("refusing to store empty or non-byte content")
        data = bytes(data)
        rloc = compute_rloc(data)
        target = self._file(rloc)
        if target.exists():
            if compute_rloc(target.read_bytes()) != rloc:
                raise IntegrityError(f"existing object at {rloc} fails its digest check")
            return rloc
        tmp = target.with_name(rloc + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)
        return rloc

    def get(self, rloc: str) -> bytes:
        rloc = validate_rloc(rloc)
        target = self._file(rloc)
        if not target.exists():
            raise NotFoundError(f"no object stored at {rloc}")
        data = target.read_bytes()
        if compute_rloc(data) != rloc:
            raise IntegrityError(f"object at {rloc} fails its digest check")
        return data

    def has(self, rloc: str) -> bool:
        return self._file(validate_rloc(rloc)).exists()

    def rlocs(self):
        return sorted(p.name for p in self.path.iterdir() if _RLOC_RE.match(p.name))

    # test hook: flip stored bytes to simulate corruption
    def corrupt(self, rloc: str, data: bytes):
        self._file(validate_rloc(rloc)).write_bytes(bytes(data))
