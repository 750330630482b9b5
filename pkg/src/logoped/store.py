"""Durable entity store: one JSON document per (kind, id), version gated.

Writes go through a temp file and an atomic rename, so a reader (or a
process restart) only ever observes complete documents at the committed
version. A ``schema_version`` file at the root guards against opening a
store written by a newer release.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .errors import NotFound, StaleVersion, UnsupportedStoreSchema

SCHEMA_VERSION = 1


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, compact separators, UTF-8 text."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True)
class StoreRecord:
    entity_kind: str
    id: str
    version: int
    payload: dict
    updated_at: str


class DocumentStore:
    """Directory-backed store; safe for concurrent readers, writes are
    serialized per process and guarded by the version counter."""

    def __init__(self, root: Path, fsync: bool = False,
                 clock: Callable[[], str] = utc_now_iso):
        self.root = Path(root)
        self.fsync = fsync
        self._clock = clock
        self._lock = threading.Lock()
        self._cache: dict[tuple[str, str], tuple[int, int, StoreRecord]] = {}
        self.root.mkdir(parents=True, exist_ok=True)
        self._check_schema()

    def _check_schema(self) -> None:
        marker = self.root / "schema_version"
        if marker.exists():
            found = int(marker.read_text(encoding="utf-8").strip())
            if found > SCHEMA_VERSION:
                raise UnsupportedStoreSchema(
                    f"store schema {found} is newer than supported {SCHEMA_VERSION}")
        else:
            marker.write_text(f"{SCHEMA_VERSION}\n", encoding="utf-8")

    def _doc_path(self, kind: str, id: str) -> Path:
        return self.root / kind / f"{id}.json"

    def _write_atomic(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
            if self.fsync:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _load(self, kind: str, id: str, path: Path) -> StoreRecord | None:
        try:
            stat = path.stat()
        except FileNotFoundError:
            self._cache.pop((kind, id), None)
            return None
        key = (kind, id)
        cached = self._cache.get(key)
        if cached and cached[0] == stat.st_mtime_ns and cached[1] == stat.st_size:
            return cached[2]
        doc = json.loads(path.read_text(encoding="utf-8"))
        record = StoreRecord(
            entity_kind=doc["entity_kind"],
            id=doc["id"],
            version=doc["version"],
            payload=doc["payload"],
            updated_at=doc["updated_at"],
        )
        self._cache[key] = (stat.st_mtime_ns, stat.st_size, record)
        return record

    # -- operations -------------------------------------------------------

    def put(self, kind: str, id: str, payload: dict, expected_version: int) -> int:
        """Create (expected_version=0) or update; returns the new version."""
        with self._lock:
            path = self._doc_path(kind, id)
            current = self._load(kind, id, path)
            current_version = current.version if current else 0
            if current_version != expected_version:
                raise StaleVersion(
                    f"{kind}/{id}: expected version {expected_version}, "
                    f"stored is {current_version}",
                    kind=kind, id=id, stored_version=current_version)
            new_version = expected_version + 1
            record = {
                "entity_kind": kind,
                "id": id,
                "version": new_version,
                "payload": payload,
                "updated_at": self._clock(),
            }
            self._write_atomic(path, canonical_json(record))
            return new_version

    def get(self, kind: str, id: str) -> StoreRecord:
        record = self._load(kind, id, self._doc_path(kind, id))
        if record is None:
            raise NotFound(f"{kind}/{id} not found", kind=kind, id=id)
        return record

    def exists(self, kind: str, id: str) -> bool:
        return self._doc_path(kind, id).exists()

    def list(self, kind: str,
             where: Callable[[dict], bool] | None = None) -> list[StoreRecord]:
        """All records of ``kind``, id ascending; optional payload filter."""
        kind_dir = self.root / kind
        if not kind_dir.is_dir():
            return []
        records = []
        for name in sorted(os.listdir(kind_dir)):
            if not name.endswith(".json"):
                continue
            record = self._load(kind, name[:-5], kind_dir / name)
            if record is not None and (where is None or where(record.payload)):
                records.append(record)
        return records

    def ids(self, kind: str) -> list[str]:
        kind_dir = self.root / kind
        if not kind_dir.is_dir():
            return []
        return sorted(n[:-5] for n in os.listdir(kind_dir) if n.endswith(".json"))

    def delete(self, kind: str, id: str) -> None:
        with self._lock:
            path = self._doc_path(kind, id)
            if not path.exists():
                raise NotFound(f"{kind}/{id} not found", kind=kind, id=id)
            path.unlink()
            self._cache.pop((kind, id), None)

    def kinds(self) -> Iterable[str]:
        for entry in sorted(os.listdir(self.root)):
            if (self.root / entry).is_dir():
                yield entry
