"""Application facade: wires the store, catalog, builder, homework and
bundle components together and owns the runtime concerns the pure
modules stay out of - clocks, id generation, per-session serialization
and whole-store integrity scans.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Callable

from . import kinds, sessions
from .bundle import TransferBundler
from .catalog import Catalog
from .errors import SessionBusy
from .exercises import ExerciseBuilder
from .homework import HomeworkManager
from .media import MediaStore
from .sessions import ItemPresentation, Session, SessionResult
from .store import DocumentStore, utc_now_iso


class TherapyService:
    def __init__(self, root: Path | str, templates_path: Path | None = None,
                 fsync: bool = False, clock: Callable[[], str] = utc_now_iso):
        self.root = Path(root)
        self.clock = clock
        self.store = DocumentStore(self.root / "store", fsync=fsync, clock=clock)
        self.media = MediaStore(self.root / "media")
        self.catalog = Catalog(self.store, self.media)
        self.builder = ExerciseBuilder(self.store, self.catalog, templates_path)
        self.manager = HomeworkManager(self.store, self.builder)
        self.bundler = TransferBundler(self.store, self.catalog, self.builder,
                                       self.manager)
        self._locks_guard = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}

    # -- sessions ----------------------------------------------------------

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._session_locks.setdefault(session_id, threading.Lock())

    def _locked(self, session_id: str) -> threading.Lock:
        lock = self._session_lock(session_id)
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id} has another event in flight")
        return lock

    def _load_session(self, session_id: str) -> Session:
        return Session.from_doc(self.store.get(kinds.SESSION, session_id).payload)

    def _save_session(self, session: Session) -> None:
        expected = session.version
        session.version += 1
        self.store.put(kinds.SESSION, session.id, session.to_doc(),
                       expected_version=expected)

    def start_session(self, exercise_id: str, child_id: str,
                      started_at: str | None = None) -> Session:
        exercise = self.builder.get_exercise(exercise_id)
        self.manager.get_child(child_id)
        session = sessions.start_session(
            exercise, child_id, "s-" + uuid.uuid4().hex,
            started_at or self.clock(), self.builder.resolve)
        self.store.put(kinds.SESSION, session.id, session.to_doc(),
                       expected_version=0)
        return session

    def get_session(self, session_id: str) -> Session:
        return self._load_session(session_id)

    def present_next(self, session_id: str) -> tuple[Session, ItemPresentation]:
        session = self._load_session(session_id)
        exercise = self.builder.get_exercise(session.exercise_id)
        return session, sessions.present_next(session, exercise)

    def submit_answer(self, session_id: str, choice: int, elapsed_ms: int):
        lock = self._locked(session_id)
        try:
            session = self._load_session(session_id)
            outcome = sessions.submit_answer(session, choice, elapsed_ms)
            self._save_session(session)
            return session, outcome
        finally:
            lock.release()

    def expire_item(self, session_id: str):
        lock = self._locked(session_id)
        try:
            session = self._load_session(session_id)
            outcome = sessions.expire_item(session)
            self._save_session(session)
            return session, outcome
        finally:
            lock.release()

    def finalize_session(self, session_id: str,
                         finished_at: str | None = None) -> SessionResult:
        lock = self._locked(session_id)
        try:
            if self.store.exists(kinds.RESULT, session_id):
                return SessionResult.from_doc(
                    self.store.get(kinds.RESULT, session_id).payload)
            session = self._load_session(session_id)
            result = sessions.finalize_session(session,
                                               finished_at or self.clock())
            self.store.put(kinds.RESULT, result.id, result.to_doc(),
                           expected_version=0)
            self.manager.record_result(result)
            return result
        finally:
            lock.release()

    def list_results(self, child_id: str | None = None) -> list[SessionResult]:
        records = self.store.list(
            kinds.RESULT,
            where=None if child_id is None
            else (lambda p: p["child_ref"] == child_id))
        return [SessionResult.from_doc(r.payload) for r in records]

    # -- offline results ------------------------------------------------------

    def import_results(self, path: Path) -> list[SessionResult]:
        """Validate and store a results file returned from a child device."""
        results = self.bundler.import_results(path)
        for result in results:
            if not self.store.exists(kinds.RESULT, result.id):
                self.store.put(kinds.RESULT, result.id, result.to_doc(),
                               expected_version=0)
            self.manager.record_result(result)
        return results

    # -- integrity ------------------------------------------------------------

    def store_check(self) -> list[str]:
        """Full-store referential scan; returns human-readable problems."""
        problems: list[str] = []

        def check_asset(owner: str, field: str, asset_id: str | None,
                        want_kind: str | None = None) -> None:
            if asset_id is None:
                return
            if not self.store.exists(kinds.ASSET, asset_id):
                problems.append(f"{owner}: {field} references missing asset {asset_id}")
                return
            asset = self.store.get(kinds.ASSET, asset_id).payload
            if want_kind and asset["kind"] != want_kind:
                problems.append(f"{owner}: {field} must be {want_kind}, "
                                f"asset {asset_id} is {asset['kind']}")

        for record in self.store.list(kinds.ASSET):
            if not self.media.has(record.payload["content_hash"]):
                problems.append(
                    f"asset/{record.id}: blob {record.payload['content_hash']} "
                    f"missing from media root")

        for record in self.store.list(kinds.WORD):
            owner = f"word/{record.id}"
            check_asset(owner, "audio", record.payload["audio"], "audio")
            check_asset(owner, "syllabified_audio",
                        record.payload.get("syllabified_audio"), "audio")
            check_asset(owner, "image", record.payload.get("image"), "image")

        for record in self.store.list(kinds.PRODUCTION):
            check_asset(f"production/{record.id}", "audio",
                        record.payload["audio"], "audio")

        for record in self.store.list(kinds.EXERCISE):
            owner = f"exercise/{record.id}"
            check_asset(owner, "instruction_audio",
                        record.payload["instruction_audio"], "audio")
            for i, item in enumerate(record.payload["items"]):
                ref = item["ref"]
                ref_kind = kinds.WORD if ref["kind"] == "word" else kinds.PRODUCTION
                if not self.store.exists(ref_kind, ref["id"]):
                    problems.append(f"{owner}: item {i} references missing "
                                    f"{ref['kind']} {ref['id']}")

        for record in self.store.list(kinds.HOMEWORK):
            owner = f"homework/{record.id}"
            if not self.store.exists(kinds.CHILD, record.payload["child_ref"]):
                problems.append(f"{owner}: missing child "
                                f"{record.payload['child_ref']}")
            for exercise_id in record.payload["exercise_refs"]:
                if not self.store.exists(kinds.EXERCISE, exercise_id):
                    problems.append(f"{owner}: missing exercise {exercise_id}")

        for kind in (kinds.SESSION, kinds.RESULT):
            for record in self.store.list(kind):
                owner = f"{kind}/{record.id}"
                if not self.store.exists(kinds.EXERCISE,
                                         record.payload["exercise_ref"]):
                    problems.append(f"{owner}: missing exercise "
                                    f"{record.payload['exercise_ref']}")
                if not self.store.exists(kinds.CHILD, record.payload["child_ref"]):
                    problems.append(f"{owner}: missing child "
                                    f"{record.payload['child_ref']}")

        for record in self.store.list(kinds.HISTORY):
            if not self.store.exists(kinds.CHILD, record.payload["child_ref"]):
                problems.append(f"history/{record.id}: missing child "
                                f"{record.payload['child_ref']}")

        return problems
