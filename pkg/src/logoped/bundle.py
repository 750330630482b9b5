"""Offline transfer bundles.

A bundle is a single ZIP holding ``manifest.json`` plus every referenced
media blob under ``media/<hash>``. Exercises, their catalog entries and
the child profile are embedded by value so the importing device needs no
prior catalog. Asset ids are derived from content hashes, which is what
lets embedded documents survive the move between stores unchanged.

Import is all-or-nothing: every blob is re-hashed against the manifest
before anything is written, and results coming back from a child device
are re-scored before they are accepted.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

from . import kinds
from .catalog import Catalog, VocalProduction, WordEntry
from .errors import (
    AccuracyMismatch,
    CorruptArchive,
    HashMismatch,
    ImportConflict,
    MissingMedia,
    NotFound,
    UnknownExercise,
    UnsupportedVersion,
)
from .exercises import Exercise, ExerciseBuilder
from .homework import Homework, HomeworkManager
from .media import MediaKind, content_hash
from .sessions import SessionResult, compute_accuracy
from .store import DocumentStore, canonical_json

BUNDLE_FORMAT_VERSION = 1
RESULTS_FORMAT_VERSION = 1

# fixed entry timestamp so identical inputs produce identical archives
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class TransferBundler:
    def __init__(self, store: DocumentStore, catalog: Catalog,
                 builder: ExerciseBuilder, manager: HomeworkManager):
        self.store = store
        self.catalog = catalog
        self.builder = builder
        self.manager = manager

    # -- export ----------------------------------------------------------

    def _collect(self, homework: Homework):
        """Embedded docs plus the deduplicated media map for one homework."""
        exercises: list[Exercise] = []
        words: dict[str, WordEntry] = {}
        productions: dict[str, VocalProduction] = {}
        asset_ids: set[str] = set()
        seen: set[str] = set()
        for exercise_id in homework.exercise_refs:
            if exercise_id in seen:
                continue
            seen.add(exercise_id)
            exercise = self.builder.get_exercise(exercise_id)
            exercises.append(exercise)
            asset_ids.add(exercise.instruction_audio)
            for item in exercise.items:
                if item.ref.kind == "word":
                    word = self.catalog.get_word(item.ref.id)
                    words[word.id] = word
                    asset_ids.add(word.audio)
                    if word.syllabified_audio:
                        asset_ids.add(word.syllabified_audio)
                    if word.image:
                        asset_ids.add(word.image)
                else:
                    production = self.catalog.get_production(item.ref.id)
                    productions[production.id] = production
                    asset_ids.add(production.audio)
        assets = [self.catalog.get_asset(a) for a in sorted(asset_ids)]
        return exercises, words, productions, assets

    def build_manifest(self, homework: Homework) -> dict:
        child = self.manager.get_child(homework.child_id)
        exercises, words, productions, assets = self._collect(homework)
        return {
            "format_version": BUNDLE_FORMAT_VERSION,
            "homework_id": homework.id,
            "child_id": homework.child_id,
            "created_at": homework.assigned_at,
            "homework": homework.to_doc(),
            "child": child.to_doc(),
            "exercises": [e.to_doc() for e in exercises],
            "words": [words[k].to_doc() for k in sorted(words)],
            "productions": [productions[k].to_doc() for k in sorted(productions)],
            "media": [
                {
                    "content_hash": a.content_hash,
                    "kind": a.kind.value,
                    "byte_size": a.byte_size,
                    "archive_path": "media/" + a.content_hash,
                    "original_filename": a.original_filename,
                }
                for a in sorted(assets, key=lambda a: a.content_hash)
            ],
        }

    def export_bundle(self, homework_id: str, output_path: Path) -> Path:
        homework = self.manager.get_homework(homework_id)
        manifest = self.build_manifest(homework)
        missing = [m["content_hash"] for m in manifest["media"]
                   if not self.catalog.media.has(m["content_hash"])]
        if missing:
            raise MissingMedia(f"{len(missing)} media blob(s) absent on disk", missing)

        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(output_path, "w", zipfile.ZIP_DEFLATED) as archive:
            info = zipfile.ZipInfo("manifest.json", date_time=_ZIP_EPOCH)
            archive.writestr(info, canonical_json(manifest))
            for entry in manifest["media"]:
                info = zipfile.ZipInfo(entry["archive_path"], date_time=_ZIP_EPOCH)
                archive.writestr(info, self.catalog.media.get(entry["content_hash"]))
        return output_path

    # -- import ----------------------------------------------------------

    def _read_archive(self, path: Path) -> tuple[dict, dict[str, bytes]]:
        try:
            with zipfile.ZipFile(path) as archive:
                names = set(archive.namelist())
                if "manifest.json" not in names:
                    raise CorruptArchive("bundle has no manifest.json")
                manifest = json.loads(archive.read("manifest.json"))
                blobs: dict[str, bytes] = {}
                for entry in manifest.get("media", []):
                    arc_path = entry.get("archive_path", "")
                    if arc_path not in names:
                        raise CorruptArchive(f"missing archive member {arc_path}")
                    blobs[entry["content_hash"]] = archive.read(arc_path)
        except zipfile.BadZipFile as exc:
            raise CorruptArchive(f"not a readable ZIP archive: {exc}")
        except json.JSONDecodeError as exc:
            raise CorruptArchive(f"manifest is not valid JSON: {exc}")
        return manifest, blobs

    def _verify_manifest(self, manifest: dict, blobs: dict[str, bytes]) -> None:
        if manifest.get("format_version") != BUNDLE_FORMAT_VERSION:
            raise UnsupportedVersion(
                f"bundle format {manifest.get('format_version')} is not supported")
        for entry in manifest["media"]:
            expected = entry["content_hash"]
            data = blobs[expected]
            if entry["archive_path"] != "media/" + expected:
                raise CorruptArchive(
                    f"archive path {entry['archive_path']} does not follow "
                    f"the media/<hash> layout")
            if content_hash(data) != expected:
                raise HashMismatch(
                    f"media entry {entry['archive_path']} does not hash to "
                    f"its manifest digest")
            if len(data) != entry["byte_size"]:
                raise CorruptArchive(
                    f"media entry {entry['archive_path']} size disagrees "
                    f"with manifest")
        # every asset referenced by embedded docs must resolve to a blob
        listed = {e["content_hash"][:16] for e in manifest["media"]}
        referenced: set[str] = set()
        for doc in manifest["exercises"]:
            referenced.add(doc["instruction_audio"])
        for doc in manifest["words"]:
            referenced.add(doc["audio"])
            if doc.get("syllabified_audio"):
                referenced.add(doc["syllabified_audio"])
            if doc.get("image"):
                referenced.add(doc["image"])
        for doc in manifest["productions"]:
            referenced.add(doc["audio"])
        unresolved = {r for r in referenced if r[2:] not in listed}
        if unresolved:
            raise CorruptArchive(
                f"embedded documents reference media missing from the "
                f"manifest: {sorted(unresolved)}")

    def _stage_doc(self, kind: str, id: str, doc: dict) -> None:
        """Insert under the original id; identical existing docs are kept."""
        if self.store.exists(kind, id):
            if self.store.get(kind, id).payload == doc:
                return
            raise ImportConflict(
                f"{kind}/{id} already exists with different content")
        self.store.put(kind, id, doc, expected_version=0)

    def import_bundle(self, path: Path) -> Homework:
        manifest, blobs = self._read_archive(Path(path))
        self._verify_manifest(manifest, blobs)

        for entry in manifest["media"]:
            self.catalog.register_media(
                blobs[entry["content_hash"]], MediaKind(entry["kind"]),
                entry.get("original_filename", ""))
        self._stage_doc(kinds.CHILD, manifest["child"]["id"], manifest["child"])
        for doc in manifest["words"]:
            self._stage_doc(kinds.WORD, doc["id"], doc)
        for doc in manifest["productions"]:
            self._stage_doc(kinds.PRODUCTION, doc["id"], doc)
        for doc in manifest["exercises"]:
            self._stage_doc(kinds.EXERCISE, doc["id"], doc)
        homework_doc = manifest["homework"]
        self._stage_doc(kinds.HOMEWORK, homework_doc["id"], homework_doc)
        return Homework.from_doc(homework_doc)

    # -- results ----------------------------------------------------------

    def export_results(self, results: list[SessionResult], path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "format_version": RESULTS_FORMAT_VERSION,
            "results": [r.to_doc() for r in results],
        }
        path.write_text(canonical_json(payload), encoding="utf-8")
        return path

    def import_results(self, path: Path) -> list[SessionResult]:
        """Parse and re-score a results file; stored accuracy must agree
        with a recomputation over the outcome log."""
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptArchive(f"unreadable results file: {exc}")
        if payload.get("format_version") != RESULTS_FORMAT_VERSION:
            raise UnsupportedVersion(
                f"results format {payload.get('format_version')} is not supported")
        results = []
        for doc in payload["results"]:
            try:
                result = SessionResult.from_doc(doc)
            except (KeyError, ValueError) as exc:
                raise CorruptArchive(f"malformed result entry: {exc}")
            try:
                exercise = self.builder.get_exercise(result.exercise_id)
            except NotFound:
                raise UnknownExercise(
                    f"result {result.id} references unknown exercise "
                    f"{result.exercise_id}")
            recomputed = compute_accuracy(result.outcomes, len(exercise.items))
            if recomputed != result.accuracy:
                raise AccuracyMismatch(
                    f"result {result.id} claims accuracy {result.accuracy} "
                    f"but the outcome log recomputes to {recomputed}")
            results.append(result)
        return results
