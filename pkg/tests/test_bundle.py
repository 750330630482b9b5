import json
import zipfile
from fractions import Fraction
from pathlib import Path

import pytest

from logoped.catalog import Gender, ProductionKind
from logoped.errors import (
    AccuracyMismatch,
    CorruptArchive,
    HashMismatch,
    MissingMedia,
    NotFound,
    UnknownExercise,
    UnsupportedVersion,
)
from logoped.exercises import ExerciseItem, ExerciseType, ItemRef, Variant
from logoped.media import content_hash
from logoped.service import TherapyService
from logoped.sessions import ItemOutcome, Phase, Result, SessionResult
from logoped.text import SoundTag

from conftest import PNG_BYTES, add_word, wav_bytes

T = "2026-08-01T10:00:00+00:00"


@pytest.fixture
def world(svc):
    audio = svc.catalog.register_media(wav_bytes(), "audio", "voice.wav")
    image = svc.catalog.register_media(PNG_BYTES, "image", "pict.png")
    slow = svc.catalog.register_media(wav_bytes(seconds=2.5), "audio", "slow.wav")
    rac = add_word(svc, "rac", "ra", audio.id, gender=Gender.MASCULINE,
                   image=image.id)
    rama = add_word(svc, "ramă", "ra", audio.id, gender=Gender.FEMININE,
                    image=image.id)
    lac = add_word(svc, "lac", "la", audio.id, syllabified_audio=slow.id)
    pair = svc.catalog.create_production(
        ProductionKind.PARONYM_PAIR, ["rac", "lac"], "rac – lac",
        SoundTag.of("R"), audio.id)
    intruder = svc.builder.create_exercise(
        type=ExerciseType.INTRUDER_RECOGNITION, target_sound=SoundTag.of("R"),
        difficulty=3, instruction_text="Găsește intrusul!",
        instruction_audio=audio.id, variant=Variant.NONE,
        items=[ExerciseItem(ItemRef("word", rac.id), 5, True),
               ExerciseItem(ItemRef("word", rama.id), 5, True),
               ExerciseItem(ItemRef("word", lac.id), 5, False)])
    pennants = svc.builder.create_exercise(
        type=ExerciseType.PAIR_DISCRIMINATION, target_sound=SoundTag.of("R"),
        difficulty=2, instruction_text="Alege stegulețul!",
        instruction_audio=audio.id, variant=Variant.PENNANTS,
        items=[ExerciseItem(ItemRef("production", pair.id), 4, True)])
    child, _ = svc.manager.create_child(
        "Ana", 2021, {SoundTag.of("R")}, current_year=2026)
    homework = svc.manager.assign_homework(
        child.id, [intruder.id, pennants.id], assigned_at=T)
    return {"audio": audio, "homework": homework, "child": child,
            "intruder": intruder, "pennants": pennants}


def test_export_lists_each_blob_once(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    with zipfile.ZipFile(path) as archive:
        manifest = json.loads(archive.read("manifest.json"))
        names = archive.namelist()
    hashes = [m["content_hash"] for m in manifest["media"]]
    assert len(hashes) == len(set(hashes))
    assert len(hashes) == 3  # voice.wav, slow.wav, pict.png
    for entry in manifest["media"]:
        assert entry["archive_path"] == "media/" + entry["content_hash"]
        assert entry["archive_path"] in names


def test_export_missing_homework(svc, tmp_path):
    with pytest.raises(NotFound):
        svc.bundler.export_bundle("hw-missing", tmp_path / "b.zip")


def test_export_with_deleted_blob_reports_missing_media(svc, world, tmp_path):
    blob = svc.media.blob_path(world["audio"].content_hash)
    blob.unlink()
    with pytest.raises(MissingMedia) as excinfo:
        svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    assert world["audio"].content_hash in excinfo.value.hashes


def test_export_twice_identical_bytes(svc, world, tmp_path):
    first = svc.bundler.export_bundle(world["homework"].id, tmp_path / "a.zip")
    second = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    assert first.read_bytes() == second.read_bytes()


def test_round_trip_into_fresh_store(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    other = TherapyService(tmp_path / "other")
    imported = other.bundler.import_bundle(path)
    assert imported == world["homework"]
    for exercise_id in imported.exercise_refs:
        original = svc.builder.get_exercise(exercise_id)
        assert other.builder.get_exercise(exercise_id) == original
    # media staged and store consistent
    assert other.store_check() == []


def test_import_into_same_store_is_idempotent(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    imported = svc.bundler.import_bundle(path)
    assert imported == world["homework"]


def test_flipped_media_byte_detected(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    with zipfile.ZipFile(path) as archive:
        manifest = json.loads(archive.read("manifest.json"))
        blobs = {n: archive.read(n) for n in archive.namelist()}
    target = manifest["media"][0]["archive_path"]
    data = bytearray(blobs[target])
    data[len(data) // 2] ^= 0xFF
    blobs[target] = bytes(data)
    tampered = tmp_path / "tampered.zip"
    with zipfile.ZipFile(tampered, "w") as archive:
        for name, payload in blobs.items():
            archive.writestr(name, payload)

    other = TherapyService(tmp_path / "other")
    with pytest.raises(HashMismatch):
        other.bundler.import_bundle(tampered)
    # nothing imported at all
    assert other.catalog.list_words() == []
    assert other.builder.list_exercises() == []


def test_unsupported_format_version(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    with zipfile.ZipFile(path) as archive:
        manifest = json.loads(archive.read("manifest.json"))
        blobs = {n: archive.read(n) for n in archive.namelist()
                 if n != "manifest.json"}
    manifest["format_version"] = 999
    rewritten = tmp_path / "v999.zip"
    with zipfile.ZipFile(rewritten, "w") as archive:
        archive.writestr("manifest.json", json.dumps(manifest))
        for name, payload in blobs.items():
            archive.writestr(name, payload)
    with pytest.raises(UnsupportedVersion):
        svc.bundler.import_bundle(rewritten)


def test_not_a_zip_is_corrupt(svc, tmp_path):
    bad = tmp_path / "bad.zip"
    bad.write_bytes(b"this is not a zip")
    with pytest.raises(CorruptArchive):
        svc.bundler.import_bundle(bad)


def test_missing_manifest_is_corrupt(svc, tmp_path):
    bad = tmp_path / "empty.zip"
    with zipfile.ZipFile(bad, "w") as archive:
        archive.writestr("something.txt", "hi")
    with pytest.raises(CorruptArchive):
        svc.bundler.import_bundle(bad)


# -- results files -----------------------------------------------------------


def run_session(svc, world):
    session = svc.start_session(world["intruder"].id, world["child"].id,
                                started_at=T)
    svc.submit_answer(session.id, 2, 100)
    svc.submit_answer(session.id, 1, 200)  # wrong: ramă is not the intruder
    svc.submit_answer(session.id, 1, 300)
    svc.submit_answer(session.id, 2, 50)   # retry of item 1
    return svc.finalize_session(session.id, finished_at=T)


def test_results_round_trip(svc, world, tmp_path):
    result = run_session(svc, world)
    path = tmp_path / "results.json"
    svc.bundler.export_results([result], path)
    loaded = svc.bundler.import_results(path)
    assert loaded == [result]


def test_results_tampered_accuracy_rejected(svc, world, tmp_path):
    result = run_session(svc, world)
    path = tmp_path / "results.json"
    svc.bundler.export_results([result], path)
    payload = json.loads(path.read_text())
    payload["results"][0]["accuracy"] = "1"
    path.write_text(json.dumps(payload))
    with pytest.raises(AccuracyMismatch):
        svc.bundler.import_results(path)


def test_results_unknown_exercise(svc, world, tmp_path):
    result = run_session(svc, world)
    doc = result.to_doc()
    doc["exercise_ref"] = "e-nowhere"
    path = tmp_path / "results.json"
    path.write_text(json.dumps({"format_version": 1, "results": [doc]}))
    with pytest.raises(UnknownExercise):
        svc.bundler.import_results(path)


def test_results_import_records_history_once(svc, world, tmp_path):
    result = run_session(svc, world)
    path = tmp_path / "results.json"
    svc.bundler.export_results([result], path)
    before = len(svc.manager.history_entries(world["child"].id))
    svc.import_results(path)
    svc.import_results(path)
    after = len(svc.manager.history_entries(world["child"].id))
    assert after == before  # finalize already recorded this session


def test_results_bad_version(svc, tmp_path):
    path = tmp_path / "results.json"
    path.write_text(json.dumps({"format_version": 7, "results": []}))
    with pytest.raises(UnsupportedVersion):
        svc.bundler.import_results(path)


def test_media_hash_verified_on_import(svc, world, tmp_path):
    path = svc.bundler.export_bundle(world["homework"].id, tmp_path / "b.zip")
    other = TherapyService(tmp_path / "other")
    other.bundler.import_bundle(path)
    with zipfile.ZipFile(path) as archive:
        manifest = json.loads(archive.read("manifest.json"))
    for entry in manifest["media"]:
        assert content_hash(other.media.get(entry["content_hash"])) \
            == entry["content_hash"]
