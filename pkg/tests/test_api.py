import io
import json
import zipfile

import pytest
from fastapi.testclient import TestClient

from logoped.api import create_app
from logoped.catalog import Gender
from logoped.exercises import ExerciseItem, ExerciseType, ItemRef, Variant
from logoped.text import SoundTag

from conftest import PNG_BYTES, add_word, wav_bytes


@pytest.fixture
def client(svc):
    return TestClient(create_app(svc))


@pytest.fixture
def seeded(svc):
    audio = svc.catalog.register_media(wav_bytes(), "audio", "voice.wav")
    words = {
        "soare": add_word(svc, "soare", "soa", audio.id, gender=Gender.NEUTER),
        "casă": add_word(svc, "casă", "ca", audio.id, gender=Gender.FEMININE),
        "vas": add_word(svc, "vas", "va", audio.id),
        "lac": add_word(svc, "lac", "la", audio.id),
    }
    child, _ = svc.manager.create_child(
        "Ana", 2021, {SoundTag.of("S")}, current_year=2026)
    exercise = svc.builder.create_exercise(
        type=ExerciseType.SOUND_RECOGNITION, target_sound=SoundTag.of("S"),
        difficulty=2, instruction_text="Ascultă!", instruction_audio=audio.id,
        variant=Variant.NONE,
        items=[ExerciseItem(ItemRef("word", words["soare"].id), 5, True),
               ExerciseItem(ItemRef("word", words["lac"].id), 5, False)])
    return {"audio": audio, "words": words, "child": child, "exercise": exercise}


def test_version_header_on_every_response(client):
    assert client.get("/api/health").headers["X-Api-Version"] == "1"
    assert client.get("/api/words/nope").headers["X-Api-Version"] == "1"


def test_search_words_matches_engine(client, svc, seeded):
    response = client.get("/api/words", params={"query": "soa"})
    assert response.status_code == 200
    engine_docs = [w.to_doc() for w in svc.catalog.search_words(query="soa")]
    assert response.json() == engine_docs
    assert [w["text"] for w in response.json()] == ["soare"]


def test_search_by_sound_contract(client, seeded):
    response = client.get("/api/words", params={"sound": "S"})
    assert [w["text"] for w in response.json()] == ["casă", "soare", "vas"]


def test_create_word_endpoint(client, seeded):
    response = client.post("/api/words", json={
        "text": "mare", "first_syllable": "ma", "part_of_speech": "noun",
        "gender": "feminine", "articulated": False,
        "audio": seeded["audio"].id})
    assert response.status_code == 201
    body = response.json()
    assert body["text"] == "mare"
    assert "M" in body["sounds"]
    assert body["version"] == 1


def test_create_word_validation_error_code(client, seeded):
    response = client.post("/api/words", json={
        "text": "vas", "first_syllable": "so", "audio": seeded["audio"].id})
    assert response.status_code == 422
    assert response.json()["code"] == "FirstSyllableNotPrefix"


def test_update_word_stale_version_409(client, svc, seeded):
    word = seeded["words"]["vas"]
    ok = client.put(f"/api/words/{word.id}", json={
        "expected_version": 1, "fields": {"first_syllable": "v"}})
    assert ok.status_code == 200
    stale = client.put(f"/api/words/{word.id}", json={
        "expected_version": 1, "fields": {"first_syllable": "va"}})
    assert stale.status_code == 409
    assert stale.json()["code"] == "StaleVersion"


def test_delete_word_referenced_conflict(client, seeded):
    word = seeded["words"]["soare"]
    response = client.delete(f"/api/words/{word.id}")
    assert response.status_code == 409
    assert response.json()["code"] == "ReferencedByExercise"
    assert response.json()["details"]["exercise_ids"] == [seeded["exercise"].id]


def test_exercise_difficulty_six_is_422_with_code(client, seeded):
    word = seeded["words"]["soare"]
    response = client.post("/api/exercises", json={
        "type": "sound_recognition", "target_sound": "S", "difficulty": 6,
        "instruction_text": "Ascultă!", "instruction_audio": seeded["audio"].id,
        "variant": "none",
        "items": [{"ref_kind": "word", "ref_id": word.id,
                   "response_window_s": 5, "contains_target": True}]})
    assert response.status_code == 422
    body = response.json()
    assert body["code"] == "ValidationFailed"
    assert body["details"]["violations"][0]["code"] == "DifficultyOutOfRange"


def test_exercise_validate_endpoint_reports_without_persisting(client, svc, seeded):
    word = seeded["words"]["soare"]
    before = len(svc.builder.list_exercises())
    response = client.post("/api/exercises/validate", json={
        "type": "sound_recognition", "target_sound": "S", "difficulty": 2,
        "instruction_text": "Ascultă!", "instruction_audio": seeded["audio"].id,
        "variant": "none",
        "items": [{"ref_kind": "word", "ref_id": word.id,
                   "response_window_s": 0, "contains_target": True}]})
    assert response.status_code == 200
    codes = [v["code"] for v in response.json()["violations"]]
    assert codes == ["ResponseWindowOutOfRange"]
    assert len(svc.builder.list_exercises()) == before


def test_media_upload_download_round_trip(client):
    data = wav_bytes(seconds=0.7)
    response = client.post(
        "/api/media",
        files={"file": ("probe.wav", io.BytesIO(data), "audio/wav")},
        data={"kind": "audio"})
    assert response.status_code == 201
    asset = response.json()
    assert asset["duration_ms"] == 700
    fetched = client.get(f"/api/media/{asset['content_hash']}")
    assert fetched.status_code == 200
    assert fetched.content == data
    assert "immutable" in fetched.headers["Cache-Control"]


def test_media_wrong_kind_code(client):
    response = client.post(
        "/api/media",
        files={"file": ("x.png", io.BytesIO(PNG_BYTES), "image/png")},
        data={"kind": "audio"})
    assert response.status_code == 422
    assert response.json()["code"] == "UndecodableAudioHeader"


def test_session_flow_over_http(client, seeded):
    start = client.post("/api/sessions", json={
        "exercise_id": seeded["exercise"].id, "child_id": seeded["child"].id})
    assert start.status_code == 201
    session_id = start.json()["id"]

    view = client.get(f"/api/sessions/{session_id}").json()
    assert view["phase"] == "main"
    assert view["presentation"]["deadline_ms"] == 5000
    assert view["presentation"]["entry"]["text"] == "soare"

    first = client.post(f"/api/sessions/{session_id}/answer",
                        json={"choice": 1, "elapsed_ms": 1200})
    assert first.json()["outcome"]["result"] == "correct"
    assert first.json()["session"]["flowers"] == 1

    second = client.post(f"/api/sessions/{session_id}/answer",
                         json={"choice": 1, "elapsed_ms": 800})
    assert second.json()["outcome"]["result"] == "incorrect"
    assert second.json()["session"]["phase"] == "retry"

    retry = client.post(f"/api/sessions/{session_id}/expire")
    assert retry.json()["outcome"]["result"] == "timeout"
    assert retry.json()["session"]["phase"] == "finished"

    final = client.post(f"/api/sessions/{session_id}/finalize")
    assert final.status_code == 200
    assert final.json()["accuracy"] == "1/2"
    assert final.json()["flowers"] == 1

    after = client.post(f"/api/sessions/{session_id}/answer",
                        json={"choice": 1, "elapsed_ms": 100})
    assert after.status_code == 409
    assert after.json()["code"] == "SessionFinished"


def test_elapsed_beyond_window_422(client, seeded):
    start = client.post("/api/sessions", json={
        "exercise_id": seeded["exercise"].id, "child_id": seeded["child"].id})
    session_id = start.json()["id"]
    response = client.post(f"/api/sessions/{session_id}/answer",
                           json={"choice": 1, "elapsed_ms": 6000})
    assert response.status_code == 422
    assert response.json()["code"] == "ElapsedExceedsWindow"


def test_children_and_auto_homework(client, seeded):
    created = client.post("/api/children", json={
        "name": "Radu", "birth_year": 2021, "impaired_sounds": ["S"]})
    assert created.status_code == 201
    child_id = created.json()["id"]
    auto = client.post("/api/homework/auto",
                       json={"child_id": child_id, "k_exercises": 2})
    assert auto.status_code == 201
    body = auto.json()
    assert body["origin"] == "auto"
    assert body["exercise_refs"] == [seeded["exercise"].id]
    assert "target=S" in body["policy_trace"]


def test_homework_manual_and_fetch(client, seeded):
    response = client.post("/api/homework", json={
        "child_id": seeded["child"].id,
        "exercise_ids": [seeded["exercise"].id]})
    assert response.status_code == 201
    homework_id = response.json()["id"]
    fetched = client.get(f"/api/homework/{homework_id}")
    assert fetched.json()["exercise_refs"] == [seeded["exercise"].id]


def test_bundle_export_import_over_http(client, svc, seeded, tmp_path):
    homework = client.post("/api/homework", json={
        "child_id": seeded["child"].id,
        "exercise_ids": [seeded["exercise"].id]}).json()
    exported = client.post("/api/bundles/export",
                           json={"homework_id": homework["id"]})
    assert exported.status_code == 200
    assert exported.headers["content-type"] == "application/zip"
    archive = zipfile.ZipFile(io.BytesIO(exported.content))
    manifest = json.loads(archive.read("manifest.json"))
    assert manifest["homework_id"] == homework["id"]

    imported = client.post(
        "/api/bundles/import",
        files={"file": ("b.zip", io.BytesIO(exported.content),
                        "application/zip")})
    assert imported.status_code == 200
    assert imported.json()["id"] == homework["id"]


def test_progression_report_endpoint(client, svc, seeded):
    session = svc.start_session(seeded["exercise"].id, seeded["child"].id)
    svc.submit_answer(session.id, 1, 100)
    svc.submit_answer(session.id, 2, 100)
    svc.finalize_session(session.id, finished_at="2026-08-02T10:00:00+00:00")
    response = client.get("/api/reports/progression", params={
        "child_id": seeded["child"].id, "sound": "S"})
    assert response.status_code == 200
    points = response.json()
    assert len(points) == 1
    assert points[0]["accuracy"] == "1"
    assert points[0]["difficulty"] == 2


def test_not_found_is_404(client):
    response = client.get("/api/exercises/e-missing")
    assert response.status_code == 404
    assert response.json()["code"] == "NotFound"
