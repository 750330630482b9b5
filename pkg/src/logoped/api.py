"""HTTP facade over the therapy service.

Endpoints are a thin bijection onto the engine operations: request
bodies map to operation arguments, responses are the operation results
in their canonical document form, and every engine error surfaces as a
stable ``code`` with the matching HTTP status.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .catalog import Gender, PartOfSpeech, ProductionKind
from .errors import LogopedError, NotFound
from .exercises import Exercise, ExerciseItem, ExerciseType, ItemRef, Variant
from .media import MediaKind
from .service import TherapyService
from .sessions import Phase
from .text import SoundTag

API_VERSION = "1"


class WordIn(BaseModel):
    text: str
    first_syllable: str
    part_of_speech: str = "noun"
    gender: str = "not_applicable"
    articulated: bool = False
    audio: str
    syllabified_audio: str | None = None
    image: str | None = None
    sound_overrides: list[str] = Field(default_factory=list)


class WordUpdate(BaseModel):
    expected_version: int
    fields: dict


class ProductionIn(BaseModel):
    kind: str
    text: str
    parts: list[str]
    target_sound: str
    audio: str


class ItemIn(BaseModel):
    ref_kind: str
    ref_id: str
    response_window_s: int
    contains_target: bool
    contains_override: bool = False
    pair_order: list[int] | None = None


class ExerciseIn(BaseModel):
    type: str
    target_sound: str
    difficulty: int
    instruction_text: str
    instruction_audio: str
    variant: str = "none"
    items: list[ItemIn]


class ChildIn(BaseModel):
    name: str
    birth_year: int
    impaired_sounds: list[str]
    report_notes: str = ""


class HomeworkIn(BaseModel):
    child_id: str
    exercise_ids: list[str]


class AutoHomeworkIn(BaseModel):
    child_id: str
    k_exercises: int = 3


class SessionIn(BaseModel):
    exercise_id: str
    child_id: str


class AnswerIn(BaseModel):
    choice: int
    elapsed_ms: int


class CloneIn(BaseModel):
    difficulty: int


class ExportIn(BaseModel):
    homework_id: str


def _items_from(models: list[ItemIn]) -> list[ExerciseItem]:
    return [
        ExerciseItem(
            ref=ItemRef(kind=m.ref_kind, id=m.ref_id),
            response_window_s=m.response_window_s,
            contains_target=m.contains_target,
            contains_override=m.contains_override,
            pair_order=tuple(m.pair_order) if m.pair_order else None,
        )
        for m in models
    ]


def _session_view(session) -> dict:
    return {
        "id": session.id,
        "exercise_ref": session.exercise_id,
        "child_ref": session.child_id,
        "phase": session.phase.value,
        "cursor": session.cursor,
        "flowers": session.flowers,
        "pending_retry": list(session.pending_retry),
        "item_count": session.item_count,
    }


def create_app(service: TherapyService,
               static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="logoped", version=API_VERSION)

    @app.exception_handler(LogopedError)
    async def logoped_error_handler(request: Request, exc: LogopedError):
        return JSONResponse(status_code=exc.http_status, content=exc.as_dict(),
                            headers={"X-Api-Version": API_VERSION})

    @app.middleware("http")
    async def version_header(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Api-Version"] = API_VERSION
        return response

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    # -- media ---------------------------------------------------------------

    @app.post("/api/media", status_code=201)
    async def upload_media(file: UploadFile = File(...), kind: str = Form(...)):
        data = await file.read()
        asset = service.catalog.register_media(
            data, MediaKind(kind), file.filename or "")
        return asset.to_doc()

    @app.get("/api/media/{content_hash}")
    def download_media(content_hash: str):
        if not service.media.has(content_hash):
            raise NotFound(f"no media blob {content_hash}")
        return FileResponse(
            service.media.blob_path(content_hash),
            media_type="application/octet-stream",
            headers={"Cache-Control": "public, max-age=31536000, immutable"})

    # -- words ----------------------------------------------------------------

    @app.get("/api/words")
    def search_words(query: str = "", sound: str | None = None,
                     part_of_speech: str | None = None):
        words = service.catalog.search_words(
            query=query,
            sound=SoundTag.of(sound) if sound else None,
            part_of_speech=PartOfSpeech(part_of_speech) if part_of_speech else None)
        return [w.to_doc() for w in words]

    @app.post("/api/words", status_code=201)
    def create_word(body: WordIn):
        word = service.catalog.create_word(
            text=body.text,
            first_syllable=body.first_syllable,
            part_of_speech=PartOfSpeech(body.part_of_speech),
            gender=Gender(body.gender),
            articulated=body.articulated,
            audio=body.audio,
            syllabified_audio=body.syllabified_audio,
            image=body.image,
            sound_overrides=frozenset(SoundTag.of(s) for s in body.sound_overrides))
        return word.to_doc()

    @app.get("/api/words/{word_id}")
    def get_word(word_id: str):
        return service.catalog.get_word(word_id).to_doc()

    @app.put("/api/words/{word_id}")
    def update_word(word_id: str, body: WordUpdate):
        word = service.catalog.update_word(word_id, body.fields,
                                           body.expected_version)
        return word.to_doc()

    @app.delete("/api/words/{word_id}", status_code=204)
    def delete_word(word_id: str):
        service.catalog.delete_word(word_id)
        return Response(status_code=204)

    # -- productions ------------------------------------------------------------

    @app.get("/api/productions")
    def list_productions(kind: str | None = None):
        productions = service.catalog.list_productions(
            ProductionKind(kind) if kind else None)
        return [p.to_doc() for p in productions]

    @app.post("/api/productions", status_code=201)
    def create_production(body: ProductionIn):
        production = service.catalog.create_production(
            kind=ProductionKind(body.kind),
            parts=body.parts,
            text=body.text,
            target_sound=SoundTag.of(body.target_sound),
            audio=body.audio)
        return production.to_doc()

    @app.get("/api/productions/{production_id}")
    def get_production(production_id: str):
        return service.catalog.get_production(production_id).to_doc()

    # -- exercises ------------------------------------------------------------

    @app.get("/api/exercises")
    def list_exercises(sound: str | None = None):
        exercises = service.builder.list_exercises(
            SoundTag.of(sound) if sound else None)
        return [e.to_doc() for e in exercises]

    @app.post("/api/exercises", status_code=201)
    def create_exercise(body: ExerciseIn):
        exercise = service.builder.create_exercise(
            type=ExerciseType(body.type),
            target_sound=SoundTag.of(body.target_sound),
            difficulty=body.difficulty,
            instruction_text=body.instruction_text,
            instruction_audio=body.instruction_audio,
            variant=Variant(body.variant),
            items=_items_from(body.items))
        return exercise.to_doc()

    @app.post("/api/exercises/validate")
    def validate_exercise(body: ExerciseIn):
        candidate = Exercise(
            id="e-candidate",
            type=ExerciseType(body.type),
            target_sound=SoundTag.of(body.target_sound),
            difficulty=body.difficulty,
            instruction_text=body.instruction_text,
            instruction_audio=body.instruction_audio,
            variant=Variant(body.variant),
            items=tuple(_items_from(body.items)),
            version=1)
        return {"violations": [v.to_doc() for v in service.builder.validate(candidate)]}

    @app.get("/api/exercises/{exercise_id}")
    def get_exercise(exercise_id: str):
        return service.builder.get_exercise(exercise_id).to_doc()

    @app.post("/api/exercises/{exercise_id}/clone", status_code=201)
    def clone_exercise(exercise_id: str, body: CloneIn):
        return service.builder.clone_with_difficulty(
            exercise_id, body.difficulty).to_doc()

    @app.delete("/api/exercises/{exercise_id}", status_code=204)
    def delete_exercise(exercise_id: str):
        service.builder.delete_exercise(exercise_id)
        return Response(status_code=204)

    # -- children / homework ------------------------------------------------------

    @app.get("/api/children")
    def list_children():
        return [c.to_doc() for c in service.manager.list_children()]

    @app.post("/api/children", status_code=201)
    def create_child(body: ChildIn):
        child, warnings = service.manager.create_child(
            name=body.name,
            birth_year=body.birth_year,
            impaired_sounds={SoundTag.of(s) for s in body.impaired_sounds},
            report_notes=body.report_notes,
            current_year=int(service.clock()[:4]))
        doc = child.to_doc()
        doc["warnings"] = warnings
        return doc

    @app.get("/api/children/{child_id}")
    def get_child(child_id: str):
        return service.manager.get_child(child_id).to_doc()

    @app.get("/api/homework")
    def list_homework(child_id: str | None = None):
        return [h.to_doc() for h in service.manager.list_homework(child_id)]

    @app.post("/api/homework", status_code=201)
    def assign_homework(body: HomeworkIn):
        homework = service.manager.assign_homework(
            body.child_id, body.exercise_ids, assigned_at=service.clock())
        return homework.to_doc()

    @app.post("/api/homework/auto", status_code=201)
    def auto_homework(body: AutoHomeworkIn):
        homework = service.manager.auto_generate_homework(
            body.child_id, body.k_exercises, assigned_at=service.clock())
        return homework.to_doc()

    @app.get("/api/homework/{homework_id}")
    def get_homework(homework_id: str):
        return service.manager.get_homework(homework_id).to_doc()

    # -- sessions ------------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    def start_session(body: SessionIn):
        session = service.start_session(body.exercise_id, body.child_id)
        return _session_view(session)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        session = service.get_session(session_id)
        view = _session_view(session)
        if session.phase != Phase.FINISHED:
            _, presentation = service.present_next(session_id)
            entry = service.builder.resolve(presentation.ref)
            view["presentation"] = {
                "item_index": presentation.item_index,
                "phase": presentation.phase.value,
                "ref": presentation.ref.to_doc(),
                "deadline_ms": presentation.deadline_ms,
                "pair_order": list(presentation.pair_order)
                if presentation.pair_order else None,
                "progress": list(presentation.progress),
                "entry": entry.to_doc() if entry else None,
            }
        return view

    @app.post("/api/sessions/{session_id}/answer")
    def submit_answer(session_id: str, body: AnswerIn):
        session, outcome = service.submit_answer(session_id, body.choice,
                                                 body.elapsed_ms)
        return {"outcome": outcome.to_doc(), "session": _session_view(session)}

    @app.post("/api/sessions/{session_id}/expire")
    def expire_item(session_id: str):
        session, outcome = service.expire_item(session_id)
        return {"outcome": outcome.to_doc(), "session": _session_view(session)}

    @app.post("/api/sessions/{session_id}/finalize")
    def finalize_session(session_id: str):
        return service.finalize_session(session_id).to_doc()

    # -- bundles / reports ------------------------------------------------------

    @app.post("/api/bundles/export")
    def export_bundle(body: ExportIn):
        with tempfile.TemporaryDirectory() as tmp:
            path = service.bundler.export_bundle(
                body.homework_id, Path(tmp) / "bundle.zip")
            data = path.read_bytes()
        return Response(
            content=data, media_type="application/zip",
            headers={"Content-Disposition":
                     f'attachment; filename="{body.homework_id}.zip"'})

    @app.post("/api/bundles/import")
    async def import_bundle(file: UploadFile = File(...)):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bundle.zip"
            path.write_bytes(await file.read())
            homework = service.bundler.import_bundle(path)
        return homework.to_doc()

    @app.get("/api/reports/progression")
    def progression(child_id: str, sound: str,
                    from_date: str | None = None, to_date: str | None = None):
        points = service.manager.progression_report(
            child_id, SoundTag.of(sound), from_date, to_date)
        return [p.to_doc() for p in points]

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
