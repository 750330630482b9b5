"""Administrative command line: ingestion, authoring, homework, bundles,
reports and store checks, all runnable without the web UI.

Mutating commands take an exclusive file lock on the store so two
concurrent invocations cannot interleave writes.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click
from filelock import FileLock

from .catalog import Gender, PartOfSpeech, ProductionKind
from .errors import LogopedError, ValidationFailed
from .exercises import Exercise, ExerciseItem, ExerciseType, ItemRef, Variant
from .media import MediaKind
from .service import TherapyService
from .text import SoundTag


def get_service(ctx: click.Context) -> TherapyService:
    params = ctx.obj
    if params.get("service") is None:
        params["service"] = TherapyService(params["root"],
                                           templates_path=params["templates"])
    return params["service"]


def store_lock(ctx: click.Context) -> FileLock:
    root = Path(ctx.obj["root"])
    root.mkdir(parents=True, exist_ok=True)
    return FileLock(root / "store.lock")


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationFailed as exc:
            for violation in exc.violations:
                where = (f" (item {violation['item_index']})"
                         if violation.get("item_index") is not None else "")
                click.echo(f"{violation['code']}{where}: {violation['message']}",
                           err=True)
            sys.exit(1)
        except LogopedError as exc:
            click.echo(f"{exc.code}: {exc.message}", err=True)
            sys.exit(1)
    return wrapper


def _resolve_media(service: TherapyService, value: str | None,
                   kind: MediaKind, cache: dict) -> str | None:
    """Accept an asset id as-is; ingest a file path (cached per run)."""
    if not value:
        return None
    if value.startswith("a-") and not Path(value).exists():
        return value
    key = (value, kind.value)
    if key not in cache:
        data = Path(value).read_bytes()
        asset = service.catalog.register_media(data, kind, Path(value).name)
        cache[key] = asset.id
    return cache[key]


@click.group()
@click.option("--store", "store_root", envvar="LOGOPED_STORE", required=True,
              type=click.Path(file_okay=False),
              help="Store root directory (or LOGOPED_STORE).")
@click.option("--templates", envvar="LOGOPED_TEMPLATES", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Prompt template file (or LOGOPED_TEMPLATES).")
@click.pass_context
def main(ctx, store_root, templates):
    """Speech therapy exercise store administration."""
    ctx.obj = {"root": Path(store_root),
               "templates": Path(templates) if templates else None,
               "service": None}


# -- media --------------------------------------------------------------------

@main.group()
def media():
    """Media asset commands."""


@media.command("ingest")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["audio", "image"]), required=True)
@click.pass_context
@handle_errors
def media_ingest(ctx, file, kind):
    service = get_service(ctx)
    with store_lock(ctx):
        asset = service.catalog.register_media(
            Path(file).read_bytes(), MediaKind(kind), Path(file).name)
    click.echo(f"{asset.id}\t{asset.content_hash}\t{asset.byte_size}")


# -- words --------------------------------------------------------------------

@main.group()
def word():
    """Word catalog commands."""


def _print_word(w) -> None:
    sounds = ",".join(sorted(t.symbol for t in w.sounds))
    click.echo(f"{w.id}\t{w.text}\t{w.part_of_speech.value}\t{sounds}")


@word.command("add")
@click.option("--text")
@click.option("--first-syllable")
@click.option("--pos", "part_of_speech", default="noun",
              type=click.Choice([p.value for p in PartOfSpeech]))
@click.option("--gender", default="not_applicable",
              type=click.Choice([g.value for g in Gender]))
@click.option("--articulated/--not-articulated", default=False)
@click.option("--audio", help="Audio asset id or file path.")
@click.option("--syllabified-audio", default=None)
@click.option("--image", default=None)
@click.option("--sounds", "overrides", default="",
              help="Extra sound tags, comma separated.")
@click.option("--csv", "csv_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Batch file; see docs/ingest.md for columns.")
@click.pass_context
@handle_errors
def word_add(ctx, text, first_syllable, part_of_speech, gender, articulated,
             audio, syllabified_audio, image, overrides, csv_file):
    service = get_service(ctx)
    cache: dict = {}
    with store_lock(ctx):
        if csv_file:
            count = 0
            with open(csv_file, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    service.catalog.create_word(
                        text=row["text"],
                        first_syllable=row["first_syllable"],
                        part_of_speech=PartOfSpeech(row.get("part_of_speech") or "noun"),
                        gender=Gender(row.get("gender") or "not_applicable"),
                        articulated=(row.get("articulated") or "").lower()
                        in ("1", "true", "yes"),
                        audio=_resolve_media(service, row["audio"],
                                             MediaKind.AUDIO, cache),
                        syllabified_audio=_resolve_media(
                            service, row.get("syllabified_audio"),
                            MediaKind.AUDIO, cache),
                        image=_resolve_media(service, row.get("image"),
                                             MediaKind.IMAGE, cache),
                        sound_overrides=frozenset(
                            SoundTag.of(s) for s in
                            (row.get("sound_overrides") or "").split("|") if s))
                    count += 1
            click.echo(f"imported {count} words")
            return
        if not text or not first_syllable or not audio:
            raise click.UsageError("--text, --first-syllable and --audio are "
                                   "required without --csv")
        entry = service.catalog.create_word(
            text=text,
            first_syllable=first_syllable,
            part_of_speech=PartOfSpeech(part_of_speech),
            gender=Gender(gender),
            articulated=articulated,
            audio=_resolve_media(service, audio, MediaKind.AUDIO, cache),
            syllabified_audio=_resolve_media(service, syllabified_audio,
                                             MediaKind.AUDIO, cache),
            image=_resolve_media(service, image, MediaKind.IMAGE, cache),
            sound_overrides=frozenset(
                SoundTag.of(s) for s in overrides.split(",") if s))
    _print_word(entry)


@word.command("list")
@click.pass_context
@handle_errors
def word_list(ctx):
    for entry in get_service(ctx).catalog.list_words():
        _print_word(entry)


@word.command("search")
@click.option("--query", default="")
@click.option("--sound", default=None)
@click.option("--pos", "part_of_speech", default=None,
              type=click.Choice([p.value for p in PartOfSpeech]))
@click.pass_context
@handle_errors
def word_search(ctx, query, sound, part_of_speech):
    words = get_service(ctx).catalog.search_words(
        query=query,
        sound=SoundTag.of(sound) if sound else None,
        part_of_speech=PartOfSpeech(part_of_speech) if part_of_speech else None)
    for entry in words:
        _print_word(entry)


@word.command("delete")
@click.argument("word_id")
@click.pass_context
@handle_errors
def word_delete(ctx, word_id):
    service = get_service(ctx)
    with store_lock(ctx):
        service.catalog.delete_word(word_id)
    click.echo(f"deleted {word_id}")


# -- productions -----------------------------------------------------------------

@main.group()
def production():
    """Vocal production commands."""


@production.command("add")
@click.option("--kind", type=click.Choice([k.value for k in ProductionKind]))
@click.option("--text")
@click.option("--parts", help="Segments, | separated.")
@click.option("--sound", "target_sound")
@click.option("--audio", help="Audio asset id or file path.")
@click.option("--csv", "csv_file", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def production_add(ctx, kind, text, parts, target_sound, audio, csv_file):
    service = get_service(ctx)
    cache: dict = {}
    with store_lock(ctx):
        if csv_file:
            count = 0
            with open(csv_file, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    service.catalog.create_production(
                        kind=ProductionKind(row["kind"]),
                        parts=[p for p in row["parts"].split("|") if p],
                        text=row["text"],
                        target_sound=SoundTag.of(row["target_sound"]),
                        audio=_resolve_media(service, row["audio"],
                                             MediaKind.AUDIO, cache))
                    count += 1
            click.echo(f"imported {count} productions")
            return
        if not (kind and text and parts and target_sound and audio):
            raise click.UsageError("--kind, --text, --parts, --sound and "
                                   "--audio are required without --csv")
        entry = service.catalog.create_production(
            kind=ProductionKind(kind),
            parts=[p for p in parts.split("|") if p],
            text=text,
            target_sound=SoundTag.of(target_sound),
            audio=_resolve_media(service, audio, MediaKind.AUDIO, cache))
    click.echo(f"{entry.id}\t{entry.kind.value}\t{entry.text}")


# -- exercises ------------------------------------------------------------------

@main.group()
def exercise():
    """Exercise authoring commands."""


def _exercise_from_file(service: TherapyService, path: str,
                        ingest_audio: bool) -> tuple[dict, list[ExerciseItem]]:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    cache: dict = {}
    audio_ref = spec["instruction_audio"]
    if ingest_audio:
        audio_ref = _resolve_media(service, audio_ref, MediaKind.AUDIO, cache)
    items = [
        ExerciseItem(
            ref=ItemRef(kind=item["ref_kind"], id=item["ref_id"]),
            response_window_s=item["response_window_s"],
            contains_target=item["contains_target"],
            contains_override=item.get("contains_override", False),
            pair_order=tuple(item["pair_order"]) if item.get("pair_order") else None)
        for item in spec["items"]
    ]
    spec["instruction_audio"] = audio_ref
    return spec, items


@exercise.command("create")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def exercise_create(ctx, file):
    service = get_service(ctx)
    with store_lock(ctx):
        spec, items = _exercise_from_file(service, file, ingest_audio=True)
        entry = service.builder.create_exercise(
            type=ExerciseType(spec["type"]),
            target_sound=SoundTag.of(spec["target_sound"]),
            difficulty=spec["difficulty"],
            instruction_text=spec["instruction_text"],
            instruction_audio=spec["instruction_audio"],
            variant=Variant(spec.get("variant", "none")),
            items=items)
    click.echo(entry.id)


@exercise.command("validate")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def exercise_validate(ctx, file):
    service = get_service(ctx)
    spec, items = _exercise_from_file(service, file, ingest_audio=False)
    candidate = Exercise(
        id="e-candidate",
        type=ExerciseType(spec["type"]),
        target_sound=SoundTag.of(spec["target_sound"]),
        difficulty=spec["difficulty"],
        instruction_text=spec["instruction_text"],
        instruction_audio=spec["instruction_audio"],
        variant=Variant(spec.get("variant", "none")),
        items=tuple(items),
        version=1)
    violations = service.builder.validate(candidate)
    if not violations:
        click.echo("OK")
        return
    for violation in violations:
        where = f" (item {violation.item_index})" if violation.item_index is not None else ""
        click.echo(f"{violation.code}{where}: {violation.message}", err=True)
    sys.exit(1)


@exercise.command("list")
@click.option("--sound", default=None)
@click.pass_context
@handle_errors
def exercise_list(ctx, sound):
    exercises = get_service(ctx).builder.list_exercises(
        SoundTag.of(sound) if sound else None)
    for entry in exercises:
        click.echo(f"{entry.id}\t{entry.type.value}\t{entry.target_sound}\t"
                   f"d{entry.difficulty}\t{len(entry.items)} items")


# -- children / homework ----------------------------------------------------------

@main.group()
def child():
    """Child profile commands."""


@child.command("add")
@click.option("--name", required=True)
@click.option("--birth-year", type=int, required=True)
@click.option("--sounds", required=True, help="Impaired sounds, comma separated.")
@click.option("--notes", default="")
@click.pass_context
@handle_errors
def child_add(ctx, name, birth_year, sounds, notes):
    service = get_service(ctx)
    with store_lock(ctx):
        profile, warnings = service.manager.create_child(
            name=name, birth_year=birth_year,
            impaired_sounds={SoundTag.of(s) for s in sounds.split(",") if s},
            report_notes=notes,
            current_year=int(service.clock()[:4]))
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(profile.id)


@main.group()
def homework():
    """Homework commands."""


@homework.command("assign")
@click.option("--child", "child_id", required=True)
@click.argument("exercise_ids", nargs=-1, required=True)
@click.pass_context
@handle_errors
def homework_assign(ctx, child_id, exercise_ids):
    service = get_service(ctx)
    with store_lock(ctx):
        entry = service.manager.assign_homework(
            child_id, list(exercise_ids), assigned_at=service.clock())
    click.echo(entry.id)


@homework.command("auto")
@click.option("--child", "child_id", required=True)
@click.option("-k", "--count", "k_exercises", type=int, default=3)
@click.pass_context
@handle_errors
def homework_auto(ctx, child_id, k_exercises):
    service = get_service(ctx)
    with store_lock(ctx):
        entry = service.manager.auto_generate_homework(
            child_id, k_exercises, assigned_at=service.clock())
    click.echo(entry.id)
    click.echo(entry.policy_trace)
    for exercise_id in entry.exercise_refs:
        click.echo(f"  {exercise_id}")


# -- bundles / results --------------------------------------------------------------

@main.group()
def bundle():
    """Offline bundle commands."""


@bundle.command("export")
@click.argument("homework_id")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def bundle_export(ctx, homework_id, output):
    path = get_service(ctx).bundler.export_bundle(homework_id, Path(output))
    click.echo(str(path))


@bundle.command("import")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def bundle_import(ctx, file):
    service = get_service(ctx)
    with store_lock(ctx):
        entry = service.bundler.import_bundle(Path(file))
    click.echo(entry.id)


@main.group()
def results():
    """Offline results commands."""


@results.command("import")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def results_import(ctx, file):
    service = get_service(ctx)
    with store_lock(ctx):
        imported = service.import_results(Path(file))
    click.echo(f"imported {len(imported)} results")


@results.command("export")
@click.option("--child", "child_id", default=None)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.pass_context
@handle_errors
def results_export(ctx, child_id, output):
    service = get_service(ctx)
    entries = service.list_results(child_id)
    service.bundler.export_results(entries, Path(output))
    click.echo(f"exported {len(entries)} results")


# -- reports / store ----------------------------------------------------------------

@main.group()
def report():
    """Progress reporting."""


@report.command("progression")
@click.option("--child", "child_id", required=True)
@click.option("--sound", required=True)
@click.option("--from", "from_date", default=None)
@click.option("--to", "to_date", default=None)
@click.pass_context
@handle_errors
def report_progression(ctx, child_id, sound, from_date, to_date):
    points = get_service(ctx).manager.progression_report(
        child_id, SoundTag.of(sound), from_date, to_date)
    for point in points:
        click.echo(f"{point.date}\t{point.accuracy}\t{point.difficulty}")


@main.group()
def store():
    """Store maintenance."""


@store.command("check")
@click.pass_context
@handle_errors
def store_check(ctx):
    problems = get_service(ctx).store_check()
    click.echo(f"{len(problems)} dangling references")
    for problem in problems:
        click.echo(problem, err=True)
    if problems:
        sys.exit(1)


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8077)
@click.option("--static-dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Optional built web UI to serve at /.")
@click.pass_context
@handle_errors
def serve(ctx, host, port, static_dir):
    import uvicorn

    from .api import create_app

    app = create_app(get_service(ctx),
                     static_dir=Path(static_dir) if static_dir else None)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
