import csv
import json

import pytest
from click.testing import CliRunner

from logoped.cli import main
from logoped.service import TherapyService

from conftest import PNG_BYTES, wav_bytes


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def root(tmp_path):
    return tmp_path / "store-root"


def run(runner, root, *args, expect_exit=0):
    result = runner.invoke(main, ["--store", str(root), *args],
                           catch_exceptions=False)
    assert result.exit_code == expect_exit, result.output
    return result


@pytest.fixture
def media_files(tmp_path):
    wav = tmp_path / "voice.wav"
    wav.write_bytes(wav_bytes())
    png = tmp_path / "pict.png"
    png.write_bytes(PNG_BYTES)
    return {"wav": wav, "png": png}


def seed_words(runner, root, media_files):
    for text, syllable in (("soare", "soa"), ("casă", "ca"),
                           ("vas", "va"), ("lac", "la")):
        run(runner, root, "word", "add", "--text", text,
            "--first-syllable", syllable, "--audio", str(media_files["wav"]))


def test_media_ingest_prints_id_and_dedups(runner, root, media_files):
    first = run(runner, root, "media", "ingest", str(media_files["wav"]),
                "--kind", "audio")
    second = run(runner, root, "media", "ingest", str(media_files["wav"]),
                 "--kind", "audio")
    assert first.output == second.output
    assert first.output.startswith("a-")


def test_word_search_by_sound_three_lines(runner, root, media_files):
    seed_words(runner, root, media_files)
    result = run(runner, root, "word", "search", "--sound", "S")
    lines = result.output.strip().splitlines()
    assert len(lines) == 3
    assert [line.split("\t")[1] for line in lines] == ["casă", "soare", "vas"]


def test_word_search_deterministic_output(runner, root, media_files):
    seed_words(runner, root, media_files)
    first = run(runner, root, "word", "search", "--query", "a")
    second = run(runner, root, "word", "search", "--query", "a")
    assert first.output == second.output


def test_word_add_csv_batch(runner, root, tmp_path, media_files):
    batch = tmp_path / "words.csv"
    with open(batch, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "text", "first_syllable", "part_of_speech", "gender",
            "articulated", "audio", "syllabified_audio", "image",
            "sound_overrides"])
        writer.writeheader()
        writer.writerow({"text": "mașină", "first_syllable": "ma",
                         "part_of_speech": "noun", "gender": "feminine",
                         "articulated": "false",
                         "audio": str(media_files["wav"]),
                         "image": str(media_files["png"])})
        writer.writerow({"text": "șarpe", "first_syllable": "șar",
                         "part_of_speech": "noun", "gender": "masculine",
                         "articulated": "false",
                         "audio": str(media_files["wav"])})
    result = run(runner, root, "word", "add", "--csv", str(batch))
    assert "imported 2 words" in result.output
    listing = run(runner, root, "word", "list")
    assert len(listing.output.strip().splitlines()) == 2


def test_invalid_word_exits_nonzero_with_code(runner, root, media_files):
    result = runner.invoke(main, [
        "--store", str(root), "word", "add", "--text", "vas",
        "--first-syllable", "so", "--audio", str(media_files["wav"])])
    assert result.exit_code == 1
    assert "FirstSyllableNotPrefix" in result.output


def test_production_add_and_prefix_chain_error(runner, root, media_files):
    run(runner, root, "production", "add", "--kind", "progressive_addition",
        "--text", "sunete", "--parts", "s|su|sun|sune|sunet|sunete",
        "--sound", "S", "--audio", str(media_files["wav"]))
    bad = runner.invoke(main, [
        "--store", str(root), "production", "add",
        "--kind", "progressive_addition", "--text", "sunete",
        "--parts", "su|s", "--sound", "S", "--audio", str(media_files["wav"])])
    assert bad.exit_code == 1
    assert "PrefixChainBroken" in bad.output


def exercise_spec(service_root, media_files, runner, *, difficulty=3):
    """Author an intruder exercise JSON against freshly seeded words.

    Target sound R: soare carries it, casă and vas do not, so exactly-one
    fails until a test flips one of the flags.
    """
    seed_words(runner, service_root, media_files)
    service = TherapyService(service_root)
    by_text = {w.text: w for w in service.catalog.list_words()}
    items = [
        {"ref_kind": "word", "ref_id": by_text["soare"].id,
         "response_window_s": 5, "contains_target": True},
        {"ref_kind": "word", "ref_id": by_text["casă"].id,
         "response_window_s": 5, "contains_target": False},
        {"ref_kind": "word", "ref_id": by_text["vas"].id,
         "response_window_s": 5, "contains_target": False},
    ]
    return {
        "type": "intruder_recognition",
        "target_sound": "R",
        "difficulty": difficulty,
        "instruction_text": "Găsește intrusul!",
        "instruction_audio": str(media_files["wav"]),
        "variant": "none",
        "items": items,
    }


def test_exercise_validate_bad_file_prints_violation(runner, root, tmp_path,
                                                     media_files):
    spec = exercise_spec(root, media_files, runner)
    # two items lack the sound: the exactly-one rule must trip
    bad_file = tmp_path / "bad.json"
    bad_file.write_text(json.dumps(spec), encoding="utf-8")
    result = runner.invoke(main, ["--store", str(root), "exercise", "validate",
                                  str(bad_file)])
    assert result.exit_code == 1
    assert "ExactlyOneIntruderViolated" in result.output


def test_exercise_create_and_list(runner, root, tmp_path, media_files):
    spec = exercise_spec(root, media_files, runner)
    spec["items"][2]["contains_target"] = True
    spec["items"][2]["contains_override"] = True  # vas has no R: keep 1 intruder
    good = tmp_path / "good.json"
    good.write_text(json.dumps(spec), encoding="utf-8")
    created = run(runner, root, "exercise", "create", str(good))
    exercise_id = created.output.strip()
    assert exercise_id.startswith("e-")
    listing = run(runner, root, "exercise", "list", "--sound", "R")
    assert exercise_id in listing.output


def test_store_check_fresh_store(runner, root):
    result = run(runner, root, "store", "check")
    assert result.output.strip() == "0 dangling references"


def test_full_cli_homework_bundle_cycle(runner, root, tmp_path, media_files):
    spec = exercise_spec(root, media_files, runner)
    spec["items"][2]["contains_target"] = True
    spec["items"][2]["contains_override"] = True
    good = tmp_path / "good.json"
    good.write_text(json.dumps(spec), encoding="utf-8")
    exercise_id = run(runner, root, "exercise", "create",
                      str(good)).output.strip()

    child_result = run(runner, root, "child", "add", "--name", "Ana",
                       "--birth-year", "2021", "--sounds", "R,S")
    child_id = child_result.output.strip().splitlines()[-1]

    hw_result = run(runner, root, "homework", "auto", "--child", child_id,
                    "-k", "2")
    homework_id = hw_result.output.strip().splitlines()[0]
    assert "target=R" in hw_result.output

    bundle_path = tmp_path / "out.zip"
    run(runner, root, "bundle", "export", homework_id, "-o", str(bundle_path))
    assert bundle_path.exists()

    other_root = tmp_path / "other-root"
    imported = run(runner, other_root, "bundle", "import", str(bundle_path))
    assert imported.output.strip() == homework_id
    check = run(runner, other_root, "store", "check")
    assert check.output.strip() == "0 dangling references"


def test_report_progression_lines(runner, root, tmp_path, media_files):
    spec = exercise_spec(root, media_files, runner)
    spec["items"][2]["contains_target"] = True
    spec["items"][2]["contains_override"] = True
    good = tmp_path / "good.json"
    good.write_text(json.dumps(spec), encoding="utf-8")
    exercise_id = run(runner, root, "exercise", "create",
                      str(good)).output.strip()
    child_id = run(runner, root, "child", "add", "--name", "Ana",
                   "--birth-year", "2021", "--sounds",
                   "R").output.strip().splitlines()[-1]

    service = TherapyService(root)
    session = service.start_session(exercise_id, child_id)
    service.submit_answer(session.id, 1, 100)
    service.submit_answer(session.id, 1, 100)
    service.submit_answer(session.id, 1, 100)
    while service.get_session(session.id).phase.value != "finished":
        service.expire_item(session.id)
    service.finalize_session(session.id, finished_at="2026-08-05T09:00:00+00:00")

    result = run(runner, root, "report", "progression", "--child", child_id,
                 "--sound", "R")
    lines = result.output.strip().splitlines()
    assert len(lines) == 1
    date, accuracy, difficulty = lines[0].split("\t")
    assert date.startswith("2026-08-05")
    assert difficulty == "3"


def test_results_export_import_cycle(runner, root, tmp_path, media_files):
    spec = exercise_spec(root, media_files, runner)
    spec["items"][2]["contains_target"] = True
    spec["items"][2]["contains_override"] = True
    good = tmp_path / "good.json"
    good.write_text(json.dumps(spec), encoding="utf-8")
    exercise_id = run(runner, root, "exercise", "create",
                      str(good)).output.strip()
    child_id = run(runner, root, "child", "add", "--name", "Ana",
                   "--birth-year", "2021", "--sounds",
                   "R").output.strip().splitlines()[-1]

    service = TherapyService(root)
    session = service.start_session(exercise_id, child_id)
    for _ in range(3):
        service.submit_answer(session.id, 1, 100)
    while service.get_session(session.id).phase.value != "finished":
        service.expire_item(session.id)
    service.finalize_session(session.id)

    out = tmp_path / "results.json"
    exported = run(runner, root, "results", "export", "--child", child_id,
                   "-o", str(out))
    assert "exported 1 results" in exported.output
    imported = run(runner, root, "results", "import", str(out))
    assert "imported 1 results" in imported.output
