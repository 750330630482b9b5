"""Shared fixtures and world builders for the test suite."""

from __future__ import annotations

import io
import wave

import pytest

from logoped.catalog import Gender, PartOfSpeech, ProductionKind
from logoped.exercises import (
    Exercise,
    ExerciseItem,
    ExerciseType,
    ItemRef,
    Variant,
)
from logoped.catalog import VocalProduction, WordEntry
from logoped.media import MediaKind
from logoped.service import TherapyService
from logoped.text import SoundTag, detect_sounds

PNG_BYTES = b"\x89PNG\r\n\x1a\n" + bytes(24)
JPEG_BYTES = b"\xff\xd8\xff\xe0" + bytes(24)


def wav_bytes(seconds: float = 1.2, rate: int = 8000, fill: int = 0) -> bytes:
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(fill.to_bytes(2, "little") * int(seconds * rate))
    return buf.getvalue()


@pytest.fixture
def svc(tmp_path) -> TherapyService:
    return TherapyService(tmp_path / "root")


@pytest.fixture
def audio_asset(svc):
    return svc.catalog.register_media(wav_bytes(), MediaKind.AUDIO, "voice.wav")


@pytest.fixture
def image_asset(svc):
    return svc.catalog.register_media(PNG_BYTES, MediaKind.IMAGE, "pict.png")


def add_word(svc, text, first_syllable, audio_id, pos=PartOfSpeech.NOUN,
             gender=Gender.NOT_APPLICABLE, image=None, **kwargs):
    return svc.catalog.create_word(
        text=text, first_syllable=first_syllable, part_of_speech=pos,
        gender=gender, articulated=False, audio=audio_id, image=image, **kwargs)


@pytest.fixture
def demo_words(svc, audio_asset, image_asset):
    """The four-word demo catalog: soare, casă, vas, lac."""
    return {
        "soare": add_word(svc, "soare", "soa", audio_asset.id,
                          gender=Gender.NEUTER, image=image_asset.id),
        "casă": add_word(svc, "casă", "ca", audio_asset.id, gender=Gender.FEMININE),
        "vas": add_word(svc, "vas", "va", audio_asset.id, gender=Gender.NEUTER),
        "lac": add_word(svc, "lac", "la", audio_asset.id, gender=Gender.NEUTER),
    }


# -- pure-engine world builders (no store involved) ---------------------------


def make_word(word_id: str, text: str, image: str | None = None) -> WordEntry:
    return WordEntry(
        id=word_id, text=text, first_syllable=text[:1],
        part_of_speech=PartOfSpeech.NOUN, gender=Gender.NOT_APPLICABLE,
        articulated=False, audio="a-fake", syllabified_audio=None, image=image,
        sounds=frozenset(detect_sounds(text)), sound_overrides=frozenset(),
        version=1)


def make_pair(production_id: str, first: str, second: str, sound: str) -> VocalProduction:
    return VocalProduction(
        id=production_id, kind=ProductionKind.PARONYM_PAIR,
        text=f"{first} – {second}", parts=(first, second), audio="a-fake",
        target_sound=SoundTag.of(sound), version=1)


class FakeResolver:
    """In-memory ref resolution for engine-level tests."""

    def __init__(self, *entries):
        self.entries = {e.id: e for e in entries}

    def __call__(self, ref: ItemRef):
        return self.entries.get(ref.id)


def make_exercise(items, type=ExerciseType.SOUND_RECOGNITION, sound="S",
                  difficulty=2, variant=Variant.NONE,
                  exercise_id="e-test") -> Exercise:
    return Exercise(
        id=exercise_id, type=type, target_sound=SoundTag.of(sound),
        difficulty=difficulty, instruction_text="Ascultă și alege!",
        instruction_audio="a-fake", variant=variant, items=tuple(items),
        version=1)


def item(ref_id: str, kind: str = "word", window: int = 5,
         contains: bool = True, override: bool = False,
         pair_order=None) -> ExerciseItem:
    return ExerciseItem(
        ref=ItemRef(kind=kind, id=ref_id), response_window_s=window,
        contains_target=contains, contains_override=override,
        pair_order=pair_order)
