"""Authoring and validation of the seven typed exercises plus the
intruder-recognition exercise.

Validation is a pure function from an exercise value (plus a catalog
resolver) to an ordered list of violations; the store never holds an
exercise with a nonempty violation list.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Union

from . import kinds
from .catalog import Catalog, Gender, ProductionKind, VocalProduction, WordEntry
from .errors import (
    DanglingRef,
    DifficultyOutOfRange,
    ReferencedElsewhere,
    UnknownTemplate,
    ValidationFailed,
)
from .store import DocumentStore
from .text import SoundTag

Entry = Union[WordEntry, VocalProduction]

MIN_DIFFICULTY, MAX_DIFFICULTY = 1, 5
MIN_WINDOW_S, MAX_WINDOW_S = 1, 10
MIN_INTRUDER_ITEMS = 3


class ExerciseType(str, Enum):
    SOUND_RECOGNITION = "sound_recognition"
    PAIR_DISCRIMINATION = "pair_discrimination"
    PRONUNCIATION = "pronunciation"
    ONOMATOPOEIA = "onomatopoeia"
    PROGRESSIVE_ADDITION = "progressive_addition"
    SIMILAR_JOINTS = "similar_joints"
    WORD_TRANSFORMATION = "word_transformation"
    INTRUDER_RECOGNITION = "intruder_recognition"


# exercise types whose items must reference paronym pair productions
PAIR_BASED_TYPES = {
    ExerciseType.PAIR_DISCRIMINATION,
    ExerciseType.SIMILAR_JOINTS,
    ExerciseType.WORD_TRANSFORMATION,
}


class Variant(str, Enum):
    IMAGES = "images"
    PENNANTS = "pennants"
    NONE = "none"


@dataclass(frozen=True)
class ItemRef:
    kind: str  # "word" | "production"
    id: str

    def to_doc(self) -> dict:
        return {"kind": self.kind, "id": self.id}

    @classmethod
    def from_doc(cls, doc: dict) -> "ItemRef":
        return cls(kind=doc["kind"], id=doc["id"])


@dataclass(frozen=True)
class ExerciseItem:
    ref: ItemRef
    response_window_s: int
    contains_target: bool
    contains_override: bool = False
    pair_order: tuple[int, int] | None = None  # pennant display order

    def to_doc(self) -> dict:
        return {
            "ref": self.ref.to_doc(),
            "response_window_s": self.response_window_s,
            "contains_target": self.contains_target,
            "contains_override": self.contains_override,
            "pair_order": list(self.pair_order) if self.pair_order else None,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExerciseItem":
        order = doc.get("pair_order")
        return cls(
            ref=ItemRef.from_doc(doc["ref"]),
            response_window_s=doc["response_window_s"],
            contains_target=doc["contains_target"],
            contains_override=doc.get("contains_override", False),
            pair_order=tuple(order) if order else None,
        )


@dataclass(frozen=True)
class Exercise:
    id: str
    type: ExerciseType
    target_sound: SoundTag
    difficulty: int
    instruction_text: str
    instruction_audio: str
    variant: Variant
    items: tuple[ExerciseItem, ...]
    version: int

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "type": self.type.value,
            "target_sound": self.target_sound.symbol,
            "difficulty": self.difficulty,
            "instruction_text": self.instruction_text,
            "instruction_audio": self.instruction_audio,
            "variant": self.variant.value,
            "items": [item.to_doc() for item in self.items],
            "version": self.version,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Exercise":
        return cls(
            id=doc["id"],
            type=ExerciseType(doc["type"]),
            target_sound=SoundTag(doc["target_sound"]),
            difficulty=doc["difficulty"],
            instruction_text=doc["instruction_text"],
            instruction_audio=doc["instruction_audio"],
            variant=Variant(doc["variant"]),
            items=tuple(ExerciseItem.from_doc(d) for d in doc["items"]),
            version=doc["version"],
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    item_index: int | None = None

    def to_doc(self) -> dict:
        return {"code": self.code, "message": self.message, "item_index": self.item_index}


def entry_contains_sound(entry: Entry, sound: SoundTag) -> bool:
    """Whether a catalog entry carries the sound (overrides included for words)."""
    if isinstance(entry, WordEntry):
        return sound in entry.sounds
    return sound.occurs_in(entry.text) or any(sound.occurs_in(p) for p in entry.parts)


def validate_exercise(exercise: Exercise,
                      resolve: Callable[[ItemRef], Entry | None]) -> list[Violation]:
    """All violated invariants, in deterministic order: exercise-level
    checks in field order, then item checks by index."""
    v: list[Violation] = []

    if not MIN_DIFFICULTY <= exercise.difficulty <= MAX_DIFFICULTY:
        v.append(Violation("DifficultyOutOfRange",
                           f"difficulty {exercise.difficulty} outside "
                           f"[{MIN_DIFFICULTY},{MAX_DIFFICULTY}]"))
    if not exercise.instruction_text.strip():
        v.append(Violation("MissingInstructionText", "instruction text is required"))
    if not exercise.instruction_audio:
        v.append(Violation("MissingInstructionAudio",
                           "spoken instructions are required (pre-readers)"))
    if not exercise.items:
        v.append(Violation("EmptyItems", "an exercise needs at least one item"))

    if exercise.type == ExerciseType.INTRUDER_RECOGNITION and exercise.items:
        if len(exercise.items) < MIN_INTRUDER_ITEMS:
            v.append(Violation("TooFewIntruderItems",
                               f"intruder exercises need at least "
                               f"{MIN_INTRUDER_ITEMS} items"))
        intruders = sum(1 for item in exercise.items if not item.contains_target)
        if intruders != 1:
            v.append(Violation("ExactlyOneIntruderViolated",
                               f"exactly one item must lack the target sound, "
                               f"found {intruders}"))

    for i, item in enumerate(exercise.items):
        if not MIN_WINDOW_S <= item.response_window_s <= MAX_WINDOW_S:
            v.append(Violation("ResponseWindowOutOfRange",
                               f"response window {item.response_window_s}s outside "
                               f"[{MIN_WINDOW_S},{MAX_WINDOW_S}]", i))
        entry = resolve(item.ref)
        if entry is None:
            v.append(Violation("DanglingItemRef",
                               f"{item.ref.kind} {item.ref.id} does not exist", i))
            continue

        is_pair = (isinstance(entry, VocalProduction)
                   and entry.kind == ProductionKind.PARONYM_PAIR)
        if exercise.type in PAIR_BASED_TYPES and not is_pair:
            v.append(Violation("WrongProductionKind",
                               f"{exercise.type.value} items must reference "
                               f"paronym pair productions", i))
        elif exercise.type == ExerciseType.PROGRESSIVE_ADDITION and not (
                isinstance(entry, VocalProduction)
                and entry.kind == ProductionKind.PROGRESSIVE_ADDITION):
            v.append(Violation("WrongProductionKind",
                               "progressive addition items must reference "
                               "progressive addition productions", i))
        elif exercise.type == ExerciseType.ONOMATOPOEIA and not (
                isinstance(entry, VocalProduction)
                and entry.kind == ProductionKind.ONOMATOPOEIA):
            v.append(Violation("WrongProductionKind",
                               "onomatopoeia items must reference "
                               "onomatopoeia productions", i))

        if exercise.variant == Variant.PENNANTS and not is_pair:
            v.append(Violation("PennantItemNotPair",
                               "pennant items must reference paronym pairs", i))
        if exercise.variant == Variant.IMAGES:
            if not isinstance(entry, WordEntry) or entry.image is None:
                v.append(Violation("MissingImage",
                                   "image variant requires words with images", i))

        if not item.contains_override:
            actual = entry_contains_sound(entry, exercise.target_sound)
            if actual != item.contains_target:
                v.append(Violation("ContainsFlagMismatch",
                                   f"item says contains_target={item.contains_target} "
                                   f"but the entry {'does' if actual else 'does not'} "
                                   f"contain {exercise.target_sound}", i))
    return v


def default_templates_path() -> Path:
    return Path(str(resources.files("logoped").joinpath("data/prompts.cfg")))


def load_templates(path: Path | None = None) -> dict[str, str]:
    """Parse the prompt template file: ``id = pattern`` lines, # comments."""
    source = Path(path) if path else default_templates_path()
    templates: dict[str, str] = {}
    for line in source.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, pattern = line.partition("=")
        if sep:
            templates[key.strip()] = pattern.strip()
    return templates


def articulated_form(text: str, gender: Gender, already_articulated: bool = False) -> str:
    """Definite (enclitic article) form for prompt slots.

    Rules cover the regular noun classes; irregulars keep the recorded
    form when the therapist marked the word as already articulated.
    """
    if already_articulated or gender == Gender.NOT_APPLICABLE:
        return text
    if gender == Gender.FEMININE:
        if text.endswith("ă"):
            return text[:-1] + "a"   # casă -> casa
        if text.endswith("ie"):
            return text[:-1] + "a"   # femeie -> femeia
        if text.endswith("a"):
            return text + "ua"       # basma -> basmaua
        return text + "a"            # carte -> cartea
    # masculine and neuter share the enclitic -l forms
    if text.endswith("u"):
        return text + "l"
    if text.endswith("e"):
        return text + "le"
    if text.endswith("ă"):
        return text[:-1] + "a"
    return text + "ul"


def formulate_prompt(word: WordEntry, template_kind: str,
                     templates: dict[str, str]) -> str:
    """Deterministic Romanian prompt from the word's form metadata."""
    pattern = templates.get(template_kind)
    if pattern is None:
        raise UnknownTemplate(f"no prompt template named {template_kind!r}")
    return pattern.format(
        word=word.text,
        articulated_form=articulated_form(word.text, word.gender, word.articulated))


class ExerciseBuilder:
    """Create/validate/clone surface over the exercise store."""

    def __init__(self, store: DocumentStore, catalog: Catalog,
                 templates_path: Path | None = None):
        self.store = store
        self.catalog = catalog
        self.templates = load_templates(templates_path)

    def resolve(self, ref: ItemRef) -> Entry | None:
        kind = kinds.WORD if ref.kind == "word" else kinds.PRODUCTION
        if not self.store.exists(kind, ref.id):
            return None
        if ref.kind == "word":
            return self.catalog.get_word(ref.id)
        return self.catalog.get_production(ref.id)

    def validate(self, exercise: Exercise) -> list[Violation]:
        return validate_exercise(exercise, self.resolve)

    def create_exercise(self, type: ExerciseType, target_sound: SoundTag,
                        difficulty: int, instruction_text: str,
                        instruction_audio: str, variant: Variant,
                        items: list[ExerciseItem] | tuple[ExerciseItem, ...],
                        ) -> Exercise:
        for item in items:
            if self.resolve(item.ref) is None:
                raise DanglingRef(f"{item.ref.kind} {item.ref.id} does not exist")
        if instruction_audio and not self.store.exists(kinds.ASSET, instruction_audio):
            raise DanglingRef(f"instruction audio {instruction_audio} does not exist")
        exercise = Exercise(
            id="e-" + uuid.uuid4().hex,
            type=type,
            target_sound=target_sound,
            difficulty=difficulty,
            instruction_text=instruction_text,
            instruction_audio=instruction_audio,
            variant=variant,
            items=tuple(items),
            version=1,
        )
        violations = self.validate(exercise)
        if violations:
            raise ValidationFailed(
                "; ".join(f"{x.code}" + (f" (item {x.item_index})"
                                         if x.item_index is not None else "")
                          for x in violations),
                [x.to_doc() for x in violations])
        self.store.put(kinds.EXERCISE, exercise.id, exercise.to_doc(),
                       expected_version=0)
        return exercise

    def get_exercise(self, exercise_id: str) -> Exercise:
        return Exercise.from_doc(self.store.get(kinds.EXERCISE, exercise_id).payload)

    def list_exercises(self, target_sound: SoundTag | None = None) -> list[Exercise]:
        records = self.store.list(
            kinds.EXERCISE,
            where=None if target_sound is None
            else (lambda p: p["target_sound"] == target_sound.symbol))
        return [Exercise.from_doc(r.payload) for r in records]

    def clone_with_difficulty(self, exercise_id: str, new_difficulty: int) -> Exercise:
        source = self.get_exercise(exercise_id)
        if not MIN_DIFFICULTY <= new_difficulty <= MAX_DIFFICULTY:
            raise DifficultyOutOfRange(
                f"difficulty {new_difficulty} outside [{MIN_DIFFICULTY},{MAX_DIFFICULTY}]")
        clone = replace(source, id="e-" + uuid.uuid4().hex,
                        difficulty=new_difficulty, version=1)
        self.store.put(kinds.EXERCISE, clone.id, clone.to_doc(), expected_version=0)
        return clone

    def delete_exercise(self, exercise_id: str) -> None:
        self.get_exercise(exercise_id)
        referencing: list[str] = []
        for record in self.store.list(kinds.HOMEWORK):
            if exercise_id in record.payload["exercise_refs"]:
                referencing.append(f"homework/{record.id}")
        for kind, field in ((kinds.SESSION, "exercise_ref"),
                            (kinds.RESULT, "exercise_ref")):
            for record in self.store.list(kind):
                if record.payload[field] == exercise_id:
                    referencing.append(f"{kind}/{record.id}")
        if referencing:
            raise ReferencedElsewhere(
                f"exercise {exercise_id} is referenced by {len(referencing)} record(s)",
                referenced_by=referencing)
        self.store.delete(kinds.EXERCISE, exercise_id)

    def import_exercise(self, exercise: Exercise) -> None:
        """Insert an exercise under its existing id (offline bundle import)."""
        violations = self.validate(exercise)
        if violations:
            raise ValidationFailed(
                "imported exercise is invalid", [x.to_doc() for x in violations])
        self.store.put(kinds.EXERCISE, exercise.id, exercise.to_doc(),
                       expected_version=0)

    def formulate_prompt(self, word: WordEntry, template_kind: str) -> str:
        return formulate_prompt(word, template_kind, self.templates)
