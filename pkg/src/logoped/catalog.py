"""Multimedia catalog: recorded words, vocal productions and their assets.

The catalog owns validation of everything a therapist can record or type
into the element forms. Deletion refuses to orphan exercises: an entry
referenced by any stored exercise cannot be removed.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from enum import Enum

from . import kinds
from .errors import (
    DanglingAssetRef,
    FirstSyllableNotPrefix,
    GenderOnNonNoun,
    ImageOnNonNoun,
    InvalidField,
    MissingAudio,
    PairArityWrong,
    PairSoundAmbiguous,
    PartsArityWrong,
    PrefixChainBroken,
    ReferencedByExercise,
    StaleVersion,
    WrongAssetKind,
)
from .media import MediaAsset, MediaKind, MediaStore, build_asset
from .store import DocumentStore
from .text import SoundTag, detect_sounds, is_prefix, is_strict_prefix, normalize, sort_key


class PartOfSpeech(str, Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJECTIVE = "adjective"
    OTHER = "other"


class Gender(str, Enum):
    MASCULINE = "masculine"
    FEMININE = "feminine"
    NEUTER = "neuter"
    NOT_APPLICABLE = "not_applicable"


class ProductionKind(str, Enum):
    SYLLABLE = "syllable"
    PARONYM_PAIR = "paronym_pair"
    ONOMATOPOEIA = "onomatopoeia"
    MONOSYLLABLE_STRING = "monosyllable_string"
    PROGRESSIVE_ADDITION = "progressive_addition"
    SENTENCE = "sentence"


@dataclass(frozen=True)
class WordEntry:
    id: str
    text: str
    first_syllable: str
    part_of_speech: PartOfSpeech
    gender: Gender
    articulated: bool
    audio: str
    syllabified_audio: str | None
    image: str | None
    sounds: frozenset[SoundTag]
    sound_overrides: frozenset[SoundTag]
    version: int

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "first_syllable": self.first_syllable,
            "part_of_speech": self.part_of_speech.value,
            "gender": self.gender.value,
            "articulated": self.articulated,
            "audio": self.audio,
            "syllabified_audio": self.syllabified_audio,
            "image": self.image,
            "sounds": sorted(t.symbol for t in self.sounds),
            "sound_overrides": sorted(t.symbol for t in self.sound_overrides),
            "version": self.version,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "WordEntry":
        return cls(
            id=doc["id"],
            text=doc["text"],
            first_syllable=doc["first_syllable"],
            part_of_speech=PartOfSpeech(doc["part_of_speech"]),
            gender=Gender(doc["gender"]),
            articulated=doc["articulated"],
            audio=doc["audio"],
            syllabified_audio=doc.get("syllabified_audio"),
            image=doc.get("image"),
            sounds=frozenset(SoundTag(s) for s in doc["sounds"]),
            sound_overrides=frozenset(SoundTag(s) for s in doc.get("sound_overrides", [])),
            version=doc["version"],
        )


@dataclass(frozen=True)
class VocalProduction:
    id: str
    kind: ProductionKind
    text: str
    parts: tuple[str, ...]
    audio: str
    target_sound: SoundTag
    version: int

    @property
    def sound_bearing_index(self) -> int | None:
        """For paronym pairs: index of the member carrying the target sound."""
        if self.kind != ProductionKind.PARONYM_PAIR:
            return None
        for i, part in enumerate(self.parts):
            if self.target_sound.occurs_in(part):
                return i
        return None

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "text": self.text,
            "parts": list(self.parts),
            "audio": self.audio,
            "target_sound": self.target_sound.symbol,
            "version": self.version,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "VocalProduction":
        return cls(
            id=doc["id"],
            kind=ProductionKind(doc["kind"]),
            text=doc["text"],
            parts=tuple(doc["parts"]),
            audio=doc["audio"],
            target_sound=SoundTag(doc["target_sound"]),
            version=doc["version"],
        )


def validate_production_parts(kind: ProductionKind, parts: tuple[str, ...],
                              text: str, target_sound: SoundTag) -> None:
    """Kind-specific structural rules; raises the matching catalog error."""
    if not text:
        raise InvalidField("production text must be nonempty")
    if any(not p for p in parts):
        raise PartsArityWrong("parts must be nonempty strings")

    if kind == ProductionKind.PARONYM_PAIR:
        if len(parts) != 2:
            raise PairArityWrong(f"paronym pair needs exactly 2 members, got {len(parts)}")
        if normalize(parts[0]) == normalize(parts[1]):
            raise PairSoundAmbiguous("pair members must differ")
        bearing = [p for p in parts if target_sound.occurs_in(p)]
        if len(bearing) != 1:
            raise PairSoundAmbiguous(
                f"exactly one member must contain {target_sound}, found {len(bearing)}")
    elif kind == ProductionKind.PROGRESSIVE_ADDITION:
        if len(parts) < 2:
            raise PartsArityWrong("progressive addition needs at least 2 steps")
        for prev, nxt in zip(parts, parts[1:]):
            if not is_strict_prefix(prev, nxt):
                raise PrefixChainBroken(f"{prev!r} is not a strict prefix of {nxt!r}")
    elif kind == ProductionKind.MONOSYLLABLE_STRING:
        if len(parts) < 2:
            raise PartsArityWrong("monosyllable string needs at least 2 syllables")
        for part in parts:
            if not 1 <= len(part) <= 3:
                raise PartsArityWrong(f"syllable {part!r} must be 1-3 characters")
    elif kind == ProductionKind.SYLLABLE:
        if len(parts) != 1:
            raise PartsArityWrong("syllable production carries exactly 1 part")
    else:  # onomatopoeia, sentence
        if len(parts) != 1 or parts[0] != text:
            raise PartsArityWrong(f"{kind.value} carries exactly 1 part equal to its text")


class Catalog:
    """Search/add/edit/delete surface over assets, words and productions."""

    def __init__(self, store: DocumentStore, media: MediaStore):
        self.store = store
        self.media = media

    # -- media ------------------------------------------------------------

    def register_media(self, data: bytes, kind: MediaKind,
                       original_filename: str) -> MediaAsset:
        asset = build_asset(data, kind, original_filename)
        if self.store.exists(kinds.ASSET, asset.id):
            return MediaAsset.from_doc(self.store.get(kinds.ASSET, asset.id).payload)
        self.media.put(data)
        self.store.put(kinds.ASSET, asset.id, asset.to_doc(), expected_version=0)
        return asset

    def get_asset(self, asset_id: str) -> MediaAsset:
        return MediaAsset.from_doc(self.store.get(kinds.ASSET, asset_id).payload)

    def _require_asset(self, asset_id: str, kind: MediaKind, field: str) -> None:
        if not self.store.exists(kinds.ASSET, asset_id):
            raise DanglingAssetRef(f"{field} references unknown asset {asset_id}")
        asset = self.get_asset(asset_id)
        if asset.kind != kind:
            raise WrongAssetKind(f"{field} must reference a {kind.value} asset")

    # -- words ------------------------------------------------------------

    def _validate_word_fields(self, text: str, first_syllable: str,
                              part_of_speech: PartOfSpeech, gender: Gender,
                              audio: str | None, syllabified_audio: str | None,
                              image: str | None) -> None:
        if not text:
            raise InvalidField("word text must be nonempty")
        if not first_syllable or not is_prefix(first_syllable, text):
            raise FirstSyllableNotPrefix(
                f"{first_syllable!r} is not a nonempty prefix of {text!r}")
        if image is not None and part_of_speech != PartOfSpeech.NOUN:
            raise ImageOnNonNoun("only nouns may carry an image")
        if gender != Gender.NOT_APPLICABLE and part_of_speech != PartOfSpeech.NOUN:
            raise GenderOnNonNoun("gender applies to nouns only")
        if not audio:
            raise MissingAudio("a word requires its recorded audio")
        self._require_asset(audio, MediaKind.AUDIO, "audio")
        if syllabified_audio is not None:
            self._require_asset(syllabified_audio, MediaKind.AUDIO, "syllabified_audio")
        if image is not None:
            self._require_asset(image, MediaKind.IMAGE, "image")

    def create_word(self, text: str, first_syllable: str,
                    part_of_speech: PartOfSpeech, gender: Gender,
                    articulated: bool, audio: str,
                    syllabified_audio: str | None = None,
                    image: str | None = None,
                    sound_overrides: frozenset[SoundTag] | set[SoundTag] = frozenset(),
                    ) -> WordEntry:
        self._validate_word_fields(text, first_syllable, part_of_speech, gender,
                                   audio, syllabified_audio, image)
        overrides = frozenset(sound_overrides)
        word = WordEntry(
            id="w-" + uuid.uuid4().hex,
            text=text,
            first_syllable=first_syllable,
            part_of_speech=part_of_speech,
            gender=gender,
            articulated=articulated,
            audio=audio,
            syllabified_audio=syllabified_audio,
            image=image,
            sounds=frozenset(detect_sounds(text)) | overrides,
            sound_overrides=overrides,
            version=1,
        )
        self.store.put(kinds.WORD, word.id, word.to_doc(), expected_version=0)
        return word

    def get_word(self, word_id: str) -> WordEntry:
        return WordEntry.from_doc(self.store.get(kinds.WORD, word_id).payload)

    def update_word(self, word_id: str, new_fields: dict,
                    expected_version: int) -> WordEntry:
        """Re-validated partial update; fails on a stale version counter."""
        current = self.get_word(word_id)
        if current.version != expected_version:
            raise StaleVersion(
                f"{word_id}: expected version {expected_version}, "
                f"stored is {current.version}",
                id=word_id, stored_version=current.version)
        allowed = {"text", "first_syllable", "part_of_speech", "gender",
                   "articulated", "audio", "syllabified_audio", "image",
                   "sound_overrides"}
        unknown = set(new_fields) - allowed
        if unknown:
            raise InvalidField(f"unknown word fields: {sorted(unknown)}")
        merged = {
            "text": current.text,
            "first_syllable": current.first_syllable,
            "part_of_speech": current.part_of_speech,
            "gender": current.gender,
            "articulated": current.articulated,
            "audio": current.audio,
            "syllabified_audio": current.syllabified_audio,
            "image": current.image,
            "sound_overrides": current.sound_overrides,
        }
        merged.update(new_fields)
        if isinstance(merged["part_of_speech"], str):
            merged["part_of_speech"] = PartOfSpeech(merged["part_of_speech"])
        if isinstance(merged["gender"], str):
            merged["gender"] = Gender(merged["gender"])
        merged["sound_overrides"] = frozenset(
            t if isinstance(t, SoundTag) else SoundTag.of(t)
            for t in merged["sound_overrides"])
        self._validate_word_fields(
            merged["text"], merged["first_syllable"], merged["part_of_speech"],
            merged["gender"], merged["audio"], merged["syllabified_audio"],
            merged["image"])
        updated = replace(
            current,
            text=merged["text"],
            first_syllable=merged["first_syllable"],
            part_of_speech=merged["part_of_speech"],
            gender=merged["gender"],
            articulated=merged["articulated"],
            audio=merged["audio"],
            syllabified_audio=merged["syllabified_audio"],
            image=merged["image"],
            sounds=frozenset(detect_sounds(merged["text"])) | merged["sound_overrides"],
            sound_overrides=merged["sound_overrides"],
            version=current.version + 1,
        )
        self.store.put(kinds.WORD, word_id, updated.to_doc(),
                       expected_version=expected_version)
        return updated

    def _exercises_referencing(self, ref_kind: str, entry_id: str) -> list[str]:
        hits = []
        for record in self.store.list(kinds.EXERCISE):
            for item in record.payload["items"]:
                ref = item["ref"]
                if ref["kind"] == ref_kind and ref["id"] == entry_id:
                    hits.append(record.id)
                    break
        return hits

    def delete_word(self, word_id: str) -> None:
        self.get_word(word_id)
        used_by = self._exercises_referencing("word", word_id)
        if used_by:
            raise ReferencedByExercise(
                f"word {word_id} is used by {len(used_by)} exercise(s)", used_by)
        self.store.delete(kinds.WORD, word_id)

    def search_words(self, query: str = "", sound: SoundTag | None = None,
                     part_of_speech: PartOfSpeech | None = None) -> list[WordEntry]:
        """Substring search (case-insensitive, diacritic-preserving), with
        optional sound/part-of-speech filters; stable text-then-id order."""
        needle = normalize(query)
        results = []
        for record in self.store.list(kinds.WORD):
            word = WordEntry.from_doc(record.payload)
            if needle and needle not in normalize(word.text):
                continue
            if sound is not None and sound not in word.sounds:
                continue
            if part_of_speech is not None and word.part_of_speech != part_of_speech:
                continue
            results.append(word)
        results.sort(key=lambda w: (*sort_key(w.text), w.id))
        return results

    def list_words(self) -> list[WordEntry]:
        return self.search_words()

    # -- vocal productions --------------------------------------------------

    def create_production(self, kind: ProductionKind, parts: list[str] | tuple[str, ...],
                          text: str, target_sound: SoundTag, audio: str) -> VocalProduction:
        parts_t = tuple(parts)
        validate_production_parts(kind, parts_t, text, target_sound)
        if not audio:
            raise MissingAudio("a vocal production requires its recorded audio")
        self._require_asset(audio, MediaKind.AUDIO, "audio")
        production = VocalProduction(
            id="p-" + uuid.uuid4().hex,
            kind=kind,
            text=text,
            parts=parts_t,
            audio=audio,
            target_sound=target_sound,
            version=1,
        )
        self.store.put(kinds.PRODUCTION, production.id, production.to_doc(),
                       expected_version=0)
        return production

    def get_production(self, production_id: str) -> VocalProduction:
        return VocalProduction.from_doc(
            self.store.get(kinds.PRODUCTION, production_id).payload)

    def delete_production(self, production_id: str) -> None:
        self.get_production(production_id)
        used_by = self._exercises_referencing("production", production_id)
        if used_by:
            raise ReferencedByExercise(
                f"production {production_id} is used by {len(used_by)} exercise(s)",
                used_by)
        self.store.delete(kinds.PRODUCTION, production_id)

    def list_productions(self, kind: ProductionKind | None = None) -> list[VocalProduction]:
        records = self.store.list(
            kinds.PRODUCTION,
            where=None if kind is None else (lambda p: p["kind"] == kind.value))
        return [VocalProduction.from_doc(r.payload) for r in records]

    # -- bundle import support ---------------------------------------------

    def import_word(self, word: WordEntry) -> None:
        """Insert a word under its existing id (offline bundle import)."""
        self._validate_word_fields(word.text, word.first_syllable,
                                   word.part_of_speech, word.gender, word.audio,
                                   word.syllabified_audio, word.image)
        self.store.put(kinds.WORD, word.id, word.to_doc(), expected_version=0)

    def import_production(self, production: VocalProduction) -> None:
        validate_production_parts(production.kind, production.parts,
                                  production.text, production.target_sound)
        self._require_asset(production.audio, MediaKind.AUDIO, "audio")
        self.store.put(kinds.PRODUCTION, production.id, production.to_doc(),
                       expected_version=0)
