"""Child profiles, score history and homework generation.

Auto-generation is deliberately boring and auditable: pick the impaired
sound with the worst rolling accuracy, map that accuracy to a difficulty
goal, then choose the closest-difficulty exercises, preferring ones the
child has not seen recently. The trace of every decision is stored on
the homework itself so a therapist can see why the system chose what it
chose.
"""

from __future__ import annotations

import hashlib
import logging
import math
import uuid
from bisect import insort
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from fractions import Fraction

from . import kinds
from .errors import (
    EmptyExerciseList,
    InvalidField,
    NoExercisesForImpairedSounds,
    UnfinalizedResult,
)
from .exercises import ExerciseBuilder
from .sessions import SessionResult
from .store import DocumentStore, canonical_json
from .text import SoundTag

logger = logging.getLogger(__name__)

ROLLING_WINDOW = 5
EXPECTED_AGE_RANGE = (4, 7)


class HomeworkOrigin(str, Enum):
    MANUAL = "manual"
    AUTO = "auto"


@dataclass(frozen=True)
class ChildProfile:
    id: str
    name: str
    birth_year: int
    impaired_sounds: frozenset[SoundTag]
    report_notes: str
    version: int

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "birth_year": self.birth_year,
            "impaired_sounds": sorted(t.symbol for t in self.impaired_sounds),
            "report_notes": self.report_notes,
            "version": self.version,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ChildProfile":
        return cls(
            id=doc["id"],
            name=doc["name"],
            birth_year=doc["birth_year"],
            impaired_sounds=frozenset(SoundTag(s) for s in doc["impaired_sounds"]),
            report_notes=doc.get("report_notes", ""),
            version=doc["version"],
        )


@dataclass(frozen=True)
class Homework:
    id: str
    child_id: str
    exercise_refs: tuple[str, ...]
    origin: HomeworkOrigin
    assigned_at: str
    policy_trace: str

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "child_ref": self.child_id,
            "exercise_refs": list(self.exercise_refs),
            "origin": self.origin.value,
            "assigned_at": self.assigned_at,
            "policy_trace": self.policy_trace,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Homework":
        return cls(
            id=doc["id"],
            child_id=doc["child_ref"],
            exercise_refs=tuple(doc["exercise_refs"]),
            origin=HomeworkOrigin(doc["origin"]),
            assigned_at=doc["assigned_at"],
            policy_trace=doc.get("policy_trace", ""),
        )


@dataclass(frozen=True)
class ScoreEntry:
    session_id: str
    finished_at: str
    target_sound: SoundTag
    difficulty: int
    accuracy: Fraction

    def to_doc(self) -> dict:
        return {
            "session_id": self.session_id,
            "finished_at": self.finished_at,
            "target_sound": self.target_sound.symbol,
            "difficulty": self.difficulty,
            "accuracy": str(self.accuracy),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ScoreEntry":
        return cls(
            session_id=doc["session_id"],
            finished_at=doc["finished_at"],
            target_sound=SoundTag(doc["target_sound"]),
            difficulty=doc["difficulty"],
            accuracy=Fraction(doc["accuracy"]),
        )


@dataclass(frozen=True)
class ProgressPoint:
    date: str
    accuracy: Fraction
    difficulty: int

    def to_doc(self) -> dict:
        return {"date": self.date, "accuracy": str(self.accuracy),
                "difficulty": self.difficulty}


def rolling_accuracy(entries: list[ScoreEntry], sound: SoundTag,
                     window_n: int = ROLLING_WINDOW) -> Fraction | None:
    """Mean accuracy of the newest ``window_n`` entries for ``sound``;
    None when the child has never practiced the sound."""
    if window_n < 1:
        raise InvalidField("window_n must be >= 1")
    relevant = [e.accuracy for e in entries if e.target_sound == sound]
    if not relevant:
        return None
    tail = relevant[-window_n:]
    return sum(tail, Fraction(0)) / len(tail)


def difficulty_goal(accuracy: Fraction | None) -> int:
    """Accuracy band to target difficulty: absent history starts at 1,
    perfect history caps at 5."""
    if accuracy is None:
        return 1
    return min(5, 1 + math.floor(accuracy * 5))


class HomeworkManager:
    def __init__(self, store: DocumentStore, builder: ExerciseBuilder):
        self.store = store
        self.builder = builder

    # -- children ----------------------------------------------------------

    def create_child(self, name: str, birth_year: int,
                     impaired_sounds: set[SoundTag] | frozenset[SoundTag],
                     report_notes: str = "",
                     current_year: int | None = None,
                     ) -> tuple[ChildProfile, list[str]]:
        if not name:
            raise InvalidField("child name must be nonempty")
        if not impaired_sounds:
            raise InvalidField("at least one impaired sound is required")
        warnings: list[str] = []
        year = current_year if current_year is not None else datetime.now().year
        age = year - birth_year
        if not EXPECTED_AGE_RANGE[0] <= age <= EXPECTED_AGE_RANGE[1]:
            msg = (f"age {age} is outside the expected {EXPECTED_AGE_RANGE[0]}-"
                   f"{EXPECTED_AGE_RANGE[1]} range for this therapy material")
            warnings.append(msg)
            logger.warning("%s (birth year %s)", msg, birth_year)
        child = ChildProfile(
            id="c-" + uuid.uuid4().hex,
            name=name,
            birth_year=birth_year,
            impaired_sounds=frozenset(impaired_sounds),
            report_notes=report_notes,
            version=1,
        )
        self.store.put(kinds.CHILD, child.id, child.to_doc(), expected_version=0)
        return child, warnings

    def get_child(self, child_id: str) -> ChildProfile:
        return ChildProfile.from_doc(self.store.get(kinds.CHILD, child_id).payload)

    def list_children(self) -> list[ChildProfile]:
        return [ChildProfile.from_doc(r.payload) for r in self.store.list(kinds.CHILD)]

    # -- score history -------------------------------------------------------

    def history_entries(self, child_id: str) -> list[ScoreEntry]:
        if not self.store.exists(kinds.HISTORY, child_id):
            return []
        doc = self.store.get(kinds.HISTORY, child_id).payload
        return [ScoreEntry.from_doc(d) for d in doc["entries"]]

    def record_result(self, result: SessionResult) -> None:
        """Append to the child's score history; duplicates are ignored."""
        if not result.finished_at:
            raise UnfinalizedResult("result carries no finished_at timestamp")
        self.get_child(result.child_id)
        exercise = self.builder.get_exercise(result.exercise_id)
        entries = self.history_entries(result.child_id)
        if any(e.session_id == result.id for e in entries):
            return
        entry = ScoreEntry(
            session_id=result.id,
            finished_at=result.finished_at,
            target_sound=exercise.target_sound,
            difficulty=exercise.difficulty,
            accuracy=result.accuracy,
        )
        keyed = [((e.finished_at, e.session_id), e) for e in entries]
        insort(keyed, ((entry.finished_at, entry.session_id), entry))
        doc = {"child_ref": result.child_id,
               "entries": [e.to_doc() for _, e in keyed]}
        version = (self.store.get(kinds.HISTORY, result.child_id).version
                   if self.store.exists(kinds.HISTORY, result.child_id) else 0)
        self.store.put(kinds.HISTORY, result.child_id, doc, expected_version=version)

    def progression_report(self, child_id: str, sound: SoundTag,
                           from_date: str | None = None,
                           to_date: str | None = None) -> list[ProgressPoint]:
        """Chronological accuracy/difficulty series for one sound."""
        self.get_child(child_id)
        points = []
        for entry in self.history_entries(child_id):
            if entry.target_sound != sound:
                continue
            if from_date is not None and entry.finished_at < from_date:
                continue
            if to_date is not None and entry.finished_at > to_date:
                continue
            points.append(ProgressPoint(date=entry.finished_at,
                                        accuracy=entry.accuracy,
                                        difficulty=entry.difficulty))
        return points

    # -- homework ------------------------------------------------------------

    def _homework_id(self, doc: dict) -> str:
        digest = hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()
        return "hw-" + digest[:16]

    def _persist_homework(self, child_id: str, exercise_refs: tuple[str, ...],
                          origin: HomeworkOrigin, assigned_at: str,
                          policy_trace: str) -> Homework:
        body = {
            "child_ref": child_id,
            "exercise_refs": list(exercise_refs),
            "origin": origin.value,
            "assigned_at": assigned_at,
            "policy_trace": policy_trace,
        }
        homework = Homework(
            id=self._homework_id(body),
            child_id=child_id,
            exercise_refs=exercise_refs,
            origin=origin,
            assigned_at=assigned_at,
            policy_trace=policy_trace,
        )
        if self.store.exists(kinds.HOMEWORK, homework.id):
            return homework  # identical content, already assigned
        self.store.put(kinds.HOMEWORK, homework.id, homework.to_doc(),
                       expected_version=0)
        return homework

    def assign_homework(self, child_id: str, exercise_ids: list[str],
                        assigned_at: str) -> Homework:
        if not exercise_ids:
            raise EmptyExerciseList("homework needs at least one exercise")
        self.get_child(child_id)
        for exercise_id in exercise_ids:
            self.builder.get_exercise(exercise_id)
        return self._persist_homework(child_id, tuple(exercise_ids),
                                      HomeworkOrigin.MANUAL, assigned_at, "")

    def get_homework(self, homework_id: str) -> Homework:
        return Homework.from_doc(self.store.get(kinds.HOMEWORK, homework_id).payload)

    def list_homework(self, child_id: str | None = None) -> list[Homework]:
        records = self.store.list(
            kinds.HOMEWORK,
            where=None if child_id is None
            else (lambda p: p["child_ref"] == child_id))
        return [Homework.from_doc(r.payload) for r in records]

    def _last_assigned(self, child_id: str) -> dict[str, str]:
        last: dict[str, str] = {}
        for homework in self.list_homework(child_id):
            for exercise_id in homework.exercise_refs:
                stamp = last.get(exercise_id, "")
                if homework.assigned_at > stamp:
                    last[exercise_id] = homework.assigned_at
        return last

    def auto_generate_homework(self, child_id: str, k_exercises: int,
                               assigned_at: str) -> Homework:
        """Deterministic generation from the rolling per-sound accuracy."""
        if k_exercises < 1:
            raise InvalidField("k_exercises must be >= 1")
        child = self.get_child(child_id)
        entries = self.history_entries(child_id)

        by_sound = {sound: self.builder.list_exercises(target_sound=sound)
                    for sound in child.impaired_sounds}
        available = sorted(s for s, exercises in by_sound.items() if exercises)
        if not available:
            raise NoExercisesForImpairedSounds(
                "no stored exercise targets any of the child's impaired sounds")

        accuracies = {s: rolling_accuracy(entries, s, ROLLING_WINDOW)
                      for s in available}
        # absent history counts as zero: untested sounds are most urgent
        target = min(available,
                     key=lambda s: (accuracies[s] if accuracies[s] is not None
                                    else Fraction(0), s.symbol))
        accuracy = accuracies[target]
        goal = difficulty_goal(accuracy)

        last = self._last_assigned(child_id)
        candidates = sorted(
            by_sound[target],
            key=lambda e: (abs(e.difficulty - goal), last.get(e.id, ""), e.id))
        chosen = tuple(e.id for e in candidates[:k_exercises])
        trace = (f"target={target.symbol} "
                 f"accuracy={'absent' if accuracy is None else str(accuracy)} "
                 f"difficulty_goal={goal}")
        return self._persist_homework(child_id, chosen, HomeworkOrigin.AUTO,
                                      assigned_at, trace)
