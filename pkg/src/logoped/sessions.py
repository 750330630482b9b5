"""Timed interactive session runtime.

A session walks the exercise's items, scores each submitted choice
against a precomputed answer key, rewards correct choices with flowers,
and queues wrong or timed-out main-phase items for a single retry round.
The engine owns no clock: callers report elapsed milliseconds, which is
what makes event sequences replayable bit-for-bit.

Choice convention (1-based display positions):
  - paronym pair items (pennants, pair discrimination): 1 or 2, the
    pennant/word position; correct is the sound-bearing member's slot.
  - all other items: 1 affirms the asked predicate ("the word carries the
    sound"; for intruder exercises "this is the intruder"), 2 denies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .catalog import ProductionKind, VocalProduction
from .errors import (
    ElapsedExceedsWindow,
    ExerciseInvalid,
    InvalidField,
    MalformedLog,
    SessionFinished,
    SessionNotFinished,
)
from .exercises import Entry, Exercise, ExerciseItem, ExerciseType, ItemRef, validate_exercise


class Phase(str, Enum):
    MAIN = "main"
    RETRY = "retry"
    FINISHED = "finished"


class Result(str, Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class ItemOutcome:
    item_index: int
    phase: Phase
    choice: int | None  # display position; None = no answer
    elapsed_ms: int
    result: Result

    def to_doc(self) -> dict:
        return {
            "item_index": self.item_index,
            "phase": self.phase.value,
            "choice": self.choice,
            "elapsed_ms": self.elapsed_ms,
            "result": self.result.value,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ItemOutcome":
        return cls(
            item_index=doc["item_index"],
            phase=Phase(doc["phase"]),
            choice=doc["choice"],
            elapsed_ms=doc["elapsed_ms"],
            result=Result(doc["result"]),
        )


@dataclass
class Session:
    id: str
    exercise_id: str
    child_id: str
    phase: Phase
    cursor: int
    pending_retry: list[int]
    outcomes: list[ItemOutcome]
    flowers: int
    started_at: str
    answer_key: tuple[int, ...]
    windows_ms: tuple[int, ...]
    item_count: int
    version: int = 1

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "exercise_ref": self.exercise_id,
            "child_ref": self.child_id,
            "phase": self.phase.value,
            "cursor": self.cursor,
            "pending_retry": list(self.pending_retry),
            "outcomes": [o.to_doc() for o in self.outcomes],
            "flowers": self.flowers,
            "started_at": self.started_at,
            "answer_key": list(self.answer_key),
            "windows_ms": list(self.windows_ms),
            "item_count": self.item_count,
            "version": self.version,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Session":
        return cls(
            id=doc["id"],
            exercise_id=doc["exercise_ref"],
            child_id=doc["child_ref"],
            phase=Phase(doc["phase"]),
            cursor=doc["cursor"],
            pending_retry=list(doc["pending_retry"]),
            outcomes=[ItemOutcome.from_doc(d) for d in doc["outcomes"]],
            flowers=doc["flowers"],
            started_at=doc["started_at"],
            answer_key=tuple(doc["answer_key"]),
            windows_ms=tuple(doc["windows_ms"]),
            item_count=doc["item_count"],
            version=doc["version"],
        )


@dataclass(frozen=True)
class ItemPresentation:
    item_index: int
    phase: Phase
    ref: ItemRef
    deadline_ms: int
    pair_order: tuple[int, int] | None
    progress: tuple[int, int]  # (position, total) within the current phase


@dataclass(frozen=True)
class SessionResult:
    id: str
    exercise_id: str
    child_id: str
    finished_at: str
    accuracy: Fraction
    flowers: int
    outcomes: tuple[ItemOutcome, ...]

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "exercise_ref": self.exercise_id,
            "child_ref": self.child_id,
            "finished_at": self.finished_at,
            "accuracy": str(self.accuracy),
            "flowers": self.flowers,
            "outcomes": [o.to_doc() for o in self.outcomes],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SessionResult":
        return cls(
            id=doc["id"],
            exercise_id=doc["exercise_ref"],
            child_id=doc["child_ref"],
            finished_at=doc["finished_at"],
            accuracy=Fraction(doc["accuracy"]),
            flowers=doc["flowers"],
            outcomes=tuple(ItemOutcome.from_doc(d) for d in doc["outcomes"]),
        )


def _bearing_position(item: ExerciseItem, entry: VocalProduction,
                      exercise: Exercise) -> int:
    """Displayed 1-based position of the pair member carrying the sound.

    The exercise's target sound decides; if both or neither member carry
    it (possible for incidental letters), the pair's authored target wins.
    """
    carrying = [i for i, p in enumerate(entry.parts)
                if exercise.target_sound.occurs_in(p)]
    if len(carrying) == 1:
        bearing = carrying[0]
    else:
        bearing = entry.sound_bearing_index or 0
    order = item.pair_order or (0, 1)
    return order.index(bearing) + 1


def build_answer_key(exercise: Exercise,
                     resolve: Callable[[ItemRef], Entry | None]) -> tuple[int, ...]:
    key = []
    for item in exercise.items:
        entry = resolve(item.ref)
        if entry is None:
            raise ExerciseInvalid(f"item references missing {item.ref.kind} {item.ref.id}")
        if isinstance(entry, VocalProduction) and entry.kind == ProductionKind.PARONYM_PAIR:
            key.append(_bearing_position(item, entry, exercise))
        elif exercise.type == ExerciseType.INTRUDER_RECOGNITION:
            key.append(1 if not item.contains_target else 2)
        else:
            key.append(1 if item.contains_target else 2)
    return tuple(key)


def start_session(exercise: Exercise, child_id: str, session_id: str,
                  started_at: str,
                  resolve: Callable[[ItemRef], Entry | None]) -> Session:
    violations = validate_exercise(exercise, resolve)
    if violations:
        raise ExerciseInvalid(
            f"exercise {exercise.id} fails validation: "
            + "; ".join(v.code for v in violations))
    return Session(
        id=session_id,
        exercise_id=exercise.id,
        child_id=child_id,
        phase=Phase.MAIN,
        cursor=0,
        pending_retry=[],
        outcomes=[],
        flowers=0,
        started_at=started_at,
        answer_key=build_answer_key(exercise, resolve),
        windows_ms=tuple(item.response_window_s * 1000 for item in exercise.items),
        item_count=len(exercise.items),
    )


def _current_index(session: Session) -> int:
    if session.phase == Phase.MAIN:
        return session.cursor
    return session.pending_retry[session.cursor]


def present_next(session: Session, exercise: Exercise) -> ItemPresentation:
    """Current item and its deadline; idempotent until an event advances."""
    if session.phase == Phase.FINISHED:
        raise SessionFinished(f"session {session.id} is finished")
    index = _current_index(session)
    item = exercise.items[index]
    total = (session.item_count if session.phase == Phase.MAIN
             else len(session.pending_retry))
    return ItemPresentation(
        item_index=index,
        phase=session.phase,
        ref=item.ref,
        deadline_ms=session.windows_ms[index],
        pair_order=item.pair_order,
        progress=(session.cursor + 1, total),
    )


def _advance(session: Session, outcome: ItemOutcome) -> None:
    session.outcomes.append(outcome)
    if outcome.result == Result.CORRECT:
        session.flowers += 1
    if session.phase == Phase.MAIN:
        if outcome.result != Result.CORRECT:
            session.pending_retry.append(outcome.item_index)
        session.cursor += 1
        if session.cursor >= session.item_count:
            if session.pending_retry:
                session.phase = Phase.RETRY
                session.cursor = 0
            else:
                session.phase = Phase.FINISHED
    else:  # retry runs once; failures are not re-queued
        session.cursor += 1
        if session.cursor >= len(session.pending_retry):
            session.phase = Phase.FINISHED


def submit_answer(session: Session, choice: int, elapsed_ms: int) -> ItemOutcome:
    if session.phase == Phase.FINISHED:
        raise SessionFinished(f"session {session.id} is finished")
    if not isinstance(choice, int) or choice < 1:
        raise InvalidField(f"choice must be a 1-based position, got {choice!r}")
    if elapsed_ms < 0:
        raise InvalidField("elapsed_ms must be >= 0")
    index = _current_index(session)
    window = session.windows_ms[index]
    if elapsed_ms >= window:
        raise ElapsedExceedsWindow(
            f"elapsed {elapsed_ms}ms is not inside the {window}ms window; "
            f"expire the item instead")
    result = Result.CORRECT if choice == session.answer_key[index] else Result.INCORRECT
    outcome = ItemOutcome(item_index=index, phase=session.phase, choice=choice,
                          elapsed_ms=elapsed_ms, result=result)
    _advance(session, outcome)
    return outcome


def expire_item(session: Session) -> ItemOutcome:
    if session.phase == Phase.FINISHED:
        raise SessionFinished(f"session {session.id} is finished")
    index = _current_index(session)
    outcome = ItemOutcome(item_index=index, phase=session.phase, choice=None,
                          elapsed_ms=session.windows_ms[index], result=Result.TIMEOUT)
    _advance(session, outcome)
    return outcome


def compute_accuracy(outcomes: Iterable[ItemOutcome], item_count: int) -> Fraction:
    """Main-phase correct count over item count, as an exact rational."""
    if item_count < 1:
        raise MalformedLog("item_count must be >= 1")
    seen_main: set[int] = set()
    correct = 0
    for outcome in outcomes:
        if not 0 <= outcome.item_index < item_count:
            raise MalformedLog(f"item index {outcome.item_index} out of range")
        if (outcome.result == Result.TIMEOUT) != (outcome.choice is None):
            raise MalformedLog("timeout and no_answer must coincide")
        if outcome.phase == Phase.MAIN:
            if outcome.item_index in seen_main:
                raise MalformedLog(
                    f"duplicate main-phase outcome for item {outcome.item_index}")
            seen_main.add(outcome.item_index)
            if outcome.result == Result.CORRECT:
                correct += 1
    return Fraction(correct, item_count)


def finalize_session(session: Session, finished_at: str) -> SessionResult:
    if session.phase != Phase.FINISHED:
        raise SessionNotFinished(
            f"session {session.id} is in phase {session.phase.value}")
    return SessionResult(
        id=session.id,
        exercise_id=session.exercise_id,
        child_id=session.child_id,
        finished_at=finished_at,
        accuracy=compute_accuracy(session.outcomes, session.item_count),
        flowers=session.flowers,
        outcomes=tuple(session.outcomes),
    )


# Replayable event protocol: ("answer", choice, elapsed_ms) | ("expire",)
SessionEvent = tuple


def replay_session(exercise: Exercise, child_id: str, session_id: str,
                   started_at: str, events: Sequence[SessionEvent],
                   finished_at: str,
                   resolve: Callable[[ItemRef], Entry | None]) -> SessionResult:
    """Run a recorded event sequence from a fresh session to its result."""
    session = start_session(exercise, child_id, session_id, started_at, resolve)
    for event in events:
        if event[0] == "answer":
            submit_answer(session, event[1], event[2])
        elif event[0] == "expire":
            expire_item(session)
        else:
            raise MalformedLog(f"unknown session event {event[0]!r}")
    return finalize_session(session, finished_at)
