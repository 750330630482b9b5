"""Error types shared across the engine, the HTTP API and the CLI.

Every error carries a stable machine code (the class name) and an HTTP
status so the API layer can map failures without per-endpoint tables.
"""

from __future__ import annotations

from typing import Any


class LogopedError(Exception):
    """Base class; ``code`` is a stable token, ``details`` is JSON-safe."""

    http_status = 400

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def as_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


# -- lookup / versioning ------------------------------------------------

class NotFound(LogopedError):
    http_status = 404


class StaleVersion(LogopedError):
    http_status = 409


class ReferencedByExercise(LogopedError):
    """Deletion refused: entry is used by one or more exercises."""

    http_status = 409

    def __init__(self, message: str, exercise_ids: list[str]):
        super().__init__(message, exercise_ids=exercise_ids)
        self.exercise_ids = exercise_ids


class ReferencedElsewhere(LogopedError):
    http_status = 409


# -- media ---------------------------------------------------------------

class EmptyFile(LogopedError):
    http_status = 422


class UndecodableAudioHeader(LogopedError):
    http_status = 422


class UnsupportedImageFormat(LogopedError):
    http_status = 422


# -- catalog -------------------------------------------------------------

class InvalidField(LogopedError):
    http_status = 422


class InvalidSoundTag(LogopedError):
    http_status = 422


class MissingAudio(LogopedError):
    http_status = 422


class FirstSyllableNotPrefix(LogopedError):
    http_status = 422


class ImageOnNonNoun(LogopedError):
    http_status = 422


class GenderOnNonNoun(LogopedError):
    http_status = 422


class DanglingAssetRef(LogopedError):
    http_status = 422


class WrongAssetKind(LogopedError):
    http_status = 422


class PrefixChainBroken(LogopedError):
    http_status = 422


class PairArityWrong(LogopedError):
    http_status = 422


class PairSoundAmbiguous(LogopedError):
    http_status = 422


class PartsArityWrong(LogopedError):
    http_status = 422


# -- exercises -----------------------------------------------------------

class ValidationFailed(LogopedError):
    http_status = 422

    def __init__(self, message: str, violations: list[dict[str, Any]]):
        super().__init__(message, violations=violations)
        self.violations = violations


class DanglingRef(LogopedError):
    http_status = 422


class DifficultyOutOfRange(LogopedError):
    http_status = 422


class UnknownTemplate(LogopedError):
    http_status = 422


# -- sessions ------------------------------------------------------------

class ExerciseInvalid(LogopedError):
    http_status = 422


class SessionFinished(LogopedError):
    http_status = 409


class SessionNotFinished(LogopedError):
    http_status = 409


class SessionBusy(LogopedError):
    http_status = 409


class ElapsedExceedsWindow(LogopedError):
    http_status = 422


class MalformedLog(LogopedError):
    http_status = 422


# -- homework ------------------------------------------------------------

class EmptyExerciseList(LogopedError):
    http_status = 422


class NoExercisesForImpairedSounds(LogopedError):
    http_status = 422


class UnfinalizedResult(LogopedError):
    http_status = 422


# -- bundles -------------------------------------------------------------

class CorruptArchive(LogopedError):
    http_status = 422


class HashMismatch(LogopedError):
    http_status = 422


class UnsupportedVersion(LogopedError):
    http_status = 422


class MissingMedia(LogopedError):
    http_status = 422

    def __init__(self, message: str, hashes: list[str]):
        super().__init__(message, hashes=hashes)
        self.hashes = hashes


class AccuracyMismatch(LogopedError):
    http_status = 422


class UnknownExercise(LogopedError):
    http_status = 422


class ImportConflict(LogopedError):
    http_status = 409


# -- store ---------------------------------------------------------------

class UnsupportedStoreSchema(LogopedError):
    http_status = 500
