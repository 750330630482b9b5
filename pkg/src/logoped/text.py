"""Romanian text handling: normalization, sound tags and sound detection.

Comparison throughout the catalog is case-insensitive but diacritic
preserving: "s" and "ș" are distinct therapy targets. Legacy cedilla
codepoints (ş, ţ) are folded onto the standard comma-below letters so
material imported from old Windows-1250 sources compares equal.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass

from .errors import InvalidField, InvalidSoundTag

# s/t with cedilla -> s/t with comma below, both cases
_CEDILLA_MAP = str.maketrans({
    "ş": "ș",  # ş -> ș
    "Ş": "Ș",  # Ş -> Ș
    "ţ": "ț",  # ţ -> ț
    "Ţ": "Ț",  # Ţ -> Ț
})

ROMANIAN_LETTERS = set("AĂÂBCDEFGHIÎJKLMNOPQRSȘTȚUVWXYZ")


def normalize(text: str) -> str:
    """Lowercased NFC form with cedilla variants unified; diacritics kept."""
    return unicodedata.normalize("NFC", text).translate(_CEDILLA_MAP).lower()


def contains(haystack: str, needle: str) -> bool:
    """Case-insensitive, diacritic-preserving substring test."""
    return normalize(needle) in normalize(haystack)


def is_prefix(prefix: str, text: str) -> bool:
    return normalize(text).startswith(normalize(prefix))


def is_strict_prefix(prefix: str, text: str) -> bool:
    a, b = normalize(prefix), normalize(text)
    return b.startswith(a) and a != b


@dataclass(frozen=True, order=True)
class SoundTag:
    """A target sound named by 1-2 Romanian letters, stored uppercase."""

    symbol: str

    @classmethod
    def of(cls, symbol: str) -> "SoundTag":
        cleaned = unicodedata.normalize("NFC", symbol.strip()).translate(_CEDILLA_MAP).upper()
        if not 1 <= len(cleaned) <= 2:
            raise InvalidSoundTag(f"sound tag must be 1-2 letters, got {symbol!r}")
        for ch in cleaned:
            if ch not in ROMANIAN_LETTERS:
                raise InvalidSoundTag(f"{ch!r} is not a Romanian letter")
        return cls(cleaned)

    def occurs_in(self, text: str) -> bool:
        return contains(text, self.symbol)

    def __str__(self) -> str:
        return self.symbol


def detect_sounds(text: str) -> set[SoundTag]:
    """Every single-letter sound occurring in ``text`` (grapheme scan).

    Digraph sounds (CE, GI, ...) are never auto-detected; therapists tag
    those explicitly as overrides on the word.
    """
    if not text:
        raise InvalidField("text must be nonempty")
    found: set[SoundTag] = set()
    for ch in normalize(text):
        upper = ch.upper()
        if upper in ROMANIAN_LETTERS:
            found.add(SoundTag(upper))
    return found


def sort_key(text: str) -> tuple[str, str]:
    """Deterministic lexicographic key: normalized form first, raw second."""
    return (normalize(text), text)
