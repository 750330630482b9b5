"""Content-addressed media storage and container header probing.

Blobs live under ``<root>/media/<first two hash chars>/<hash>``; the hash
is the asset identity, so identical bytes are stored once no matter how
often they are registered. Audio duration is read from container headers
only (WAV fmt/data chunks, MP3 frame headers) - samples are never decoded.
"""

from __future__ import annotations

import hashlib
import io
import wave
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import EmptyFile, UndecodableAudioHeader, UnsupportedImageFormat

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"

# MPEG audio frame header tables (bitrate in kbit/s, sample rate in Hz)
_MP3_BITRATES = {
    (1, 3): [0, 32, 40, 48, 56, 64, 80, 96, 112, 128, 160, 192, 224, 256, 320],
    (2, 3): [0, 8, 16, 24, 32, 40, 48, 56, 64, 80, 96, 112, 128, 144, 160],
}
_MP3_SAMPLE_RATES = {1: [44100, 48000, 32000], 2: [22050, 24000, 16000], 2.5: [11025, 12000, 8000]}
_MP3_SAMPLES_PER_FRAME = {1: 1152, 2: 576, 2.5: 576}


class MediaKind(str, Enum):
    AUDIO = "audio"
    IMAGE = "image"


@dataclass(frozen=True)
class MediaAsset:
    """Metadata for one stored blob; the bytes live in the MediaStore."""

    id: str
    kind: MediaKind
    content_hash: str
    byte_size: int
    duration_ms: int | None
    original_filename: str

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "content_hash": self.content_hash,
            "byte_size": self.byte_size,
            "duration_ms": self.duration_ms,
            "original_filename": self.original_filename,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "MediaAsset":
        return cls(
            id=doc["id"],
            kind=MediaKind(doc["kind"]),
            content_hash=doc["content_hash"],
            byte_size=doc["byte_size"],
            duration_ms=doc.get("duration_ms"),
            original_filename=doc.get("original_filename", ""),
        )


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def asset_id_for(digest: str) -> str:
    return "a-" + digest[:16]


def wav_duration_ms(data: bytes) -> int:
    """Duration from the RIFF/WAVE header; raises on undecodable input."""
    try:
        with wave.open(io.BytesIO(data), "rb") as wav:
            frames = wav.getnframes()
            rate = wav.getframerate()
    except (wave.Error, EOFError) as exc:
        raise UndecodableAudioHeader(f"not a decodable WAV header: {exc}")
    if rate <= 0 or frames <= 0:
        raise UndecodableAudioHeader("WAV header reports no playable frames")
    return round(frames * 1000 / rate)


def _mp3_first_frame(data: bytes) -> int:
    """Offset of the first MPEG frame sync, skipping a leading ID3v2 tag."""
    offset = 0
    if data[:3] == b"ID3" and len(data) >= 10:
        size = (
            (data[6] & 0x7F) << 21
            | (data[7] & 0x7F) << 14
            | (data[8] & 0x7F) << 7
            | (data[9] & 0x7F)
        )
        offset = 10 + size
    limit = min(len(data) - 4, offset + 64 * 1024)
    while offset <= limit:
        if data[offset] == 0xFF and (data[offset + 1] & 0xE0) == 0xE0:
            return offset
        offset += 1
    raise UndecodableAudioHeader("no MPEG frame sync found")


def mp3_duration_ms(data: bytes) -> int:
    """Duration from MP3 frame headers (Xing frame count when present,
    else a constant-bitrate estimate over the payload size)."""
    start = _mp3_first_frame(data)
    header = data[start:start + 4]
    version_bits = (header[1] >> 3) & 0x03
    layer_bits = (header[1] >> 1) & 0x03
    version = {0: 2.5, 2: 2, 3: 1}.get(version_bits)
    layer = {1: 3, 2: 2, 3: 1}.get(layer_bits)
    if version is None or layer != 3:
        raise UndecodableAudioHeader("unsupported MPEG version/layer")
    bitrate_index = (header[2] >> 4) & 0x0F
    rate_index = (header[2] >> 2) & 0x03
    if rate_index == 3 or bitrate_index in (0, 15):
        raise UndecodableAudioHeader("invalid MP3 bitrate or sample rate field")
    sample_rate = _MP3_SAMPLE_RATES[version][rate_index]
    bitrate = _MP3_BITRATES[(1 if version == 1 else 2, 3)][bitrate_index] * 1000
    samples = _MP3_SAMPLES_PER_FRAME[version]

    # Xing/Info header gives the exact frame count for VBR files
    mono = ((header[3] >> 6) & 0x03) == 3
    if version == 1:
        xing_offset = start + (21 if mono else 36)
    else:
        xing_offset = start + (13 if mono else 21)
    tag = data[xing_offset:xing_offset + 4]
    if tag in (b"Xing", b"Info"):
        flags = int.from_bytes(data[xing_offset + 4:xing_offset + 8], "big")
        if flags & 0x1:
            frames = int.from_bytes(data[xing_offset + 8:xing_offset + 12], "big")
            return round(frames * samples * 1000 / sample_rate)

    return round((len(data) - start) * 8 * 1000 / bitrate)


def probe_audio_duration_ms(data: bytes) -> int:
    if data[:4] == b"RIFF":
        return wav_duration_ms(data)
    if data[:3] == b"ID3" or (len(data) > 2 and data[0] == 0xFF and (data[1] & 0xE0) == 0xE0):
        return mp3_duration_ms(data)
    raise UndecodableAudioHeader("neither a WAV nor an MP3 container")


def check_image_format(data: bytes) -> str:
    if data.startswith(_PNG_MAGIC):
        return "png"
    if data.startswith(_JPEG_MAGIC):
        return "jpeg"
    raise UnsupportedImageFormat("only PNG and JPEG images are accepted")


def build_asset(data: bytes, kind: MediaKind | str, original_filename: str) -> MediaAsset:
    """Validate bytes for ``kind`` and build the metadata record."""
    kind = MediaKind(kind)
    if not data:
        raise EmptyFile("media file is empty")
    duration: int | None = None
    if kind == MediaKind.AUDIO:
        duration = probe_audio_duration_ms(data)
    else:
        check_image_format(data)
    digest = content_hash(data)
    return MediaAsset(
        id=asset_id_for(digest),
        kind=kind,
        content_hash=digest,
        byte_size=len(data),
        duration_ms=duration,
        original_filename=original_filename,
    )


class MediaStore:
    """Filesystem blob store addressed by content hash."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def blob_path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest

    def put(self, data: bytes) -> str:
        digest = content_hash(data)
        path = self.blob_path(digest)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_name(path.name + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def get(self, digest: str) -> bytes:
        path = self.blob_path(digest)
        if not path.exists():
            raise FileNotFoundError(digest)
        return path.read_bytes()

    def has(self, digest: str) -> bool:
        return self.blob_path(digest).exists()
