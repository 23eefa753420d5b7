"""RIFF/WAV reading and writing, plus an external-decoder fallback.

WAV is parsed natively (unsigned 8-bit, 16/24/32-bit PCM, 32/64-bit float,
including WAVE_FORMAT_EXTENSIBLE). FLAC/MP3/OGG are handed to ffmpeg when it
is on PATH; without it those containers fail with a DecodeError, the source
is marked failed, and the run continues.
"""

from __future__ import annotations

import json
import shutil
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_MAGIC_FLAC = b"fLaC"
_MAGIC_OGG = b"OggS"
_MAGIC_ID3 = b"ID3"


class DecodeError(Exception):
    """Input audio could not be decoded."""


@dataclass(frozen=True)
class RawAudio:
    """Decoded audio: per-channel float samples scaled into [-1, 1]."""

    channels: int
    sample_rate: int
    samples: np.ndarray  # shape (channels, n)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise DecodeError(f"truncated file: expected {n} bytes for {what}, got {len(data)}")
    return data


def read_wav(path: str | Path) -> RawAudio:
    """Parse a RIFF WAV file into float samples.

    Integer PCM is scaled by the type's max magnitude (int16 -32768 maps to
    -1.0); float PCM passes through unchanged.
    """
    with open(path, "rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise DecodeError(f"{path}: not a RIFF/WAVE file")

        fmt = None
        data = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) == 0:
                break
            if len(chunk_header) < 8:
                raise DecodeError(f"{path}: truncated chunk header")
            chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, chunk_size, "fmt chunk")
            elif chunk_id == b"data":
                data = _read_exact(fh, chunk_size, "data chunk")
            else:
                fh.seek(chunk_size + (chunk_size & 1), 1)
                continue
            if chunk_size & 1:
                fh.seek(1, 1)
            if fmt is not None and data is not None:
                break

    if fmt is None or len(fmt) < 16:
        raise DecodeError(f"{path}: missing or short fmt chunk")
    if data is None:
        raise DecodeError(f"{path}: missing data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
    if audio_format == WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise DecodeError(f"{path}: short WAVE_FORMAT_EXTENSIBLE fmt chunk")
        # SubFormat GUID starts with the effective format code.
        audio_format = struct.unpack("<H", fmt[24:26])[0]
    if n_channels < 1:
        raise DecodeError(f"{path}: channel count {n_channels}")
    if sample_rate <= 0:
        raise DecodeError(f"{path}: sample rate {sample_rate}")
    if len(data) == 0:
        raise DecodeError(f"{path}: empty audio payload")

    if audio_format == WAVE_FORMAT_PCM:
        if bits == 8:
            raw = np.frombuffer(data, dtype=np.uint8)
            flat = (raw.astype(np.float32) - 128.0) / 128.0
        elif bits == 16:
            raw = np.frombuffer(data[: len(data) // 2 * 2], dtype="<i2")
            flat = raw.astype(np.float32) / 32768.0
        elif bits == 24:
            usable = len(data) // 3 * 3
            b = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3)
            as_int = (
                b[:, 0].astype(np.int32)
                | (b[:, 1].astype(np.int32) << 8)
                | (b[:, 2].astype(np.int32) << 16)
            )
            as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
            flat = as_int.astype(np.float32) / float(1 << 23)
        elif bits == 32:
            raw = np.frombuffer(data[: len(data) // 4 * 4], dtype="<i4")
            flat = raw.astype(np.float32) / float(1 << 31)
        else:
            raise DecodeError(f"{path}: unsupported PCM bit depth {bits}")
    elif audio_format == WAVE_FORMAT_IEEE_FLOAT:
        if bits == 32:
            flat = np.frombuffer(data[: len(data) // 4 * 4], dtype="<f4").astype(np.float32)
        elif bits == 64:
            flat = np.frombuffer(data[: len(data) // 8 * 8], dtype="<f8").astype(np.float32)
        else:
            raise DecodeError(f"{path}: unsupported float bit depth {bits}")
    else:
        raise DecodeError(f"{path}: unsupported WAV format code 0x{audio_format:04x}")

    n_frames = flat.shape[0] // n_channels
    if n_frames == 0:
        raise DecodeError(f"{path}: empty audio payload")
    per_channel = flat[: n_frames * n_channels].reshape(n_frames, n_channels).T
    return RawAudio(channels=n_channels, sample_rate=sample_rate, samples=np.ascontiguousarray(per_channel))


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples as 16-bit little-endian PCM."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise ValueError("write_wav expects a mono sample vector")
    quantized = np.clip(np.rint(samples * 32767.0), -32768, 32767).astype("<i2")
    payload = quantized.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        WAVE_FORMAT_PCM,
        1,
        sample_rate,
        sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def write_wav_f32(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float samples as 32-bit IEEE float WAV (staging format)."""
    samples = np.asarray(samples, dtype="<f4")
    if samples.ndim != 1:
        raise ValueError("write_wav_f32 expects a mono sample vector")
    payload = samples.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        WAVE_FORMAT_IEEE_FLOAT,
        1,
        sample_rate,
        sample_rate * 4,
        4,
        32,
        b"data",
        len(payload),
    )
    tmp = Path(path).with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    tmp.replace(path)


def probe_wav(path: str | Path) -> tuple[int, int, int]:
    """Read (channels, sample_rate, n_frames) from a WAV header only."""
    with open(path, "rb") as fh:
        header = _read_exact(fh, 12, "RIFF header")
        if header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise DecodeError(f"{path}: not a RIFF/WAVE file")
        channels = rate = bits = None
        data_size = None
        while True:
            chunk_header = fh.read(8)
            if len(chunk_header) < 8:
                break
            chunk_id, chunk_size = struct.unpack("<4sI", chunk_header)
            if chunk_id == b"fmt ":
                fmt = _read_exact(fh, chunk_size, "fmt chunk")
                _, channels, rate, _, _, bits = struct.unpack("<HHIIHH", fmt[:16])
                if chunk_size & 1:
                    fh.seek(1, 1)
            elif chunk_id == b"data":
                data_size = chunk_size
                break
            else:
                fh.seek(chunk_size + (chunk_size & 1), 1)
    if channels is None or data_size is None:
        raise DecodeError(f"{path}: missing fmt or data chunk")
    frames = data_size // (channels * max(1, bits // 8))
    return channels, rate, frames


def sniff_container(path: str | Path) -> str:
    """Best-effort container identification from magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(12)
    if head[:4] == b"RIFF" and head[8:12] == b"WAVE":
        return "wav"
    if head[:4] == _MAGIC_FLAC:
        return "flac"
    if head[:4] == _MAGIC_OGG:
        return "ogg"
    if head[:3] == _MAGIC_ID3 or (len(head) >= 2 and head[0] == 0xFF and (head[1] & 0xE0) == 0xE0):
        return "mp3"
    return "unknown"


def _ffmpeg_decode(path: Path) -> RawAudio:
    ffprobe = shutil.which("ffprobe")
    ffmpeg = shutil.which("ffmpeg")
    if ffmpeg is None or ffprobe is None:
        raise DecodeError(
            f"{path}: no decoder available for this container (install ffmpeg/ffprobe)"
        )
    probe = subprocess.run(
        [
            ffprobe,
            "-v",
            "error",
            "-select_streams",
            "a:0",
            "-show_entries",
            "stream=channels,sample_rate",
            "-of",
            "json",
            str(path),
        ],
        capture_output=True,
        text=True,
    )
    if probe.returncode != 0:
        raise DecodeError(f"{path}: ffprobe failed: {probe.stderr.strip()[:200]}")
    try:
        stream = json.loads(probe.stdout)["streams"][0]
        channels = int(stream["channels"])
        sample_rate = int(stream["sample_rate"])
    except (KeyError, IndexError, ValueError) as exc:
        raise DecodeError(f"{path}: ffprobe output unparseable: {exc}") from exc
    run = subprocess.run(
        [ffmpeg, "-v", "error", "-i", str(path), "-f", "f32le", "-acodec", "pcm_f32le", "-"],
        capture_output=True,
    )
    if run.returncode != 0:
        raise DecodeError(f"{path}: ffmpeg failed: {run.stderr.decode()[:200]}")
    flat = np.frombuffer(run.stdout, dtype="<f4")
    n_frames = flat.shape[0] // channels
    if n_frames == 0:
        raise DecodeError(f"{path}: empty audio payload")
    per_channel = flat[: n_frames * channels].reshape(n_frames, channels).T
    return RawAudio(channels=channels, sample_rate=sample_rate, samples=np.ascontiguousarray(per_channel))


def decode_audio(path: str | Path) -> RawAudio:
    """Decode WAV/FLAC/MP3/OGG to per-channel floats in [-1, 1]."""
    p = Path(path)
    if not p.is_file():
        raise DecodeError(f"{p}: no such file")
    container = sniff_container(p)
    if container == "wav":
        return read_wav(p)
    if container in ("flac", "mp3", "ogg"):
        return _ffmpeg_decode(p)
    raise DecodeError(f"{p}: unsupported container")
