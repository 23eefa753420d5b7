import struct

import numpy as np
import pytest


def pack_wav(channels: list[np.ndarray], sample_rate: int, fmt: str = "int16") -> bytes:
    """Build a WAV file in memory from per-channel float data in [-1, 1]."""
    n = len(channels[0])
    n_ch = len(channels)
    interleaved = np.empty(n * n_ch, dtype=np.float64)
    for i, ch in enumerate(channels):
        interleaved[i::n_ch] = ch

    if fmt == "int16":
        code, bits = 1, 16
        payload = np.clip(np.rint(interleaved * 32767.0), -32768, 32767).astype("<i2").tobytes()
    elif fmt == "int16_full":
        # exact int16 values already scaled: interleaved holds raw ints
        code, bits = 1, 16
        payload = interleaved.astype("<i2").tobytes()
    elif fmt == "float32":
        code, bits = 3, 32
        payload = interleaved.astype("<f4").tobytes()
    elif fmt == "int24":
        code, bits = 1, 24
        ints = np.clip(np.rint(interleaved * (2**23 - 1)), -(2**23), 2**23 - 1).astype(np.int64)
        ints = np.where(ints < 0, ints + (1 << 24), ints)
        b = np.empty((len(ints), 3), dtype=np.uint8)
        b[:, 0] = ints & 0xFF
        b[:, 1] = (ints >> 8) & 0xFF
        b[:, 2] = (ints >> 16) & 0xFF
        payload = b.tobytes()
    else:
        raise ValueError(fmt)

    block_align = n_ch * bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        code,
        n_ch,
        sample_rate,
        sample_rate * block_align,
        block_align,
        bits,
        b"data",
        len(payload),
    )
    return header + payload


def write_wav_file(path, channels, sample_rate, fmt="int16"):
    path.write_bytes(pack_wav([np.asarray(c, dtype=np.float64) for c in channels], sample_rate, fmt))
    return path


def sine(freq_hz: float, duration_s: float, sample_rate: int, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * freq_hz * t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
