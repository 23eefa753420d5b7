"""Stage backends: deterministic in-process mocks, the built-in reference
VAD, and worker-process wrappers speaking the wire protocol.

Mock lookup order for fixture sidecars: a sidecar next to the exact audio
file wins, then one next to the originating source file, then the documented
synthetic fallback. Everything is a pure function of file contents, so runs
under mocks are fully deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import SpeakerTurn
from .protocol import BackendDescriptor, StageError, WorkerClient, spawn_worker
from .vad import VadParams, reference_vad
from .wavio import probe_wav, read_wav

_SYNTH_WORDS = ("the", "quick", "brown", "fox", "jumps", "over", "lazy", "dogs")
_SYNTH_CHARS_PER_SECOND = 12.0


@dataclass(frozen=True)
class AsrResult:
    """One transcription outcome, aligned 1:1 with its request batch slot."""

    text: str
    language: str
    lang_confidence: float
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def _sidecar(audio: Path, origin: Path | None, suffix: str) -> Path | None:
    for base in (audio, origin):
        if base is None:
            continue
        candidate = Path(str(base) + suffix)
        if candidate.is_file():
            return candidate
    return None


def synthetic_transcript(duration_s: float) -> str:
    """Deterministic placeholder text sized to a plausible speaking rate."""
    budget = max(1, int(round(duration_s * _SYNTH_CHARS_PER_SECOND)))
    words = []
    total = 0
    i = 0
    while total < budget:
        word = _SYNTH_WORDS[i % len(_SYNTH_WORDS)]
        words.append(word)
        total += len(word) + (1 if words else 0)
        i += 1
    return " ".join(words)


def spectral_flatness(samples: np.ndarray, frame: int = 1024) -> float:
    """Geometric over arithmetic mean of the power spectrum (DC excluded).

    The spectrum is a Welch-style average of non-overlapping frames; raw
    single-shot periodograms would make even white noise look non-flat.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 4 or not np.any(x):
        return 1.0  # silence scores as flat as noise
    if x.size < frame:
        frames = x[None, :]
    else:
        n = (x.size // frame) * frame
        frames = x[:n].reshape(-1, frame)
    power = np.mean(np.abs(np.fft.rfft(frames, axis=1)) ** 2, axis=0)
    power = power[1:] + 1e-20
    gm = math.exp(float(np.mean(np.log(power))))
    am = float(np.mean(power))
    return min(1.0, gm / am)


def synthetic_quality_score(samples: np.ndarray) -> float:
    """Documented formula mock: 1 + 4 * (1 - spectral flatness), in [1, 5]."""
    score = 1.0 + 4.0 * (1.0 - spectral_flatness(samples))
    return max(1.0, min(5.0, score))


# --- in-process backends ------------------------------------------------------


class MockSeparate:
    """Identity separation: the standardized audio is already the vocals."""

    def run(self, audio: Path, origin: Path | None = None) -> Path:
        return Path(audio)

    def close(self) -> None:
        pass


class MockDiarize:
    """Sidecar-driven turns, or one full-span single-speaker turn."""

    def run(self, audio: Path, origin: Path | None = None) -> list[SpeakerTurn]:
        sidecar = _sidecar(Path(audio), origin, ".turns.json")
        if sidecar is not None:
            turns = json.loads(sidecar.read_text(encoding="utf-8"))
            return [SpeakerTurn(t["speaker"], float(t["start_s"]), float(t["end_s"])) for t in turns]
        channels, rate, frames = probe_wav(audio)
        return [SpeakerTurn("spk0", 0.0, frames / rate)]

    def close(self) -> None:
        pass


class ReferenceVadBackend:
    def __init__(self, params: VadParams | None = None):
        self.params = params or VadParams()

    def run(self, audio: Path, origin: Path | None = None) -> list[tuple[float, float]]:
        raw = read_wav(audio)
        mono = raw.samples[0] if raw.channels == 1 else raw.samples.mean(axis=0)
        return reference_vad(mono, raw.sample_rate, self.params)

    def close(self) -> None:
        pass


class MockAsr:
    """Transcripts from .txt/.lang.json sidecars, else deterministic synthesis."""

    def run_batch(self, items: list[dict], language_hint: str | None = None) -> list[AsrResult]:
        results = []
        for item in items:
            audio = Path(item["audio"])
            origin = Path(item["origin"]) if item.get("origin") else None
            text_sidecar = _sidecar(audio, origin, ".txt")
            lang_sidecar = _sidecar(audio, origin, ".lang.json")
            if text_sidecar is not None:
                text = text_sidecar.read_text(encoding="utf-8").strip()
                language, confidence = "en", 1.0
                if lang_sidecar is not None:
                    meta = json.loads(lang_sidecar.read_text(encoding="utf-8"))
                    language = meta.get("language", "en")
                    confidence = float(meta.get("confidence", 1.0))
            else:
                text = synthetic_transcript(float(item.get("duration_s", 1.0)))
                language, confidence = language_hint or "en", 0.99
            results.append(AsrResult(text=text, language=language, lang_confidence=confidence))
        return results

    def close(self) -> None:
        pass


class MockQuality:
    """Score from a .mos sidecar, else the spectral-flatness formula."""

    def run(self, audio: Path, origin: Path | None = None) -> float:
        sidecar = _sidecar(Path(audio), origin, ".mos")
        if sidecar is not None:
            return float(sidecar.read_text(encoding="utf-8").strip())
        raw = read_wav(audio)
        mono = raw.samples[0] if raw.channels == 1 else raw.samples.mean(axis=0)
        return synthetic_quality_score(mono)

    def close(self) -> None:
        pass


# --- worker-process backends ---------------------------------------------------


class _WorkerBacked:
    def __init__(self, desc: BackendDescriptor):
        self.client: WorkerClient = spawn_worker(desc)

    def close(self) -> None:
        self.client.close()


class WorkerSeparate(_WorkerBacked):
    def run(self, audio: Path, origin: Path | None = None, out: Path | None = None) -> Path:
        out = out or Path(str(audio) + ".vocals.wav")
        payload = {"audio": str(audio), "out": str(out)}
        reply = self.client.request(payload)
        if not isinstance(reply, dict) or "audio" not in reply:
            raise StageError(f"separate worker returned {reply!r}")
        return Path(reply["audio"])


class WorkerDiarize(_WorkerBacked):
    def run(self, audio: Path, origin: Path | None = None) -> list[SpeakerTurn]:
        reply = self.client.request({"audio": str(audio)})
        if not isinstance(reply, dict) or "turns" not in reply:
            raise StageError(f"diarize worker returned {reply!r}")
        return [
            SpeakerTurn(t["speaker"], float(t["start_s"]), float(t["end_s"]))
            for t in reply["turns"]
        ]


class WorkerVad(_WorkerBacked):
    def run(self, audio: Path, origin: Path | None = None) -> list[tuple[float, float]]:
        reply = self.client.request({"audio": str(audio)})
        if not isinstance(reply, dict) or "regions" not in reply:
            raise StageError(f"vad worker returned {reply!r}")
        return [(float(s), float(e)) for s, e in reply["regions"]]


class WorkerAsr(_WorkerBacked):
    def run_batch(self, items: list[dict], language_hint: str | None = None) -> list[AsrResult]:
        payload = {
            "items": [{"audio": str(i["audio"])} for i in items],
            "language_hint": language_hint,
        }
        reply = self.client.request(payload)
        if not isinstance(reply, dict) or "items" not in reply:
            raise StageError(f"asr worker returned {reply!r}")
        raw_items = reply["items"]
        if len(raw_items) != len(items):
            raise StageError(
                f"asr worker returned {len(raw_items)} results for {len(items)} items"
            )
        results = []
        for entry in raw_items:
            if "error" in entry:
                results.append(AsrResult("", "", 0.0, error=str(entry["error"])))
            else:
                results.append(
                    AsrResult(
                        text=str(entry.get("text", "")),
                        language=str(entry.get("language", "")),
                        lang_confidence=float(entry.get("confidence", 0.0)),
                    )
                )
        return results


class WorkerQuality(_WorkerBacked):
    def run(self, audio: Path, origin: Path | None = None) -> float:
        reply = self.client.request({"audio": str(audio)})
        if not isinstance(reply, dict) or "score" not in reply:
            raise StageError(f"quality worker returned {reply!r}")
        return float(reply["score"])


# --- assembly -------------------------------------------------------------------


@dataclass
class BackendSet:
    separate: MockSeparate | WorkerSeparate
    diarize: MockDiarize | WorkerDiarize
    vad: ReferenceVadBackend | WorkerVad
    asr: MockAsr | WorkerAsr
    quality: MockQuality | WorkerQuality

    def close(self) -> None:
        for backend in (self.separate, self.diarize, self.vad, self.asr, self.quality):
            backend.close()


def make_backend(desc: BackendDescriptor, vad_params: VadParams | None = None):
    desc.validate()
    if desc.kind == "worker":
        return {
            "separate": WorkerSeparate,
            "diarize": WorkerDiarize,
            "vad": WorkerVad,
            "asr": WorkerAsr,
            "quality": WorkerQuality,
        }[desc.stage](desc)
    # mock and reference kinds are both served in-process
    if desc.stage == "separate":
        return MockSeparate()
    if desc.stage == "diarize":
        return MockDiarize()
    if desc.stage == "vad":
        return ReferenceVadBackend(vad_params)
    if desc.stage == "asr":
        return MockAsr()
    return MockQuality()


def make_backend_set(
    descriptors: dict[str, BackendDescriptor], vad_params: VadParams | None = None
) -> BackendSet:
    return BackendSet(
        separate=make_backend(descriptors["separate"], vad_params),
        diarize=make_backend(descriptors["diarize"], vad_params),
        vad=make_backend(descriptors["vad"], vad_params),
        asr=make_backend(descriptors["asr"], vad_params),
        quality=make_backend(descriptors["quality"], vad_params),
    )
