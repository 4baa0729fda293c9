"""Dataset manifests and WAV audio loading.

A corpus is described by a JSON manifest (schema below) listing words,
speakers, and samples. Audio is mono 16-bit PCM WAV; the canonical sample
rate is 32 kHz (50 spectrogram bands x 320 Hz tile 0-16 kHz exactly) and
loaders resample anything else by linear interpolation.

Manifest schema (version 1)::

    {
      "schema_version": 1,
      "audio_root": "wav",                  # dir, relative to the manifest
      "words":    [{"id": 1, "label": "tres", "syllables": ["tr","e","s"]}],
      "speakers": [{"id": 1, "group": "native"}],
      "samples":  [{"word": 1, "speaker": 1, "repetition": 0,
                    "path": "w01_s01_r00.wav",
                    "boundaries": [[0, 6000], [6000, 11000], [11000, 17500]]}]
    }

Syllable boundaries are (start, end) sample offsets; when present their
count must equal the word's syllable count and the pairs must be ordered
and non-overlapping. Boundaries always come from the manifest; no
automatic syllabification is attempted.
"""

from __future__ import annotations

import json
import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import AudioError, ManifestError

MANIFEST_VERSION = 1
CANONICAL_RATE = 32000

NATIVE = "native"
NON_NATIVE = "non-native"
SPEAKER_GROUPS = (NATIVE, NON_NATIVE)


@dataclass(frozen=True)
class WordEntry:
    id: int
    label: str
    syllables: tuple[str, ...]

    @property
    def syllable_count(self) -> int:
        return len(self.syllables)


@dataclass(frozen=True)
class SpeakerEntry:
    id: int
    group: str  # "native" or "non-native"


@dataclass(frozen=True)
class SampleEntry:
    word: int
    speaker: int
    repetition: int
    path: str
    boundaries: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class CorpusManifest:
    words: tuple[WordEntry, ...]
    speakers: tuple[SpeakerEntry, ...]
    samples: tuple[SampleEntry, ...]
    audio_root: Path

    def word(self, word_id: int) -> WordEntry:
        for w in self.words:
            if w.id == word_id:
                return w
        raise ManifestError(f"unknown word id {word_id}")

    def speaker(self, speaker_id: int) -> SpeakerEntry:
        for s in self.speakers:
            if s.id == speaker_id:
                return s
        raise ManifestError(f"unknown speaker id {speaker_id}")

    def samples_of(self, word_id=None, speaker_id=None, group=None):
        """Samples filtered by word, speaker, and/or speaker group."""
        groups = {s.id: s.group for s in self.speakers}
        out = []
        for e in self.samples:
            if word_id is not None and e.word != word_id:
                continue
            if speaker_id is not None and e.speaker != speaker_id:
                continue
            if group is not None and groups[e.speaker] != group:
                continue
            out.append(e)
        return out

    def audio_path(self, entry: SampleEntry) -> Path:
        return self.audio_root / entry.path


@dataclass
class Utterance:
    """A mono audio signal with its corpus labels.

    Samples are float64 in [-1, 1]. Boundaries, when present, are
    (start, end) sample offsets delimiting syllables.
    """

    samples: np.ndarray
    rate: int
    word: int = -1
    speaker: int = -1
    group: str = NATIVE
    boundaries: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.rate <= 0:
            raise AudioError("sample rate must be positive")
        if self.samples.size == 0:
            raise AudioError("empty sample sequence")
        if not np.all(np.isfinite(self.samples)):
            raise AudioError("non-finite amplitude values")

    @property
    def duration_ms(self) -> float:
        return 1000.0 * self.samples.size / self.rate

    def with_samples(self, samples, boundaries=None) -> "Utterance":
        return replace(self, samples=np.asarray(samples, dtype=np.float64),
                       boundaries=boundaries)


def _check_boundaries(bounds, count, n_samples=None, where=""):
    if len(bounds) != count:
        raise ManifestError(
            f"{where}: {len(bounds)} boundary pairs for {count} syllables")
    prev_end = None
    for start, end in bounds:
        if start >= end:
            raise ManifestError(f"{where}: empty boundary segment ({start}, {end})")
        if prev_end is not None and start < prev_end:
            raise ManifestError(f"{where}: overlapping boundaries at {start}")
        if start < 0:
            raise ManifestError(f"{where}: negative boundary offset")
        prev_end = end
    if n_samples is not None and prev_end is not None and prev_end > n_samples:
        raise ManifestError(f"{where}: boundary {prev_end} past end of audio")


def _validate(manifest: CorpusManifest) -> CorpusManifest:
    if not manifest.samples:
        raise ManifestError("no samples")
    word_ids = {w.id for w in manifest.words}
    if len(word_ids) != len(manifest.words):
        raise ManifestError("duplicate word ids")
    speaker_ids = {s.id for s in manifest.speakers}
    if len(speaker_ids) != len(manifest.speakers):
        raise ManifestError("duplicate speaker ids")
    for w in manifest.words:
        if not w.syllables:
            raise ManifestError(f"word {w.id} has an empty syllable list")
    for s in manifest.speakers:
        if s.group not in SPEAKER_GROUPS:
            raise ManifestError(
                f"speaker {s.id}: group must be one of {SPEAKER_GROUPS}")
    words_by_id = {w.id: w for w in manifest.words}
    seen_pairs = set()
    for e in manifest.samples:
        if e.word not in word_ids:
            raise ManifestError(f"sample {e.path!r} references unknown word {e.word}")
        if e.speaker not in speaker_ids:
            raise ManifestError(
                f"sample {e.path!r} references unknown speaker {e.speaker}")
        if e.boundaries is not None:
            _check_boundaries(e.boundaries, words_by_id[e.word].syllable_count,
                              where=f"sample {e.path!r}")
        seen_pairs.add((e.word, e.speaker))
    for w in manifest.words:
        for s in manifest.speakers:
            if (w.id, s.id) not in seen_pairs:
                raise ManifestError(
                    f"no sample for word {w.id} / speaker {s.id}")
    return manifest


def load_manifest(path) -> CorpusManifest:
    """Read and validate a corpus manifest."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest parse failure: {exc}") from exc
    return manifest_from_dict(raw, base_dir=path.parent)


def manifest_from_dict(raw: dict, base_dir) -> CorpusManifest:
    version = raw.get("schema_version")
    if version != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest schema_version {version!r}")
    try:
        words = tuple(
            WordEntry(int(w["id"]), str(w["label"]), tuple(w["syllables"]))
            for w in raw["words"])
        speakers = tuple(
            SpeakerEntry(int(s["id"]), str(s["group"])) for s in raw["speakers"])
        samples = tuple(
            SampleEntry(
                int(e["word"]), int(e["speaker"]), int(e["repetition"]),
                str(e["path"]),
                tuple((int(a), int(b)) for a, b in e["boundaries"])
                if e.get("boundaries") is not None else None)
            for e in raw["samples"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest field: {exc}") from exc
    audio_root = Path(base_dir) / raw.get("audio_root", ".")
    return _validate(CorpusManifest(words, speakers, samples, audio_root))


def manifest_to_dict(manifest: CorpusManifest, audio_root="wav") -> dict:
    return {
        "schema_version": MANIFEST_VERSION,
        "audio_root": str(audio_root),
        "words": [
            {"id": w.id, "label": w.label, "syllables": list(w.syllables)}
            for w in manifest.words],
        "speakers": [{"id": s.id, "group": s.group} for s in manifest.speakers],
        "samples": [
            {"word": e.word, "speaker": e.speaker, "repetition": e.repetition,
             "path": e.path,
             **({"boundaries": [list(b) for b in e.boundaries]}
                if e.boundaries is not None else {})}
            for e in manifest.samples],
    }


def save_manifest(manifest: CorpusManifest, path, audio_root="wav") -> None:
    Path(path).write_text(
        json.dumps(manifest_to_dict(manifest, audio_root), indent=1,
                   sort_keys=True) + "\n")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono 16-bit PCM WAV file; samples scaled by 1/32768."""
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            n = w.getnframes()
            frames = w.readframes(n)
    except (OSError, wave.Error, EOFError) as exc:
        raise AudioError(f"unreadable WAV file {path}: {exc}") from exc
    if channels != 1:
        raise AudioError(f"{path}: mono required, got {channels} channels")
    if width != 2:
        raise AudioError(f"{path}: 16-bit PCM required, got {8 * width}-bit")
    if n == 0:
        raise AudioError(f"{path}: zero-length audio")
    data = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    return data, rate


def write_wav(path, samples: np.ndarray, rate: int = CANONICAL_RATE) -> None:
    """Write float samples in [-1, 1] as mono 16-bit PCM."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(ints.tobytes())


def resample_linear(samples: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    if rate_in == rate_out:
        return samples
    n_out = max(1, int(round(samples.size * rate_out / rate_in)))
    t_out = np.arange(n_out) * (rate_in / rate_out)
    return np.interp(t_out, np.arange(samples.size), samples)


def load_utterance(entry: SampleEntry, manifest: CorpusManifest) -> Utterance:
    """Load a manifest sample as an Utterance at the canonical rate."""
    data, rate = read_wav(manifest.audio_path(entry))
    boundaries = entry.boundaries
    if rate != CANONICAL_RATE:
        scale = CANONICAL_RATE / rate
        n_in = data.size
        data = resample_linear(data, rate, CANONICAL_RATE)
        if boundaries is not None:
            boundaries = tuple(
                (int(round(s * scale)), int(round(e * scale)))
                for s, e in boundaries)
            boundaries = tuple(
                (min(s, data.size), min(e, data.size)) for s, e in boundaries)
    return Utterance(
        samples=data, rate=CANONICAL_RATE, word=entry.word,
        speaker=entry.speaker, group=manifest.speaker(entry.speaker).group,
        boundaries=boundaries)
