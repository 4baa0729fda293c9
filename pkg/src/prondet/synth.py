"""Synthetic two-class speech corpus generator.

Each syllable is rendered as a harmonic source (per-speaker fundamental
with mild vibrato) shaped by three formant resonances, 150-400 ms long,
with raised-cosine edges. A word concatenates its syllables, so syllable
boundaries are exact by construction. Non-native speakers perturb one
designated syllable per word in formant center frequency and duration;
the perturbation magnitude scales both shifts and is zero for an
identical generative distribution.

All randomness flows from numpy SeedSequences keyed on (seed, stream,
ids), never from Python's salted hash(), so two runs with the same spec
and seed produce bit-identical WAV files. Per-label acoustic parameters
(formants, bandwidths, durations) derive from an md5 digest of the label
for the same reason.
"""

from __future__ import annotations

import hashlib
import io
import json
import wave
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import (
    CANONICAL_RATE,
    NATIVE,
    NON_NATIVE,
    CorpusManifest,
    SampleEntry,
    SpeakerEntry,
    WordEntry,
    manifest_to_dict,
)
from .errors import ManifestError


@dataclass(frozen=True)
class SyllableSpec:
    label: str
    duration_ms: float
    formants: tuple[float, float, float]
    bandwidths: tuple[float, float, float]
    level: float  # relative amplitude within the word


@dataclass(frozen=True)
class WordSpec:
    label: str
    syllables: tuple[SyllableSpec, ...]
    perturbed_index: int       # syllable non-native speakers mispronounce
    formant_directions: tuple[int, int, int]  # +1/-1 per formant, never uniform
    duration_direction: int


@dataclass(frozen=True)
class SynthSpec:
    words: tuple[WordSpec, ...]
    native_speakers: int
    non_native_speakers: int
    repetitions: int
    perturbation: float = 0.3   # magnitude m in [0, 1]
    rate: int = CANONICAL_RATE
    noise_snr_db: float = 35.0


# Scale factors mapping the perturbation magnitude onto acoustics: at the
# reference m = 0.3 a formant moves ~10% and the syllable stretches ~15%,
# before the per-speaker severity factor.
FORMANT_SHIFT_PER_UNIT = 0.35
DURATION_SHIFT_PER_UNIT = 0.5


def _label_units(label: str, n: int) -> np.ndarray:
    """n reproducible values in [0, 1) derived from an md5 digest."""
    digest = b""
    counter = 0
    while len(digest) < n:
        digest += hashlib.md5(f"{label}#{counter}".encode()).digest()
        counter += 1
    return np.frombuffer(digest[:n], dtype=np.uint8).astype(np.float64) / 256.0


def syllable_spec(label: str, duration_ms: float) -> SyllableSpec:
    """Derive a syllable's formant layout from its label text."""
    u = _label_units(label, 8)
    formants = (320.0 + 480.0 * u[0],
                950.0 + 1350.0 * u[1],
                2400.0 + 1400.0 * u[2])
    bandwidths = (90.0 + 60.0 * u[3],
                  120.0 + 80.0 * u[4],
                  160.0 + 100.0 * u[5])
    dur = float(np.clip(duration_ms * (0.92 + 0.16 * u[6]), 150.0, 800.0))
    level = 0.8 + 0.2 * u[7]
    return SyllableSpec(label, dur, formants, bandwidths, level)


def word_spec(label: str, syllables) -> WordSpec:
    """Build a WordSpec with hash-derived per-syllable acoustics.

    Total word duration is aimed near 700 ms regardless of syllable
    count, a 150 ms per-syllable floor notwithstanding; keeping word
    durations within a factor of two of each other keeps cross-word
    time scaling inside the modifier's supported ratio range.
    """
    if not syllables:
        raise ManifestError(f"word {label!r} has no syllables")
    per = max(700.0 / len(syllables), 150.0)
    specs = tuple(replace(syllable_spec(f"{label}/{s}", per), label=s)
                  for s in syllables)
    u = _label_units(label, 5)
    dirs = [1 if b >= 0.5 else -1 for b in u[1:4]]
    if dirs[0] == dirs[1] == dirs[2]:
        # A uniform shift of all formants mimics an ordinary vocal tract
        # length difference; flip F2 so the error stays a vowel-quality
        # change rather than a speaker-size change.
        dirs[1] = -dirs[1]
    return WordSpec(
        label=label,
        syllables=specs,
        perturbed_index=int(u[0] * len(syllables)),
        formant_directions=tuple(dirs),
        duration_direction=1 if u[4] >= 0.5 else -1,
    )


REFERENCE_WORDS = (
    ("jamaica", ("ja", "mai", "ca")),
    ("tres", ("tr", "e", "s")),
    ("gemelas", ("ge", "me", "la", "s")),
    ("hierro", ("hie", "rro")),
    ("pala", ("pa", "la")),
    ("torturados", ("tor", "tu", "ra", "do", "s")),
    ("accidente", ("ac", "ci", "den", "te")),
    ("construccion", ("cons", "truc", "cion")),
    ("puertorriquena", ("puer", "tor", "ri", "que", "na")),
    ("aire", ("ai", "re")),
)


def reference_spec(perturbation: float = 0.3) -> SynthSpec:
    """Ten Spanish words, 7 native + 6 non-native speakers, 5 repetitions."""
    return SynthSpec(
        words=tuple(word_spec(label, sylls) for label, sylls in REFERENCE_WORDS),
        native_speakers=7,
        non_native_speakers=6,
        repetitions=5,
        perturbation=perturbation,
    )


def perturb_syllable(syl: SyllableSpec, magnitude: float, severity: float,
                     formant_directions, duration_direction: int) -> SyllableSpec:
    """Shift a syllable's formants and duration; magnitude 0 is identity."""
    if magnitude == 0.0:
        return syl
    shift = magnitude * severity * FORMANT_SHIFT_PER_UNIT
    d_factor = 1.0 + duration_direction * magnitude * severity * DURATION_SHIFT_PER_UNIT
    return replace(
        syl,
        formants=tuple(f * (1.0 + d * shift)
                       for f, d in zip(syl.formants, formant_directions)),
        duration_ms=syl.duration_ms * d_factor,
    )


@dataclass(frozen=True)
class _SpeakerTraits:
    f0: float
    formant_scale: float
    duration_scale: float
    level: float
    vibrato_depth: float
    vibrato_rate: float
    severity: float


def _speaker_traits(seed: int, speaker_id: int) -> _SpeakerTraits:
    rng = np.random.default_rng([seed, 7001, speaker_id])
    return _SpeakerTraits(
        f0=float(np.exp(rng.uniform(np.log(115.0), np.log(215.0)))),
        formant_scale=float(rng.uniform(0.94, 1.06)),
        duration_scale=float(rng.uniform(0.92, 1.08)),
        level=float(rng.uniform(0.40, 0.65)),
        vibrato_depth=float(rng.uniform(0.004, 0.012)),
        vibrato_rate=float(rng.uniform(2.5, 4.5)),
        severity=float(rng.uniform(0.7, 1.3)),
    )


def _render_syllable(syl: SyllableSpec, rate, f0, vibrato_depth, vibrato_rate,
                     rng) -> np.ndarray:
    n = int(round(syl.duration_ms * rate / 1000.0))
    t = np.arange(n) / rate
    # vibrato: integrate f0 * (1 + depth*cos(2 pi r t)) for the phase argument
    vib_phase = rng.uniform(0.0, 2.0 * np.pi)
    warp = t + vibrato_depth * (
        np.sin(2.0 * np.pi * vibrato_rate * t + vib_phase) - np.sin(vib_phase)
    ) / (2.0 * np.pi * vibrato_rate)

    h_count = max(1, int(6000.0 / f0))
    h = np.arange(1, h_count + 1)
    freqs = f0 * h
    gains = np.zeros(h_count)
    for fc, bw in zip(syl.formants, syl.bandwidths):
        gains += 1.0 / (1.0 + ((freqs - fc) / bw) ** 2)
    gains /= h  # source rolloff
    phases = rng.uniform(0.0, 2.0 * np.pi, h_count)

    sig = np.sin(2.0 * np.pi * np.outer(warp, freqs) + phases) @ gains

    edge = min(int(0.025 * rate), n // 2)
    if edge > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
        env = np.ones(n)
        env[:edge] = ramp
        env[n - edge:] = ramp[::-1]
        sig *= env
    peak = np.max(np.abs(sig))
    if peak > 0:
        sig *= syl.level / peak
    return sig


def synthesize_sample(spec: SynthSpec, word_index: int, speaker_id: int,
                      rep: int, seed: int):
    """Render one utterance; returns (samples, boundaries).

    Pure function of its arguments: randomness is keyed on
    (seed, word, speaker, rep) alone, so samples can be generated in any
    order or in parallel.
    """
    word = spec.words[word_index]
    traits = _speaker_traits(seed, speaker_id)
    non_native = speaker_id > spec.native_speakers
    rng = np.random.default_rng([seed, 7002, word_index, speaker_id, rep])

    f0 = traits.f0 * rng.uniform(0.98, 1.02)
    rep_duration = rng.uniform(0.98, 1.02)
    rate = spec.rate

    pieces = []
    boundaries = []
    lead = int(round(rng.uniform(0.110, 0.150) * rate))
    pos = lead
    for k, syl in enumerate(word.syllables):
        if non_native and k == word.perturbed_index:
            syl = perturb_syllable(syl, spec.perturbation, traits.severity,
                                   word.formant_directions, word.duration_direction)
        syl = replace(
            syl,
            formants=tuple(f * traits.formant_scale * rng.uniform(0.99, 1.01)
                           for f in syl.formants),
            duration_ms=syl.duration_ms * traits.duration_scale * rep_duration
            * rng.uniform(0.985, 1.015),
        )
        seg = _render_syllable(syl, rate, f0, traits.vibrato_depth,
                               traits.vibrato_rate, rng)
        pieces.append(seg)
        boundaries.append((pos, pos + seg.size))
        pos += seg.size
    tail = int(round(rng.uniform(0.070, 0.110) * rate))

    speech = np.concatenate(pieces)
    samples = np.zeros(lead + speech.size + tail)
    samples[lead:lead + speech.size] = speech
    samples *= traits.level * rng.uniform(0.95, 1.05)

    rms = np.sqrt(np.mean(samples[lead:lead + speech.size] ** 2))
    sigma = rms * 10.0 ** (-spec.noise_snr_db / 20.0)
    samples += rng.normal(0.0, sigma, samples.size)
    return np.clip(samples, -1.0, 1.0), tuple(boundaries)


def _wav_bytes(samples: np.ndarray, rate: int) -> bytes:
    clipped = np.clip(samples, -1.0, 1.0)
    ints = np.round(clipped * 32767.0).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(ints.tobytes())
    return buf.getvalue()


def _write_if_changed(path: Path, data: bytes) -> bool:
    if path.exists() and path.read_bytes() == data:
        return False
    path.write_bytes(data)
    return True


def synthesize_corpus(spec: SynthSpec, seed: int, out_dir):
    """Generate all WAV files plus a manifest under out_dir.

    Existing byte-identical files are left untouched; returns
    (manifest, set of paths written or rewritten). An empty set means
    the on-disk corpus already matched this spec and seed.
    """
    if spec.native_speakers < 1 or spec.non_native_speakers < 1:
        raise ManifestError("need at least one speaker in each class")
    if not 0.0 <= spec.perturbation <= 1.0:
        raise ManifestError("perturbation magnitude must lie in [0, 1]")

    out_dir = Path(out_dir)
    wav_dir = out_dir / "wav"
    wav_dir.mkdir(parents=True, exist_ok=True)

    words = tuple(
        WordEntry(i + 1, w.label, tuple(s.label for s in w.syllables))
        for i, w in enumerate(spec.words))
    n_speakers = spec.native_speakers + spec.non_native_speakers
    speakers = tuple(
        SpeakerEntry(sid, NATIVE if sid <= spec.native_speakers else NON_NATIVE)
        for sid in range(1, n_speakers + 1))

    changed = set()
    entries = []
    for wi, word in enumerate(spec.words):
        for sid in range(1, n_speakers + 1):
            for rep in range(spec.repetitions):
                samples, bounds = synthesize_sample(spec, wi, sid, rep, seed)
                name = f"w{wi + 1:02d}_s{sid:02d}_r{rep}.wav"
                path = wav_dir / name
                if _write_if_changed(path, _wav_bytes(samples, spec.rate)):
                    changed.add(path)
                entries.append(SampleEntry(wi + 1, sid, rep, name, bounds))

    manifest = CorpusManifest(words, speakers, tuple(entries), wav_dir)
    manifest_path = out_dir / "manifest.json"
    text = json.dumps(manifest_to_dict(manifest, "wav"), indent=1,
                      sort_keys=True) + "\n"
    if _write_if_changed(manifest_path, text.encode()):
        changed.add(manifest_path)
    return manifest, changed
