"""Fixed-dimension feature vectors: banded log spectrogram and MFCCs.

Both features share one frame geometry (25 ms Hamming window, 10 ms hop,
so consecutive frames overlap by 15 ms) and are vectorized frame-major:
frame 0's coefficients first. Serialized models record the kind and
geometry so a mismatched load fails loudly instead of silently
projecting onto the wrong axes.

spectrogram50 aggregates FFT magnitudes into 50 contiguous 320 Hz bands
tiling 0-16 kHz, which pins the sample rate to 32 kHz (50 x 320 Hz is
exactly the Nyquist range there). mfcc13 keeps the first 13 mel-cepstral
coefficients (c0 included) from a 26-filter bank spanning 0 to Nyquist
at any rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct, rfft

from .corpus import CANONICAL_RATE, Utterance
from .errors import DataError, SignalError

SPECTROGRAM_BANDS = 50
BAND_WIDTH_HZ = 320.0
MFCC_COEFFS = 13
MEL_FILTERS = 26
PREEMPHASIS = 0.97
LOG_FLOOR = 1e-10

FEATURE_KINDS = ("spectrogram50", "mfcc13")


@dataclass(frozen=True)
class FrameGeometry:
    window_ms: float = 25.0
    hop_ms: float = 10.0

    def __post_init__(self):
        if not 0 < self.hop_ms <= self.window_ms:
            raise DataError("hop must be positive and at most the window")

    def window_samples(self, rate: int) -> int:
        return int(round(self.window_ms * rate / 1000.0))

    def hop_samples(self, rate: int) -> int:
        return int(round(self.hop_ms * rate / 1000.0))

    def frame_count(self, n_samples: int, rate: int) -> int:
        win = self.window_samples(rate)
        if n_samples < win:
            raise SignalError(
                f"signal of {n_samples} samples shorter than one "
                f"{win}-sample window")
        return 1 + (n_samples - win) // self.hop_samples(rate)


DEFAULT_GEOMETRY = FrameGeometry()


@dataclass
class FeatureVector:
    values: np.ndarray          # length F * T, frame-major
    kind: str
    geometry: FrameGeometry
    per_frame: int              # F
    frames: int                 # T
    rate: int
    word: int = -1
    speaker: int = -1
    group: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size != self.per_frame * self.frames:
            raise DataError("feature length does not equal F * T")
        if not np.all(np.isfinite(self.values)):
            raise DataError("non-finite feature values")


def frame_signal(samples: np.ndarray, rate: int,
                 geometry: FrameGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """Split into Hamming-windowed frames, one per row.

    T = 1 + floor((N - window) / hop).
    """
    samples = np.asarray(samples, dtype=np.float64)
    t = geometry.frame_count(samples.size, rate)
    win = geometry.window_samples(rate)
    hop = geometry.hop_samples(rate)
    idx = hop * np.arange(t)[:, None] + np.arange(win)
    return samples[idx] * np.hamming(win)


def spectrogram50(frames: np.ndarray, rate: int) -> np.ndarray:
    """Per frame: 50 log-magnitude bands of 320 Hz tiling 0-16 kHz."""
    if rate != CANONICAL_RATE:
        raise SignalError(
            f"banded spectrogram requires {CANONICAL_RATE} Hz input, got {rate}")
    spec = np.abs(rfft(frames, axis=1))
    win = frames.shape[1]
    bin_hz = rate / win
    per_band = BAND_WIDTH_HZ / bin_hz
    if abs(per_band - round(per_band)) > 1e-9:
        raise SignalError("window length does not align with 320 Hz bands")
    per_band = int(round(per_band))
    used = spec[:, : SPECTROGRAM_BANDS * per_band]
    bands = used.reshape(frames.shape[0], SPECTROGRAM_BANDS, per_band).mean(axis=2)
    return np.log(np.maximum(bands, LOG_FLOOR))


def mel_filterbank(rate: int, n_fft_bins: int, n_filters: int = MEL_FILTERS):
    """Triangular filters, equally spaced on the mel scale over 0..Nyquist."""
    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    points = from_mel(np.linspace(0.0, to_mel(rate / 2.0), n_filters + 2))
    freqs = np.arange(n_fft_bins) * (rate / 2.0) / (n_fft_bins - 1)
    bank = np.zeros((n_filters, n_fft_bins))
    for k in range(n_filters):
        lo, mid, hi = points[k], points[k + 1], points[k + 2]
        up = (freqs - lo) / max(mid - lo, 1e-12)
        down = (hi - freqs) / max(hi - mid, 1e-12)
        bank[k] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def mfcc13(frames: np.ndarray, rate: int, include_c0: bool = True) -> np.ndarray:
    """Per frame: first 13 mel cepstral coefficients (orthonormal DCT-II).

    c0 carries overall frame energy; include_c0=False swaps it out for
    coefficient 13 so the per-frame dimension stays 13 either way.
    Pre-emphasis belongs to the signal stage; apply it before framing
    (the extract() entry point does).
    """
    power = np.abs(rfft(frames, axis=1)) ** 2
    bank = mel_filterbank(rate, power.shape[1])
    energies = np.log(np.maximum(power @ bank.T, LOG_FLOOR))
    coeffs = dct(energies, type=2, norm="ortho", axis=1)
    if include_c0:
        return coeffs[:, :MFCC_COEFFS]
    return coeffs[:, 1:MFCC_COEFFS + 1]


def preemphasize(samples: np.ndarray, coeff: float = PREEMPHASIS) -> np.ndarray:
    out = np.copy(np.asarray(samples, dtype=np.float64))
    out[1:] -= coeff * out[:-1]
    return out


def extract(u: Utterance, kind: str,
            geometry: FrameGeometry = DEFAULT_GEOMETRY,
            include_c0: bool = True) -> FeatureVector:
    """Feature vector of an (already preprocessed) utterance."""
    if kind == "spectrogram50":
        frames = frame_signal(u.samples, u.rate, geometry)
        mat = spectrogram50(frames, u.rate)
    elif kind == "mfcc13":
        frames = frame_signal(preemphasize(u.samples), u.rate, geometry)
        mat = mfcc13(frames, u.rate, include_c0=include_c0)
    else:
        raise DataError(f"unknown feature kind {kind!r}")
    return FeatureVector(
        values=mat.reshape(-1), kind=kind, geometry=geometry,
        per_frame=mat.shape[1], frames=mat.shape[0], rate=u.rate,
        word=u.word, speaker=u.speaker, group=u.group)


def save_features(fv: FeatureVector, path) -> None:
    """Flat float64 binary plus a JSON sidecar describing it."""
    path = Path(path)
    path.write_bytes(fv.values.astype("<f8").tobytes())
    sidecar = {
        "kind": fv.kind,
        "window_ms": fv.geometry.window_ms,
        "hop_ms": fv.geometry.hop_ms,
        "per_frame": fv.per_frame,
        "frames": fv.frames,
        "rate": fv.rate,
        "word": fv.word,
        "speaker": fv.speaker,
        "group": fv.group,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=1, sort_keys=True) + "\n")


def load_features(path) -> FeatureVector:
    path = Path(path)
    sidecar_path = path.with_suffix(path.suffix + ".json")
    try:
        meta = json.loads(sidecar_path.read_text())
        values = np.frombuffer(path.read_bytes(), dtype="<f8")
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load features at {path}: {exc}") from exc
    return FeatureVector(
        values=values.copy(), kind=meta["kind"],
        geometry=FrameGeometry(meta["window_ms"], meta["hop_ms"]),
        per_frame=meta["per_frame"], frames=meta["frames"], rate=meta["rate"],
        word=meta["word"], speaker=meta["speaker"], group=meta["group"])
