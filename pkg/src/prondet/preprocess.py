"""Signal conditioning: trim, denoise, time-scale, normalize.

The chain runs trim -> suppress -> time-scale -> normalize so duration
matching happens on speech only and nothing after normalization can
disturb the unity peak. Time scaling uses a waveform-similarity
overlap-add method (25 ms synthesis frames, +-5 ms similarity search)
rather than resampling, so the pitch contour survives; every utterance
of a word can then be brought to a common duration without smearing its
spectral envelope.

Syllable boundaries ride along: trimming shifts them by the removed
leading offset, time scaling rescales them proportionally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sig

from .corpus import Utterance
from .errors import DataError, SignalError

TSM_FRAME_MS = 25.0
TSM_SEARCH_MS = 5.0
STFT_NPERSEG = 512
STFT_NOVERLAP = 384


@dataclass(frozen=True)
class PreprocessConfig:
    vad_threshold: float = 0.02     # fraction of the 95th-pct frame energy
    vad_frame_ms: float = 10.0
    noise_suppression: bool = True
    min_noise_ms: float = 50.0      # shortest usable leading-silence segment
    oversubtract: float = 1.5
    tsm_tolerance_ms: float = TSM_FRAME_MS
    target_ms: float | None = None  # explicit duration; None -> training mean

    def __post_init__(self):
        if not 0.0 < self.vad_threshold < 1.0:
            raise DataError("vad_threshold must lie in (0, 1)")
        if self.vad_frame_ms <= 0:
            raise DataError("vad_frame_ms must be positive")


def _frame_energies(x: np.ndarray, flen: int) -> np.ndarray:
    n_frames = x.size // flen
    if n_frames == 0:
        return np.array([np.mean(x**2)])
    frames = x[: n_frames * flen].reshape(n_frames, flen)
    return np.mean(frames**2, axis=1)


def trim_extent(u: Utterance, cfg: PreprocessConfig) -> tuple[int, int]:
    """Sample range [start, end) containing the detected speech."""
    flen = max(1, int(round(u.rate * cfg.vad_frame_ms / 1000.0)))
    energies = _frame_energies(u.samples, flen)
    ref = np.percentile(energies, 95)
    threshold = cfg.vad_threshold * ref
    voiced = np.nonzero(energies > threshold)[0]
    if voiced.size == 0:
        raise SignalError("no speech detected")
    start = int(voiced[0]) * flen
    end = min(u.samples.size, (int(voiced[-1]) + 1) * flen)
    # samples past the last full frame belong to the tail unless voiced
    if voiced[-1] == energies.size - 1:
        end = u.samples.size
    return start, end


def trim_silence(u: Utterance, cfg: PreprocessConfig) -> Utterance:
    """Drop leading/trailing frames below the energy threshold."""
    start, end = trim_extent(u, cfg)
    if start == 0 and end == u.samples.size:
        return u
    bounds = None
    if u.boundaries is not None:
        n = end - start
        bounds = tuple(
            (min(max(s - start, 0), n), min(max(e - start, 0), n))
            for s, e in u.boundaries)
    return u.with_samples(u.samples[start:end], bounds)


@dataclass(frozen=True)
class NoiseProfile:
    magnitudes: np.ndarray  # mean |STFT| per frequency bin
    rate: int
    nperseg: int = STFT_NPERSEG
    noverlap: int = STFT_NOVERLAP


def estimate_noise_profile(samples: np.ndarray, rate: int) -> NoiseProfile:
    """Mean magnitude spectrum of a noise-only segment."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < STFT_NPERSEG:
        raise SignalError("noise segment shorter than one analysis window")
    _, _, z = sig.stft(samples, fs=rate, window="hann",
                       nperseg=STFT_NPERSEG, noverlap=STFT_NOVERLAP)
    return NoiseProfile(np.mean(np.abs(z), axis=1), rate)


def suppress_noise(u: Utterance, profile: NoiseProfile,
                   oversubtract: float = 1.5) -> Utterance:
    """Magnitude spectral subtraction; phase and length are preserved.

    Per bin: max(|X| - oversubtract * noise, 0.01 * noise), half-wave
    rectified by the outer max. A zero profile reproduces the input to
    within STFT round-trip error.
    """
    if profile.rate != u.rate:
        raise SignalError(
            f"noise profile rate {profile.rate} != utterance rate {u.rate}")
    if profile.magnitudes.size != STFT_NPERSEG // 2 + 1:
        raise SignalError("noise profile frequency bin count mismatch")
    n = u.samples.size
    _, _, z = sig.stft(u.samples, fs=u.rate, window="hann",
                       nperseg=profile.nperseg, noverlap=profile.noverlap)
    mag = np.abs(z)
    noise = profile.magnitudes[:, None]
    kept = np.maximum(mag - oversubtract * noise, 0.01 * noise)
    scale = np.where(mag > 0, kept / np.where(mag > 0, mag, 1.0), 0.0)
    _, out = sig.istft(z * scale, fs=u.rate, window="hann",
                       nperseg=profile.nperseg, noverlap=profile.noverlap)
    if out.size < n:
        out = np.pad(out, (0, n - out.size))
    return u.with_samples(out[:n], u.boundaries)


def time_scale_to(u: Utterance, target_ms: float) -> Utterance:
    """Stretch or compress to the target duration, preserving pitch.

    Output length equals the target sample count exactly so all feature
    vectors built from a common target agree in dimension.
    """
    if target_ms <= 0:
        raise SignalError("target duration must be positive")
    n_in = u.samples.size
    n_out = int(round(target_ms * u.rate / 1000.0))
    if n_out == n_in:
        return u
    ratio = n_out / n_in
    if not 0.5 <= ratio <= 2.0:
        raise SignalError(f"extreme scaling ratio {ratio:.3f}, supported [0.5, 2]")

    w = int(round(TSM_FRAME_MS * u.rate / 1000.0))
    hop = w // 2
    half = int(round(TSM_SEARCH_MS * u.rate / 1000.0))
    x = u.samples
    if n_in <= w or n_out <= w:
        # too short for overlap-add frames; fall back to interpolation
        out = np.interp(np.arange(n_out) * (n_in - 1) / max(1, n_out - 1),
                        np.arange(n_in), x)
        return _with_scaled_bounds(u, out, n_in, n_out)

    window = np.hanning(w)
    n_frames = int(np.ceil((n_out - w) / hop)) + 1
    # map output frame starts onto the input so both signal ends are kept
    src_ideal = np.round(np.arange(n_frames) * hop * (n_in - w) /
                         (n_out - w)).astype(np.int64)
    src_ideal = np.clip(src_ideal, 0, n_in - w)

    # prefix sums give each candidate window's energy in O(1)
    energy = np.concatenate(([0.0], np.cumsum(x * x)))

    out = np.zeros(n_out + w)
    wsum = np.zeros(n_out + w)
    prev = src_ideal[0]
    for m in range(n_frames):
        if m == 0:
            p = src_ideal[0]
        else:
            # template: the segment that would continue the previous copy
            t0 = min(prev + hop, n_in - w)
            template = x[t0:t0 + w]
            p = src_ideal[m]
            a = max(0, p - half)
            b = min(n_in - w, p + half)
            scores = sig.correlate(x[a:b + w], template, mode="valid",
                                   method="fft")
            norms = np.sqrt(energy[a + w:b + w + 1] - energy[a:b + 1]) + 1e-12
            p = a + int(np.argmax(scores / norms))
        pos = m * hop
        out[pos:pos + w] += x[p:p + w] * window
        wsum[pos:pos + w] += window
        prev = p
    out = out[:n_out] / np.maximum(wsum[:n_out], 1e-8)
    return _with_scaled_bounds(u, out, n_in, n_out)


def _with_scaled_bounds(u, out, n_in, n_out):
    bounds = None
    if u.boundaries is not None:
        f = n_out / n_in
        bounds = tuple(
            (min(int(round(s * f)), n_out), min(int(round(e * f)), n_out))
            for s, e in u.boundaries)
    return u.with_samples(out, bounds)


def normalize_amplitude(u: Utterance) -> Utterance:
    """Scale so the peak absolute sample is exactly 1."""
    peak = np.max(np.abs(u.samples))
    if peak == 0.0:
        raise SignalError("cannot normalize an all-zero signal")
    if peak == 1.0:
        return u
    return u.with_samples(u.samples / peak, u.boundaries)


def preprocess(u: Utterance, cfg: PreprocessConfig,
               target_ms: float | None = None) -> Utterance:
    """Full conditioning chain; target_ms overrides cfg.target_ms.

    When no target duration is available the time-scale stage is
    skipped, which callers should only do for single-utterance
    inspection, never for building eigenspace training sets.
    """
    start, end = trim_extent(u, cfg)
    lead = u.samples[:start]
    trimmed = trim_silence(u, cfg)
    if (cfg.noise_suppression
            and lead.size >= cfg.min_noise_ms * u.rate / 1000.0):
        profile = estimate_noise_profile(lead, u.rate)
        trimmed = suppress_noise(trimmed, profile, cfg.oversubtract)
    target = target_ms if target_ms is not None else cfg.target_ms
    if target is not None:
        trimmed = time_scale_to(trimmed, target)
    return normalize_amplitude(trimmed)
