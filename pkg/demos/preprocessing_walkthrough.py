"""Walk one utterance through the preprocessing chain, stage by stage.

Each stage prints what it changed: the silence trim removes the lead
and tail, noise suppression knocks the background down, time scaling
warps to a common duration, and amplitude normalization equalizes
level. The same chain runs inside the detector; here it is unrolled
so the intermediate signals can be inspected.
"""

import numpy as np

from demo_corpus import ensure
from prondet import PreprocessConfig, load_utterance, normalize_amplitude
from prondet.preprocess import (
    estimate_noise_profile,
    suppress_noise,
    time_scale_to,
    trim_extent,
    trim_silence,
)


def rms(u):
    return float(np.sqrt(np.mean(u.samples ** 2)))


manifest = ensure()
entry = manifest.samples_of(word_id=2, speaker_id=4)[0]
u = load_utterance(entry, manifest)
cfg = PreprocessConfig()

print(f"input: {u.duration_ms:.0f} ms, rms {rms(u):.4f}")

# voice activity detection: find where the word actually is
lead, tail = trim_extent(u, cfg)
print(f"active region: samples {lead}..{tail} "
      f"({1000.0 * (tail - lead) / u.rate:.0f} ms of speech)")

trimmed = trim_silence(u, cfg)
print(f"after trim: {trimmed.duration_ms:.0f} ms, "
      f"boundaries {list(trimmed.boundaries)}")

# the lead-in silence is long enough to estimate the noise spectrum
profile = estimate_noise_profile(u.samples[:lead], u.rate)
clean = suppress_noise(trimmed, profile, cfg.oversubtract)
print(f"after suppression: rms {rms(trimmed):.4f} -> {rms(clean):.4f}")

# warp to a fixed duration; boundaries move proportionally
target = 600.0
warped = time_scale_to(clean, target)
print(f"after time scaling: {clean.duration_ms:.0f} ms -> "
      f"{warped.duration_ms:.0f} ms, boundaries {list(warped.boundaries)}")

final = normalize_amplitude(warped)
print(f"after normalization: peak {np.abs(final.samples).max():.3f}")
