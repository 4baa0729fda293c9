"""Build the demo corpus and poke around in it.

Shows what the synthesizer produces: the directory layout, the
manifest contents, and a quick sanity read of one wav file.
"""

import numpy as np

from demo_corpus import ensure
from prondet import load_utterance, read_wav

manifest = ensure()

print("\nwords:")
for w in manifest.words:
    print(f"  {w.id}: {w.label!r:12s} syllables {list(w.syllables)}")

print("\nspeakers:")
for s in manifest.speakers:
    print(f"  {s.id}: {s.group}")

# every (word, speaker) pair is present with the same repetition count
reps = {}
for e in manifest.samples:
    reps[(e.word, e.speaker)] = reps.get((e.word, e.speaker), 0) + 1
assert len(set(reps.values())) == 1
print(f"\n{len(manifest.samples)} samples, "
      f"{next(iter(reps.values()))} repetitions per (word, speaker)")

# read one file directly and through the manifest loader
entry = manifest.samples_of(word_id=1, speaker_id=1)[0]
x, rate = read_wav(manifest.audio_path(entry))
u = load_utterance(entry, manifest)
print(f"\nfirst sample: {entry.path}")
print(f"  raw file: {x.size} samples at {rate} Hz "
      f"({1000.0 * x.size / rate:.0f} ms), peak {np.abs(x).max():.3f}")
print(f"  utterance: word={u.word} speaker={u.speaker} group={u.group}")
print(f"  syllable boundaries (samples): {list(u.boundaries)}")
