"""Train a per-word detector and run the three-step cascade.

The bundle for one word is trained on the whole demo corpus, then
samples from different origins are pushed through detect(): a native
speaker saying the word, a non-native speaker saying it, and a native
speaker saying a different word. The outcomes show the cascade
stages: word rejection, native acceptance, and syllable judgement.
"""

from demo_corpus import ensure
from prondet import DetectorConfig, detect, load_utterance, train_bundle

manifest = ensure()
cfg = DetectorConfig(feature="mfcc13")

word = manifest.word(2)
bundle = train_bundle(word.id, manifest, cfg)
print(f"bundle for word {word.id} ({word.label!r})")
print(f"  word gate T_d     = {bundle.t_d.threshold:.4f}")
print(f"  native gate T_c   = {bundle.t_c.threshold:.4f}")
print(f"  syllable gates    = "
      f"{[round(s.threshold.threshold, 4) for s in bundle.syllables]}")


def show(tag, entry):
    out = detect(bundle, load_utterance(entry, manifest))
    print(f"\n{tag}: stage={out.stage!r} word_distance={out.word_distance:.3f}")
    if out.native_distance is not None:
        print(f"  native_distance={out.native_distance:.3f}")
    if out.syllable_distances is not None:
        verdicts = ["BAD" if m else "ok" for m in out.mispronounced]
        per = ", ".join(f"{s!r} {d:.3f} {v}" for s, d, v in
                        zip(word.syllables, out.syllable_distances, verdicts))
        print(f"  syllables: {per}")


show("native speaker, right word", manifest.samples_of(word.id, 1)[0])
show("non-native speaker, right word", manifest.samples_of(word.id, 4)[0])
show("native speaker, wrong word", manifest.samples_of(3, 1)[0])
