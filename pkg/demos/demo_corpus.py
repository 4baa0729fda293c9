"""Small shared corpus for the demo scripts.

Four words, six speakers (three native, three non-native), two
repetitions each: 48 wav files, a couple of seconds to build. Three
speakers per group is the floor for leave-one-out work: holding one
out must leave two, and the gates refuse to fit on fewer. The
synthesizer is idempotent, so every demo can call ensure() and only
the first one pays.
"""

from pathlib import Path

from prondet import SynthSpec, load_manifest, synthesize_corpus
from prondet.synth import word_spec

OUT = Path(__file__).resolve().parent / "out" / "corpus"
SEED = 23

WORDS = (
    ("luna", ("lu", "na")),
    ("ventana", ("ven", "ta", "na")),
    ("sol", ("sol",)),
    ("paloma", ("pa", "lo", "ma")),
)


def demo_spec():
    return SynthSpec(
        words=tuple(word_spec(label, syls) for label, syls in WORDS),
        native_speakers=3,
        non_native_speakers=3,
        repetitions=2,
        perturbation=0.35,
    )


def ensure():
    """Synthesize the demo corpus if needed and return its manifest."""
    manifest, changed = synthesize_corpus(demo_spec(), seed=SEED, out_dir=OUT)
    if changed:
        print(f"synthesized {len(changed)} files under {OUT}")
    return manifest


if __name__ == "__main__":
    m = ensure()
    print(f"{len(m.words)} words, {len(m.speakers)} speakers, "
          f"{len(m.samples)} samples")
