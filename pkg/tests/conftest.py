"""Shared fixtures: a small synthetic corpus reused across test modules."""

import pytest

from prondet.synth import SynthSpec, synthesize_corpus, word_spec

MINI_WORDS = (
    ("mar", ("mar",)),
    ("perro", ("pe", "rro")),
    ("camino", ("ca", "mi", "no")),
)


def mini_spec(perturbation=0.3):
    return SynthSpec(
        words=tuple(word_spec(label, syls) for label, syls in MINI_WORDS),
        native_speakers=3,
        non_native_speakers=3,
        repetitions=2,
        perturbation=perturbation,
    )


@pytest.fixture(scope="session")
def mini_corpus(tmp_path_factory):
    """(manifest, directory) of a 3-word, 6-speaker corpus at seed 11."""
    out = tmp_path_factory.mktemp("mini_corpus")
    manifest, _ = synthesize_corpus(mini_spec(), seed=11, out_dir=out)
    return manifest, out
