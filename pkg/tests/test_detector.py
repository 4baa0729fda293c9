"""Per-word detector training and the three-step cascade."""

import numpy as np
import pytest

from prondet.corpus import NATIVE, NON_NATIVE, load_utterance
from prondet.detector import (
    NATIVE_STAGE,
    NON_NATIVE_STAGE,
    REJECTED_WORD,
    DetectionOutcome,
    DetectorConfig,
    FeatureProvider,
    detect,
    load_bundle,
    save_bundle,
    syllable_judgements,
    train_bundle,
    word_vector,
)
from prondet.errors import DataError, ModelFormatError


@pytest.fixture(scope="module")
def cfg():
    return DetectorConfig(feature="mfcc13")


@pytest.fixture(scope="module")
def provider(mini_corpus, cfg):
    manifest, _ = mini_corpus
    return FeatureProvider(manifest, cfg)


@pytest.fixture(scope="module")
def bundle(mini_corpus, cfg, provider):
    manifest, _ = mini_corpus
    return train_bundle(2, manifest, cfg, provider=provider)


class TestDetectorConfig:
    def test_rejects_unknown_class2_average(self):
        with pytest.raises(DataError):
            DetectorConfig(class2_average="median")


class TestFeatureProvider:
    def test_vector_is_cached(self, mini_corpus, provider):
        manifest, _ = mini_corpus
        entry = manifest.samples_of(word_id=1)[0]
        a = provider.vector(entry, 700.0)
        b = provider.vector(entry, 700.0)
        assert a is b

    def test_matrix_row_order(self, mini_corpus, provider):
        manifest, _ = mini_corpus
        entries = manifest.samples_of(word_id=1)[:3]
        mat = provider.matrix(entries, 700.0)
        assert mat.shape[0] == 3
        for j, e in enumerate(entries):
            assert np.array_equal(mat[j], provider.vector(e, 700.0))


class TestTrainBundle:
    def test_full_bundle_fields(self, bundle, mini_corpus):
        manifest, _ = mini_corpus
        word = manifest.word(2)
        assert bundle.word == 2
        assert bundle.label == word.label
        assert bundle.feature == "mfcc13"
        assert bundle.u_all is not None
        assert bundle.u_nat is not None
        assert bundle.t_d is not None
        assert bundle.t_c is not None
        assert len(bundle.syllables) == word.syllable_count
        assert bundle.word_target_ms % 10.0 == 0.0
        for det in bundle.syllables:
            assert det.target_ms % 10.0 == 0.0

    def test_partial_training_leaves_steps_empty(self, mini_corpus, cfg,
                                                 provider):
        manifest, _ = mini_corpus
        b = train_bundle(1, manifest, cfg, provider=provider, steps=(1,))
        assert b.u_all is not None
        assert b.u_nat is None
        assert b.syllables is None

    def test_partial_bundle_cannot_run_cascade(self, mini_corpus, cfg,
                                               provider):
        manifest, _ = mini_corpus
        b = train_bundle(1, manifest, cfg, provider=provider, steps=(1,))
        entry = manifest.samples_of(word_id=1)[0]
        with pytest.raises(DataError):
            detect(b, load_utterance(entry, manifest))

    def test_speaker_restriction_is_enforced(self, mini_corpus, cfg):
        manifest, _ = mini_corpus
        with pytest.raises(DataError):
            train_bundle(1, manifest, cfg, speaker_ids=[1, 4, 5, 6])
        with pytest.raises(DataError):
            train_bundle(1, manifest, cfg, speaker_ids=[1, 2, 3])

    def test_deterministic(self, mini_corpus, cfg, provider, bundle):
        manifest, _ = mini_corpus
        again = train_bundle(2, manifest, cfg, provider=provider)
        assert again.t_d.threshold == bundle.t_d.threshold
        assert again.t_c.threshold == bundle.t_c.threshold
        assert np.array_equal(again.u_all.basis, bundle.u_all.basis)


class TestDetect:
    def test_native_training_sample_accepted(self, mini_corpus, bundle):
        manifest, _ = mini_corpus
        native = [e for e in manifest.samples_of(word_id=2, group=NATIVE)]
        outcomes = [detect(bundle, load_utterance(e, manifest))
                    for e in native]
        stages = [o.stage for o in outcomes]
        # training natives pass the word gate, and most clear step 2
        assert all(s != REJECTED_WORD for s in stages)
        assert stages.count(NATIVE_STAGE) > len(stages) / 2

    def test_non_native_training_sample_flagged(self, mini_corpus, bundle):
        manifest, _ = mini_corpus
        target = manifest.samples_of(word_id=2, group=NON_NATIVE)
        outcomes = [detect(bundle, load_utterance(e, manifest))
                    for e in target]
        non_native = [o for o in outcomes if o.stage == NON_NATIVE_STAGE]
        assert len(non_native) > len(outcomes) / 2
        perturbed = [int(np.argmax(o.syllable_distances))
                     for o in non_native if any(o.mispronounced)]
        assert perturbed

    def test_other_word_rejected(self, mini_corpus, bundle):
        manifest, _ = mini_corpus
        other = manifest.samples_of(word_id=3)
        outcomes = [detect(bundle, load_utterance(e, manifest))
                    for e in other]
        rejected = sum(1 for o in outcomes if o.stage == REJECTED_WORD)
        assert rejected > len(outcomes) / 2

    def test_outcome_invariant(self):
        with pytest.raises(DataError):
            DetectionOutcome(stage=NATIVE_STAGE, word_distance=1.0,
                             syllable_distances=(1.0,), mispronounced=(False,))
        with pytest.raises(DataError):
            DetectionOutcome(stage=NON_NATIVE_STAGE, word_distance=1.0)

    def test_syllable_judgements_need_boundaries(self, mini_corpus, bundle):
        manifest, _ = mini_corpus
        entry = manifest.samples_of(word_id=2)[0]
        u = load_utterance(entry, manifest)
        _, pre = word_vector(bundle, u)
        with pytest.raises(DataError):
            syllable_judgements(bundle, pre.with_samples(pre.samples,
                                                         boundaries=None))
        bad = pre.with_samples(pre.samples,
                               boundaries=pre.boundaries[:1])
        with pytest.raises(DataError):
            syllable_judgements(bundle, bad)


class TestBundleIO:
    def test_round_trip_preserves_outcomes(self, mini_corpus, bundle,
                                           tmp_path):
        manifest, _ = mini_corpus
        path = tmp_path / "w02.prdb"
        save_bundle(bundle, path)
        loaded = load_bundle(path)
        assert loaded.word == bundle.word
        assert loaded.label == bundle.label
        for entry in manifest.samples_of(word_id=2)[:4]:
            u = load_utterance(entry, manifest)
            a = detect(bundle, u)
            b = detect(loaded, u)
            assert a.stage == b.stage
            assert a.word_distance == b.word_distance
            assert a.native_distance == b.native_distance
            assert a.syllable_distances == b.syllable_distances

    def test_partial_bundle_cannot_be_saved(self, mini_corpus, cfg, provider,
                                            tmp_path):
        manifest, _ = mini_corpus
        b = train_bundle(1, manifest, cfg, provider=provider, steps=(1,))
        with pytest.raises(DataError):
            save_bundle(b, tmp_path / "w01_step1.prdb")

    def test_corrupt_magic(self, tmp_path, bundle):
        path = tmp_path / "bad.prdb"
        save_bundle(bundle, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(ModelFormatError):
            load_bundle(path)

    def test_truncated_file(self, tmp_path, bundle):
        path = tmp_path / "short.prdb"
        save_bundle(bundle, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ModelFormatError):
            load_bundle(path)
