"""Three-step hierarchical detector: word gate, native gate, syllables.

A per-word DetectorBundle holds three layers of eigenspace + threshold:

  step 1  U_all over both classes of the target word; reject the
          utterance as a different word when its residual distance
          reaches T_d.
  step 2  U_nat over native samples only; call the utterance native
          when its distance stays below T_c.
  step 3  one eigenspace per syllable over native syllable segments;
          flag syllable k as mispronounced when its distance exceeds
          that syllable's T_k.

Threshold training follows a three-phase scheme per step: train the
eigenspace, collect class-1 distances through internal
leave-one-speaker-out sub-folds (so no sample is measured against an
eigenspace it helped train), collect class-2 distances against all
sub-fold eigenspaces (averaged per sample, then per class-2 speaker by
default), and fit the two-Gaussian threshold. The deployed eigenspaces
are then retrained on the full partition.

Word verification rebalances classes with equal priors: class 2 pools
the nine other words, so fitting with empirical frequencies would bury
class 1. This matches replicating the class-1 distances ninefold, which
leaves Gaussian moments unchanged.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .corpus import NATIVE, CorpusManifest, SampleEntry, Utterance, load_utterance
from .eigenspace import (
    Eigenspace,
    dfes,
    dfes_many,
    eigenspace_from_payload,
    eigenspace_to_payload,
    train_eigenspace,
)
from .errors import DataError, ModelFormatError
from .features import DEFAULT_GEOMETRY, FrameGeometry, extract
from .preprocess import (
    PreprocessConfig,
    normalize_amplitude,
    preprocess,
    time_scale_to,
    trim_extent,
)
from .threshold import ThresholdModel, classify, fit_threshold, model_from_dict

BUNDLE_MAGIC = b"PRDB"
BUNDLE_VERSION = 1

REJECTED_WORD = "rejected-word"
NATIVE_STAGE = "native"
NON_NATIVE_STAGE = "non-native"

TARGET_GRID_MS = 10.0  # durations snap to the hop grid so folds share caches


@dataclass(frozen=True)
class DetectorConfig:
    feature: str = "mfcc13"
    variance_fraction: float = 0.8
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    geometry: FrameGeometry = DEFAULT_GEOMETRY
    class2_average: str = "speaker"  # "speaker", "sample", or "none"

    def __post_init__(self):
        if self.class2_average not in ("speaker", "sample", "none"):
            raise DataError("class2_average must be speaker, sample, or none")


@dataclass(frozen=True)
class SyllableDetector:
    label: str
    target_ms: float
    space: Eigenspace
    threshold: ThresholdModel


@dataclass(frozen=True)
class DetectorBundle:
    """Per-word model; steps omitted at training time hold None."""

    word: int
    label: str
    feature: str
    geometry: FrameGeometry
    preprocess: PreprocessConfig
    word_target_ms: float
    u_all: Eigenspace | None
    t_d: ThresholdModel | None
    u_nat: Eigenspace | None
    t_c: ThresholdModel | None
    syllables: tuple[SyllableDetector, ...] | None


@dataclass(frozen=True)
class DetectionOutcome:
    stage: str
    word_distance: float
    native_distance: float | None = None
    syllable_distances: tuple[float, ...] | None = None
    mispronounced: tuple[bool, ...] | None = None

    def __post_init__(self):
        has_syllables = self.syllable_distances is not None
        if has_syllables != (self.stage == NON_NATIVE_STAGE):
            raise DataError(
                "syllable verdicts must be present exactly for the "
                "non-native stage")


def _quantize_ms(ms: float) -> float:
    return max(TARGET_GRID_MS, round(ms / TARGET_GRID_MS) * TARGET_GRID_MS)


class FeatureProvider:
    """Loads, preprocesses, and featurizes manifest samples with caching.

    Cache keys pair the sample with the requested target duration.
    Training snaps every target to the hop grid before asking, so
    targets that agree arrive as the same key and share one pipeline
    run. Preprocessed signals are kept only for samples that need
    syllable segmentation (their own word's target); cross-word
    requests cache the much smaller feature vectors alone.
    """

    def __init__(self, manifest: CorpusManifest, cfg: DetectorConfig):
        self.manifest = manifest
        self.cfg = cfg
        self._trim_ms: dict = {}
        self._vectors: dict = {}
        self._signals: dict = {}
        self._syl_vectors: dict = {}

    @staticmethod
    def _key(entry: SampleEntry):
        return (entry.word, entry.speaker, entry.repetition)

    def _load(self, entry: SampleEntry) -> Utterance:
        return load_utterance(entry, self.manifest)

    def trimmed_ms(self, entry: SampleEntry) -> float:
        key = self._key(entry)
        if key not in self._trim_ms:
            u = self._load(entry)
            start, end = trim_extent(u, self.cfg.preprocess)
            self._trim_ms[key] = 1000.0 * (end - start) / u.rate
        return self._trim_ms[key]

    def _preprocessed(self, entry: SampleEntry, target_ms: float,
                      keep: bool) -> Utterance:
        key = (self._key(entry), target_ms)
        if key in self._signals:
            return self._signals[key]
        u = preprocess(self._load(entry), self.cfg.preprocess, target_ms)
        if keep:
            self._signals[key] = u
        return u

    def vector(self, entry: SampleEntry, target_ms: float) -> np.ndarray:
        """Word-level feature vector at the given target duration."""
        key = (self._key(entry), target_ms)
        if key not in self._vectors:
            u = self._preprocessed(entry, target_ms, keep=False)
            self._vectors[key] = extract(u, self.cfg.feature,
                                         self.cfg.geometry).values
        return self._vectors[key]

    def matrix(self, entries, target_ms: float) -> np.ndarray:
        return np.vstack([self.vector(e, target_ms) for e in entries])

    def syllable_ms(self, entry: SampleEntry, word_target_ms: float):
        """Post-time-scaling syllable durations of a sample, in ms."""
        u = self._preprocessed(entry, word_target_ms, keep=True)
        if u.boundaries is None:
            raise DataError(
                f"sample {entry.path!r} lacks syllable boundaries")
        return tuple(1000.0 * (e - s) / u.rate for s, e in u.boundaries)

    def syllable_vector(self, entry: SampleEntry, k: int,
                        word_target_ms: float, syl_target_ms: float) -> np.ndarray:
        key = (self._key(entry), k, word_target_ms, syl_target_ms)
        if key not in self._syl_vectors:
            u = self._preprocessed(entry, word_target_ms, keep=True)
            if u.boundaries is None:
                raise DataError(
                    f"sample {entry.path!r} lacks syllable boundaries")
            seg = _syllable_segment(u, k, syl_target_ms)
            self._syl_vectors[key] = extract(seg, self.cfg.feature,
                                             self.cfg.geometry).values
        return self._syl_vectors[key]

    def syllable_matrix(self, entries, k, word_target_ms, syl_target_ms):
        return np.vstack([
            self.syllable_vector(e, k, word_target_ms, syl_target_ms)
            for e in entries])


def _syllable_segment(u: Utterance, k: int, target_ms: float) -> Utterance:
    start, end = u.boundaries[k]
    seg = Utterance(samples=u.samples[start:end], rate=u.rate, word=u.word,
                    speaker=u.speaker, group=u.group)
    return normalize_amplitude(time_scale_to(seg, target_ms))


def _group_by_speaker(entries):
    by = {}
    for e in entries:
        by.setdefault(e.speaker, []).append(e)
    return dict(sorted(by.items()))


def _subfold_distances(provider, class1_entries, class2_mat, target_ms,
                       variance_fraction):
    """Internal leave-one-speaker-out pass over class-1 data.

    Returns (d1 per class-1 sample in speaker order, class-2 distance
    matrix of shape (n_subfolds, n_class2), final eigenspace trained on
    everything).
    """
    by_speaker = _group_by_speaker(class1_entries)
    if len(by_speaker) < 2:
        raise DataError("insufficient speakers: internal folds need >= 2")
    d1 = []
    d2_rows = []
    for held_out in by_speaker:
        train = [e for s, es in by_speaker.items() if s != held_out
                 for e in es]
        es = train_eigenspace(provider.matrix(train, target_ms),
                              variance_fraction)
        test_mat = provider.matrix(by_speaker[held_out], target_ms)
        d1.extend(dfes_many(es, test_mat))
        if class2_mat is not None:
            d2_rows.append(dfes_many(es, class2_mat))
    d2 = np.vstack(d2_rows) if d2_rows else None
    final = train_eigenspace(provider.matrix(class1_entries, target_ms),
                             variance_fraction)
    return np.asarray(d1), d2, final


def _collapse_class2(d2_matrix, entries, mode: str):
    """(n_subfolds, n_samples) distances -> the fitted class-2 list.

    "speaker" mode averages each speaker's repetitions of a word into
    one value. The word stays in the group key on purpose: when class 2
    spans several words (the word-verification step) a plain per-speaker
    mean would mix that speaker's closest word with their farthest ones
    and hide exactly the borderline word the threshold has to fence off.
    """
    per_sample = d2_matrix.mean(axis=0)
    if mode == "none":
        return d2_matrix.reshape(-1)
    if mode == "sample":
        return per_sample
    groups = {}
    for value, e in zip(per_sample, entries):
        groups.setdefault((e.speaker, e.word), []).append(value)
    return np.array([np.mean(v) for _, v in sorted(groups.items())])


def _fit_step(provider, class1_entries, class2_entries, class2_mat,
              target_ms, cfg, priors):
    d1, d2_matrix, final = _subfold_distances(
        provider, class1_entries, class2_mat, target_ms,
        cfg.variance_fraction)
    d2 = _collapse_class2(d2_matrix, class2_entries, cfg.class2_average)
    model = fit_threshold(d1, d2, priors)
    return final, model


def train_bundle(word_id: int, manifest: CorpusManifest, cfg: DetectorConfig,
                 provider: FeatureProvider | None = None,
                 speaker_ids=None, steps=(1, 2, 3)) -> DetectorBundle:
    """Train the detection steps for one word on a speaker partition.

    speaker_ids restricts the training partition (the leave-one-out
    harness passes everyone but the held-out speaker); default is all
    manifest speakers. steps selects which layers to train; a bundle
    missing a layer cannot run the full cascade but saves work when a
    single step is under study.
    """
    if provider is None:
        provider = FeatureProvider(manifest, cfg)
    word = manifest.word(word_id)
    if speaker_ids is None:
        speaker_ids = [s.id for s in manifest.speakers]
    speaker_ids = sorted(speaker_ids)
    included = set(speaker_ids)
    steps = frozenset(steps)

    natives = [s for s in speaker_ids
               if manifest.speaker(s).group == NATIVE]
    non_natives = [s for s in speaker_ids if s not in set(natives)]
    if len(natives) < 2:
        raise DataError("insufficient speakers: need >= 2 native")
    if len(non_natives) < 1:
        raise DataError("insufficient speakers: need >= 1 non-native")

    word_entries = [e for e in manifest.samples_of(word_id=word_id)
                    if e.speaker in included]
    other_entries = [e for e in manifest.samples
                     if e.word != word_id and e.speaker in included]
    native_entries = [e for e in word_entries if e.speaker in set(natives)]
    nn_entries = [e for e in word_entries if e.speaker not in set(natives)]

    word_target = _quantize_ms(
        float(np.mean([provider.trimmed_ms(e) for e in word_entries])))

    u_all = t_d = u_nat = t_c = None
    syllables = None

    if 1 in steps:
        # the word gate: both classes of the target word vs other words
        other_mat = provider.matrix(other_entries, word_target)
        u_all, t_d = _fit_step(provider, word_entries, other_entries,
                               other_mat, word_target, cfg, priors=(0.5, 0.5))

    n1, n2 = len(native_entries), len(nn_entries)
    priors = (n1 / (n1 + n2), n2 / (n1 + n2))

    if 2 in steps:
        # native versus non-native on the whole word
        nn_mat = provider.matrix(nn_entries, word_target)
        u_nat, t_c = _fit_step(provider, native_entries, nn_entries, nn_mat,
                               word_target, cfg, priors=priors)

    if 3 in steps:
        # one detector per syllable over boundary segments
        syllables = []
        for k, label in enumerate(word.syllables):
            lengths = [provider.syllable_ms(e, word_target)[k]
                       for e in native_entries]
            syl_target = _quantize_ms(float(np.mean(lengths)))
            nn_syl_mat = provider.syllable_matrix(nn_entries, k, word_target,
                                                  syl_target)
            by_speaker = _group_by_speaker(native_entries)
            d1 = []
            d2_rows = []
            for held_out in by_speaker:
                train = [e for s, es in by_speaker.items() if s != held_out
                         for e in es]
                es = train_eigenspace(
                    provider.syllable_matrix(train, k, word_target,
                                             syl_target),
                    cfg.variance_fraction)
                test = provider.syllable_matrix(by_speaker[held_out], k,
                                                word_target, syl_target)
                d1.extend(dfes_many(es, test))
                d2_rows.append(dfes_many(es, nn_syl_mat))
            d2 = _collapse_class2(np.vstack(d2_rows), nn_entries,
                                  cfg.class2_average)
            model = fit_threshold(np.asarray(d1), d2, priors)
            space = train_eigenspace(
                provider.syllable_matrix(native_entries, k, word_target,
                                         syl_target),
                cfg.variance_fraction)
            syllables.append(SyllableDetector(label, syl_target, space,
                                              model))
        syllables = tuple(syllables)

    return DetectorBundle(
        word=word_id, label=word.label, feature=cfg.feature,
        geometry=cfg.geometry, preprocess=cfg.preprocess,
        word_target_ms=word_target, u_all=u_all, t_d=t_d,
        u_nat=u_nat, t_c=t_c, syllables=syllables)


def word_vector(bundle: DetectorBundle, u: Utterance):
    """Preprocess an utterance to the bundle's geometry and featurize."""
    pre = preprocess(u, bundle.preprocess, bundle.word_target_ms)
    return extract(pre, bundle.feature, bundle.geometry).values, pre


def syllable_judgements(bundle: DetectorBundle, pre: Utterance):
    """Per-syllable distances and verdicts for a preprocessed utterance."""
    if pre.boundaries is None:
        raise DataError("syllable step requires boundaries on the utterance")
    if len(pre.boundaries) != len(bundle.syllables):
        raise DataError(
            f"{len(pre.boundaries)} boundaries for "
            f"{len(bundle.syllables)} syllable detectors")
    distances = []
    flags = []
    for k, det in enumerate(bundle.syllables):
        seg = _syllable_segment(pre, k, det.target_ms)
        v = extract(seg, bundle.feature, bundle.geometry).values
        d = dfes(det.space, v)
        distances.append(d)
        flags.append(d > det.threshold.threshold)
    return tuple(distances), tuple(flags)


def detect(bundle: DetectorBundle, u: Utterance) -> DetectionOutcome:
    """Run the three-step cascade on a raw utterance."""
    if bundle.u_all is None or bundle.u_nat is None or bundle.syllables is None:
        raise DataError("detection needs a bundle trained with all 3 steps")
    v, pre = word_vector(bundle, u)
    d_word = dfes(bundle.u_all, v)
    if not classify(bundle.t_d, d_word):
        return DetectionOutcome(stage=REJECTED_WORD, word_distance=d_word)
    d_nat = dfes(bundle.u_nat, v)
    if classify(bundle.t_c, d_nat):
        return DetectionOutcome(stage=NATIVE_STAGE, word_distance=d_word,
                                native_distance=d_nat)
    distances, flags = syllable_judgements(bundle, pre)
    return DetectionOutcome(
        stage=NON_NATIVE_STAGE, word_distance=d_word, native_distance=d_nat,
        syllable_distances=distances, mispronounced=flags)


def _preprocess_to_dict(cfg: PreprocessConfig) -> dict:
    return {
        "vad_threshold": cfg.vad_threshold,
        "vad_frame_ms": cfg.vad_frame_ms,
        "noise_suppression": cfg.noise_suppression,
        "min_noise_ms": cfg.min_noise_ms,
        "oversubtract": cfg.oversubtract,
        "tsm_tolerance_ms": cfg.tsm_tolerance_ms,
        "target_ms": cfg.target_ms,
    }


def save_bundle(bundle: DetectorBundle, path) -> None:
    """Versioned binary container: JSON descriptor plus raw arrays."""
    if bundle.u_all is None or bundle.u_nat is None or bundle.syllables is None:
        raise DataError("only fully trained bundles can be saved")
    arrays = []
    offset = 0
    index = []

    def put(name, arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype="<f8")
        index.append({"name": name, "offset": offset,
                      "shape": list(arr.shape)})
        arrays.append(arr.tobytes())
        offset += arr.nbytes

    spaces = {"u_all": bundle.u_all, "u_nat": bundle.u_nat}
    space_meta = {}
    for name, es in spaces.items():
        meta, parts = eigenspace_to_payload(es)
        space_meta[name] = meta
        for part, arr in parts.items():
            put(f"{name}.{part}", arr)
    syl_meta = []
    for k, det in enumerate(bundle.syllables):
        meta, parts = eigenspace_to_payload(det.space)
        syl_meta.append({
            "label": det.label, "target_ms": det.target_ms,
            "space": meta, "threshold": det.threshold.as_dict()})
        for part, arr in parts.items():
            put(f"syl{k}.{part}", arr)

    header = {
        "word": bundle.word,
        "label": bundle.label,
        "feature": bundle.feature,
        "geometry": {"window_ms": bundle.geometry.window_ms,
                     "hop_ms": bundle.geometry.hop_ms},
        "preprocess": _preprocess_to_dict(bundle.preprocess),
        "word_target_ms": bundle.word_target_ms,
        "t_d": bundle.t_d.as_dict(),
        "t_c": bundle.t_c.as_dict(),
        "spaces": space_meta,
        "syllables": syl_meta,
        "arrays": index,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(BUNDLE_MAGIC)
        fh.write(struct.pack("<I", BUNDLE_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for chunk in arrays:
            fh.write(chunk)


def load_bundle(path) -> DetectorBundle:
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read bundle: {exc}") from exc
    if raw[:4] != BUNDLE_MAGIC:
        raise ModelFormatError("not a detector bundle (bad magic)")
    if len(raw) < 16:
        raise ModelFormatError("truncated bundle header")
    version = struct.unpack("<I", raw[4:8])[0]
    if version > BUNDLE_VERSION:
        raise ModelFormatError(
            f"bundle format version {version} is newer than supported "
            f"{BUNDLE_VERSION}")
    blob_len = struct.unpack("<Q", raw[8:16])[0]
    try:
        header = json.loads(raw[16:16 + blob_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt bundle header: {exc}") from exc
    body = raw[16 + blob_len:]

    def get(name, meta_index):
        for item in meta_index:
            if item["name"] == name:
                count = int(np.prod(item["shape"])) if item["shape"] else 1
                start = item["offset"]
                end = start + count * 8
                if end > len(body):
                    raise ModelFormatError(f"truncated array {name!r}")
                return np.frombuffer(body[start:end], dtype="<f8").reshape(
                    item["shape"]).copy()
        raise ModelFormatError(f"missing array {name!r}")

    idx = header["arrays"]

    def space(prefix, meta):
        return eigenspace_from_payload(meta, {
            "mean": get(f"{prefix}.mean", idx),
            "basis": get(f"{prefix}.basis", idx),
            "eigenvalues": get(f"{prefix}.eigenvalues", idx)})

    try:
        syllables = tuple(
            SyllableDetector(
                label=s["label"], target_ms=s["target_ms"],
                space=space(f"syl{k}", s["space"]),
                threshold=model_from_dict(s["threshold"]))
            for k, s in enumerate(header["syllables"]))
        return DetectorBundle(
            word=header["word"], label=header["label"],
            feature=header["feature"],
            geometry=FrameGeometry(**header["geometry"]),
            preprocess=PreprocessConfig(**header["preprocess"]),
            word_target_ms=header["word_target_ms"],
            u_all=space("u_all", header["spaces"]["u_all"]),
            t_d=model_from_dict(header["t_d"]),
            u_nat=space("u_nat", header["spaces"]["u_nat"]),
            t_c=model_from_dict(header["t_c"]),
            syllables=syllables)
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed bundle field: {exc}") from exc
