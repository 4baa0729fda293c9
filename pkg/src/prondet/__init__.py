"""Eigenspace-based mispronunciation detection.

Word utterances are projected onto per-word principal subspaces; the
distance from a subspace, compared against two-Gaussian Bayes-optimal
thresholds, drives a three-step decision: is it the right word, does
it sound native, and if not, which syllable is off.
"""

from .corpus import (
    CANONICAL_RATE,
    NATIVE,
    NON_NATIVE,
    CorpusManifest,
    SampleEntry,
    SpeakerEntry,
    Utterance,
    WordEntry,
    load_manifest,
    load_utterance,
    read_wav,
    save_manifest,
    write_wav,
)
from .detector import (
    DetectionOutcome,
    DetectorBundle,
    DetectorConfig,
    FeatureProvider,
    detect,
    load_bundle,
    save_bundle,
    train_bundle,
)
from .eigenspace import (
    Eigenspace,
    class_centroid,
    dfes,
    dfes_many,
    dies,
    project,
    train_eigenspace,
)
from .errors import (
    AudioError,
    DataError,
    ManifestError,
    ModelFormatError,
    NumericalError,
    PronDetError,
    SignalError,
)
from .features import (
    FEATURE_KINDS,
    DEFAULT_GEOMETRY,
    FeatureVector,
    FrameGeometry,
    extract,
    load_features,
    mfcc13,
    save_features,
    spectrogram50,
)
from .harness import (
    LooResult,
    compute_metrics,
    emit_report,
    load_result,
    run_loo,
    save_result,
)
from .preprocess import (
    PreprocessConfig,
    normalize_amplitude,
    preprocess,
    suppress_noise,
    time_scale_to,
    trim_silence,
)
from .synth import (
    REFERENCE_WORDS,
    SynthSpec,
    reference_spec,
    synthesize_corpus,
    synthesize_sample,
)
from .threshold import (
    ThresholdModel,
    classify,
    fit_threshold,
    theoretical_error_at,
)

__version__ = "0.1.0"

__all__ = [
    "AudioError",
    "CANONICAL_RATE",
    "CorpusManifest",
    "DataError",
    "DEFAULT_GEOMETRY",
    "DetectionOutcome",
    "DetectorBundle",
    "DetectorConfig",
    "Eigenspace",
    "FEATURE_KINDS",
    "FeatureProvider",
    "FeatureVector",
    "FrameGeometry",
    "LooResult",
    "ManifestError",
    "ModelFormatError",
    "NATIVE",
    "NON_NATIVE",
    "NumericalError",
    "PronDetError",
    "REFERENCE_WORDS",
    "SampleEntry",
    "SignalError",
    "SpeakerEntry",
    "SynthSpec",
    "ThresholdModel",
    "Utterance",
    "WordEntry",
    "class_centroid",
    "classify",
    "compute_metrics",
    "detect",
    "dfes",
    "dfes_many",
    "dies",
    "emit_report",
    "extract",
    "fit_threshold",
    "load_bundle",
    "load_features",
    "load_manifest",
    "load_result",
    "load_utterance",
    "mfcc13",
    "normalize_amplitude",
    "preprocess",
    "project",
    "read_wav",
    "reference_spec",
    "run_loo",
    "save_bundle",
    "save_features",
    "save_manifest",
    "save_result",
    "spectrogram50",
    "suppress_noise",
    "synthesize_corpus",
    "synthesize_sample",
    "theoretical_error_at",
    "time_scale_to",
    "train_bundle",
    "train_eigenspace",
    "trim_silence",
    "write_wav",
]
