"""Command-line front end.

Subcommands: synth, train, detect, loo, report. A JSON config file
(--config) can hold any long-lived settings; command-line flags
override it, and built-in defaults fill the rest.

Exit codes: 0 success, 2 usage or config schema errors, 3 data errors
(manifests, audio, model files), 4 numerical errors (degenerate
statistics, unusable signals).

Detection outcome JSON (stdout of `detect`)::

    {"stage": "rejected-word" | "native" | "non-native",
     "word_distance": float,
     "native_distance": float | null,
     "syllables": [{"label": str, "distance": float,
                    "mispronounced": bool}] | null}
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    CANONICAL_RATE,
    Utterance,
    load_manifest,
    read_wav,
    resample_linear,
)
from .detector import DetectorConfig, detect, load_bundle, save_bundle, train_bundle
from .errors import DataError, NumericalError, PronDetError
from .features import FEATURE_KINDS
from .harness import emit_report, load_result, run_loo, save_result
from .preprocess import PreprocessConfig
from .synth import SynthSpec, reference_spec, synthesize_corpus, word_spec

USAGE_EXIT = 2
DATA_EXIT = 3
NUMERICAL_EXIT = 4


class UsageError(Exception):
    pass


def _load_config(path):
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config parse failure: {exc}") from exc
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    known = {"manifest", "feature", "variance_fraction", "preprocess",
             "synth", "out", "seed", "jobs"}
    for key in raw:
        if key not in known:
            raise UsageError(f"unknown config field {key!r}")
    return raw


def _setting(args, config, name, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _preprocess_config(config) -> PreprocessConfig:
    section = config.get("preprocess", {})
    if not isinstance(section, dict):
        raise UsageError("config field 'preprocess' must be an object")
    try:
        return PreprocessConfig(**section)
    except (TypeError, DataError) as exc:
        raise UsageError(f"bad preprocess config: {exc}") from exc


def _detector_config(args, config) -> DetectorConfig:
    feature = _setting(args, config, "feature", "mfcc13")
    if feature not in FEATURE_KINDS:
        raise UsageError(f"feature must be one of {FEATURE_KINDS}")
    vf = float(_setting(args, config, "variance_fraction", 0.8))
    if not 0.0 < vf <= 1.0:
        raise UsageError("variance fraction must lie in (0, 1]")
    return DetectorConfig(feature=feature, variance_fraction=vf,
                          preprocess=_preprocess_config(config))


def _synth_spec(args, config) -> SynthSpec:
    spec_path = getattr(args, "spec", None)
    section = config.get("synth")
    perturbation = getattr(args, "perturbation", None)
    if spec_path is not None:
        try:
            raw = json.loads(Path(spec_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read synth spec: {exc}") from exc
    elif section is not None:
        raw = section
    else:
        raw = {}
    if not isinstance(raw, dict):
        raise UsageError("synth spec must be a JSON object")
    if perturbation is None:
        perturbation = raw.get("perturbation", 0.3)
    words = raw.get("words")
    base = reference_spec(float(perturbation))
    if words is None:
        spec = base
    else:
        try:
            spec = SynthSpec(
                words=tuple(word_spec(w["label"], tuple(w["syllables"]))
                            for w in words),
                native_speakers=int(raw.get("native_speakers", 7)),
                non_native_speakers=int(raw.get("non_native_speakers", 6)),
                repetitions=int(raw.get("repetitions", 5)),
                perturbation=float(perturbation))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad synth spec field: {exc}") from exc
    return spec


def cmd_synth(args, config) -> int:
    seed = _setting(args, config, "seed")
    if seed is None:
        raise UsageError("synth requires --seed")
    out = Path(_setting(args, config, "out", "corpus"))
    spec = _synth_spec(args, config)
    manifest, changed = synthesize_corpus(spec, int(seed), out)
    if changed:
        print(f"wrote {len(changed)} files")
    else:
        print("up to date")
    print(out / "manifest.json")
    return 0


def _manifest(args, config):
    path = _setting(args, config, "manifest")
    if path is None:
        raise UsageError("a manifest path is required (--manifest)")
    return load_manifest(path)


def cmd_train(args, config) -> int:
    manifest = _manifest(args, config)
    if args.word is None:
        raise UsageError("train requires --word")
    cfg = _detector_config(args, config)
    out = Path(_setting(args, config, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    bundle = train_bundle(args.word, manifest, cfg)
    path = out / f"bundle_w{args.word:02d}_{cfg.feature}.prdb"
    save_bundle(bundle, path)
    print(path)
    return 0


def _load_wav_utterance(wav_path, manifest=None) -> Utterance:
    data, rate = read_wav(wav_path)
    boundaries = None
    word = speaker = -1
    if manifest is not None:
        name = Path(wav_path).name
        for entry in manifest.samples:
            if Path(entry.path).name == name:
                boundaries = entry.boundaries
                word, speaker = entry.word, entry.speaker
                break
    if rate != CANONICAL_RATE:
        scale = CANONICAL_RATE / rate
        data = resample_linear(data, rate, CANONICAL_RATE)
        if boundaries is not None:
            boundaries = tuple(
                (int(round(s * scale)), int(round(e * scale)))
                for s, e in boundaries)
    return Utterance(samples=data, rate=CANONICAL_RATE, word=word,
                     speaker=speaker, boundaries=boundaries)


def _parse_boundaries(text):
    try:
        pairs = tuple(
            tuple(int(v) for v in chunk.split(":"))
            for chunk in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --boundaries (want s0:e0,s1:e1,...): {exc}")
    if any(len(p) != 2 for p in pairs):
        raise UsageError("bad --boundaries (want s0:e0,s1:e1,...)")
    return pairs


def cmd_detect(args, config) -> int:
    bundle = load_bundle(args.bundle)
    manifest = None
    if _setting(args, config, "manifest") is not None:
        manifest = _manifest(args, config)
    u = _load_wav_utterance(args.wav, manifest)
    if args.boundaries is not None:
        u = Utterance(samples=u.samples, rate=u.rate, word=u.word,
                      speaker=u.speaker,
                      boundaries=_parse_boundaries(args.boundaries))
    outcome = detect(bundle, u)
    payload = {
        "stage": outcome.stage,
        "word_distance": outcome.word_distance,
        "native_distance": outcome.native_distance,
        "syllables": None,
    }
    if outcome.syllable_distances is not None:
        payload["syllables"] = [
            {"label": det.label, "distance": d, "mispronounced": flag}
            for det, d, flag in zip(bundle.syllables,
                                    outcome.syllable_distances,
                                    outcome.mispronounced)]
    print(json.dumps(payload, indent=1, sort_keys=True))
    return 0


def cmd_loo(args, config) -> int:
    manifest = _manifest(args, config)
    cfg = _detector_config(args, config)
    out = Path(_setting(args, config, "out", "."))
    jobs = int(_setting(args, config, "jobs", 1))
    words = [args.word] if args.word is not None else None
    result = run_loo(manifest, cfg, args.step, words=words, jobs=jobs)
    out.mkdir(parents=True, exist_ok=True)
    result_path = out / f"result_step{args.step}_{cfg.feature}.json"
    save_result(result, result_path)
    paths = [result_path]
    for fmt in args.format.split(","):
        paths.extend(emit_report(result, fmt.strip(), out))
    for p in paths:
        print(p)
    return 0


def cmd_report(args, config) -> int:
    result = load_result(args.result)
    out = Path(_setting(args, config, "out", "."))
    for path in emit_report(result, args.format, out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prondet",
        description="Eigenspace-based mispronunciation detection")
    parser.add_argument("--config", help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", help="synth spec JSON (default: built-in words)")
    p.add_argument("--seed", type=int)
    p.add_argument("--perturbation", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one word's detector bundle")
    p.add_argument("--manifest")
    p.add_argument("--word", type=int)
    p.add_argument("--feature", choices=FEATURE_KINDS)
    p.add_argument("--variance-fraction", dest="variance_fraction",
                   type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run detection on a WAV file")
    p.add_argument("--bundle", required=True)
    p.add_argument("--wav", required=True)
    p.add_argument("--manifest",
                   help="look up syllable boundaries by file name")
    p.add_argument("--boundaries", help="explicit s0:e0,s1:e1,... in samples")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("loo", help="leave-one-speaker-out evaluation")
    p.add_argument("--manifest")
    p.add_argument("--step", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--feature", choices=FEATURE_KINDS)
    p.add_argument("--variance-fraction", dest="variance_fraction",
                   type=float)
    p.add_argument("--word", type=int, help="restrict to one word id")
    p.add_argument("--jobs", type=int)
    p.add_argument("--format", default="json,csv,plot-data")
    p.add_argument("--out")
    p.set_defaults(func=cmd_loo)

    p = sub.add_parser("report", help="re-emit reports from a saved result")
    p.add_argument("--result", required=True)
    p.add_argument("--format", required=True,
                   choices=("csv", "json", "plot-data"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return NUMERICAL_EXIT
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_EXIT
    except PronDetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
