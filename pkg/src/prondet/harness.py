"""Leave-one-out evaluation harness and report emission.

Protocol: for every (word, held-out speaker) pair, train the requested
detection step on all remaining speakers' data and test the held-out
speaker. The speaker is left out globally, so none of their samples of
any word touch training; the word gate's class-2 test set is the
held-out speaker's other-word samples.

Per-step test material for a fold on word W and speaker S:

  step 1  S's samples of W (class 1) plus S's samples of every other
          word (class 2); accept means verified as W.
  step 2  S's samples of W; class from S's group; accept means native.
  step 3  every syllable of S's samples of W, natives included so the
          rates stay comparable; accept means not flagged.

Error rate P_e = (errors in class 1 + errors in class 2) / all samples.
FNR is the class-1 error fraction, FPR the class-2 error fraction. For
syllable detection a syllable pronounced fine by a non-native speaker
still counts in class 2, so unperturbed syllables show a high FPR and
the genuinely mispronounced syllable is the one with a low FPR.

Reports deliberately omit timing so two runs over the same corpus emit
byte-identical files; timing lives on the in-memory result only.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import NATIVE, CorpusManifest
from .detector import DetectorConfig, FeatureProvider, train_bundle
from .eigenspace import dfes
from .errors import DataError

REPORT_VERSION = 1


@dataclass(frozen=True)
class SampleRecord:
    word: int
    fold_speaker: int
    speaker: int
    repetition: int
    syllable: int | None
    true_class: int       # 1 accept-side, 2 reject-side
    distance: float
    accepted: bool

    @property
    def error(self) -> bool:
        return self.accepted if self.true_class == 2 else not self.accepted


@dataclass(frozen=True)
class FoldRecord:
    word: int
    label: str
    step: int
    fold_speaker: int
    syllable: int | None
    syllable_label: str | None
    threshold: float
    non_separable: bool
    theoretical_error: float
    samples: tuple[SampleRecord, ...]
    train_ms: float = 0.0
    test_ms_per_sample: float = 0.0


@dataclass
class LooResult:
    feature: str
    step: int
    records: list[FoldRecord] = field(default_factory=list)

    @property
    def fold_count(self) -> int:
        return len({(r.word, r.fold_speaker) for r in self.records})


def _word_fold(manifest, provider, cfg, word_id, held_out, step):
    train_speakers = [s.id for s in manifest.speakers if s.id != held_out]
    t0 = time.perf_counter()
    try:
        bundle = train_bundle(word_id, manifest, cfg, provider,
                              speaker_ids=train_speakers, steps=(step,))
    except DataError as exc:
        raise DataError(
            f"fold (word={word_id}, speaker={held_out}) failed: {exc}"
        ) from exc
    train_ms = 1000.0 * (time.perf_counter() - t0)
    label = manifest.word(word_id).label
    group_of = {s.id: s.group for s in manifest.speakers}

    own = manifest.samples_of(word_id=word_id, speaker_id=held_out)
    records = []
    t0 = time.perf_counter()
    if step == 1:
        others = [e for e in manifest.samples
                  if e.speaker == held_out and e.word != word_id]
        samples = []
        for e in own + others:
            d = dfes(bundle.u_all,
                     provider.vector(e, bundle.word_target_ms))
            samples.append(SampleRecord(
                word=word_id, fold_speaker=held_out, speaker=e.speaker,
                repetition=e.repetition, syllable=None,
                true_class=1 if e.word == word_id else 2,
                distance=d, accepted=d < bundle.t_d.threshold))
        test_ms = 1000.0 * (time.perf_counter() - t0) / max(1, len(samples))
        records.append(FoldRecord(
            word=word_id, label=label, step=1, fold_speaker=held_out,
            syllable=None, syllable_label=None,
            threshold=bundle.t_d.threshold,
            non_separable=bundle.t_d.non_separable,
            theoretical_error=bundle.t_d.theoretical_error,
            samples=tuple(samples), train_ms=train_ms,
            test_ms_per_sample=test_ms))
    elif step == 2:
        samples = []
        for e in own:
            d = dfes(bundle.u_nat,
                     provider.vector(e, bundle.word_target_ms))
            samples.append(SampleRecord(
                word=word_id, fold_speaker=held_out, speaker=e.speaker,
                repetition=e.repetition, syllable=None,
                true_class=1 if group_of[e.speaker] == NATIVE else 2,
                distance=d, accepted=d < bundle.t_c.threshold))
        test_ms = 1000.0 * (time.perf_counter() - t0) / max(1, len(samples))
        records.append(FoldRecord(
            word=word_id, label=label, step=2, fold_speaker=held_out,
            syllable=None, syllable_label=None,
            threshold=bundle.t_c.threshold,
            non_separable=bundle.t_c.non_separable,
            theoretical_error=bundle.t_c.theoretical_error,
            samples=tuple(samples), train_ms=train_ms,
            test_ms_per_sample=test_ms))
    elif step == 3:
        n_tested = 0
        for k, det in enumerate(bundle.syllables):
            samples = []
            for e in own:
                d = dfes(det.space, provider.syllable_vector(
                    e, k, bundle.word_target_ms, det.target_ms))
                # accepted means not flagged; the boundary passes
                samples.append(SampleRecord(
                    word=word_id, fold_speaker=held_out, speaker=e.speaker,
                    repetition=e.repetition, syllable=k,
                    true_class=1 if group_of[e.speaker] == NATIVE else 2,
                    distance=d, accepted=not d > det.threshold.threshold))
                n_tested += 1
            records.append(FoldRecord(
                word=word_id, label=label, step=3, fold_speaker=held_out,
                syllable=k, syllable_label=det.label,
                threshold=det.threshold.threshold,
                non_separable=det.threshold.non_separable,
                theoretical_error=det.threshold.theoretical_error,
                samples=tuple(samples), train_ms=train_ms,
                test_ms_per_sample=(1000.0 * (time.perf_counter() - t0)
                                    / max(1, n_tested))))
    else:
        raise DataError(f"unknown step {step}")
    return records


def run_loo(manifest: CorpusManifest, cfg: DetectorConfig, step: int,
            words=None, fold_speakers=None, jobs: int = 1,
            provider: FeatureProvider | None = None) -> LooResult:
    """Leave-one-speaker-out evaluation of one detection step.

    words / fold_speakers restrict the grid (default: everything).
    Results are ordered by (word, fold speaker, syllable) regardless of
    jobs, and folds share no mutable state beyond caches, so reruns and
    restricted runs reproduce the same records. Passing a provider reuses
    its caches across calls; it must wrap the same manifest and config.
    """
    if step not in (1, 2, 3):
        raise DataError("step must be 1, 2, or 3")
    word_ids = sorted(words) if words else [w.id for w in manifest.words]
    speaker_ids = (sorted(fold_speakers) if fold_speakers
                   else [s.id for s in manifest.speakers])

    # One provider for every word: quantized warp targets mostly coincide
    # across words, so sharing turns most preprocessing into cache hits.
    # Cached values are deterministic, so concurrent duplicate computes
    # under jobs>1 waste a little work but cannot corrupt anything.
    if provider is None:
        provider = FeatureProvider(manifest, cfg)
    elif provider.manifest is not manifest or provider.cfg != cfg:
        raise DataError("provider was built for a different manifest or config")

    def run_word(word_id):
        out = []
        for held_out in speaker_ids:
            out.extend(_word_fold(manifest, provider, cfg, word_id,
                                  held_out, step))
        return out

    result = LooResult(feature=cfg.feature, step=step)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for recs in pool.map(run_word, word_ids):
                result.records.extend(recs)
    else:
        for word_id in word_ids:
            result.records.extend(run_word(word_id))
    result.records.sort(key=lambda r: (r.word, r.fold_speaker,
                                       -1 if r.syllable is None else r.syllable))
    return result


def result_to_dict(result: LooResult) -> dict:
    """JSON-ready form of a result: decisions and distances, no timing."""
    return {
        "schema_version": REPORT_VERSION,
        "feature": result.feature,
        "step": result.step,
        "records": [
            {"word": r.word, "label": r.label, "step": r.step,
             "fold_speaker": r.fold_speaker, "syllable": r.syllable,
             "syllable_label": r.syllable_label, "threshold": r.threshold,
             "non_separable": r.non_separable,
             "theoretical_error": r.theoretical_error,
             "samples": [
                 {"speaker": s.speaker, "repetition": s.repetition,
                  "true_class": s.true_class, "distance": s.distance,
                  "accepted": s.accepted}
                 for s in r.samples]}
            for r in result.records],
    }


def result_from_dict(raw: dict) -> LooResult:
    if raw.get("schema_version") != REPORT_VERSION:
        raise DataError(
            f"unsupported result schema_version {raw.get('schema_version')!r}")
    try:
        records = [
            FoldRecord(
                word=r["word"], label=r["label"], step=r["step"],
                fold_speaker=r["fold_speaker"], syllable=r["syllable"],
                syllable_label=r["syllable_label"], threshold=r["threshold"],
                non_separable=r["non_separable"],
                theoretical_error=r["theoretical_error"],
                samples=tuple(
                    SampleRecord(
                        word=r["word"], fold_speaker=r["fold_speaker"],
                        speaker=s["speaker"], repetition=s["repetition"],
                        syllable=r["syllable"], true_class=s["true_class"],
                        distance=s["distance"], accepted=s["accepted"])
                    for s in r["samples"]))
            for r in raw["records"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed result field: {exc}") from exc
    return LooResult(feature=raw["feature"], step=raw["step"],
                     records=records)


def save_result(result: LooResult, path) -> None:
    Path(path).write_text(
        json.dumps(result_to_dict(result), indent=1, sort_keys=True) + "\n")


def load_result(path) -> LooResult:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load result file: {exc}") from exc
    return result_from_dict(raw)


def _rate(errors: int, total: int):
    return None if total == 0 else errors / total


def _metric_row(samples):
    n1 = sum(1 for s in samples if s.true_class == 1)
    n2 = sum(1 for s in samples if s.true_class == 2)
    e1 = sum(1 for s in samples if s.true_class == 1 and s.error)
    e2 = sum(1 for s in samples if s.true_class == 2 and s.error)
    return {
        "n1": n1, "n2": n2, "errors1": e1, "errors2": e2,
        "p_e": _rate(e1 + e2, n1 + n2),
        "fnr": _rate(e1, n1),
        "fpr": _rate(e2, n2),
    }


def compute_metrics(result: LooResult) -> dict:
    """Aggregate stored decisions into per-word (and per-syllable) rates."""
    if not result.records:
        return {"step": result.step, "feature": result.feature,
                "words": [], "syllables": [], "average_p_e": None}
    words = {}
    for rec in result.records:
        words.setdefault((rec.word, rec.label), []).append(rec)

    word_rows = []
    syll_rows = []
    for (wid, label), recs in sorted(words.items()):
        samples = [s for r in recs for s in r.samples]
        row = {"word": wid, "label": label, **_metric_row(samples)}
        fold_pe = [
            _metric_row([s for r in recs if r.fold_speaker == f
                         for s in r.samples])["p_e"]
            for f in sorted({r.fold_speaker for r in recs})]
        fold_pe = [p for p in fold_pe if p is not None]
        row["fold_p_e_max"] = max(fold_pe) if fold_pe else None
        row["fold_p_e_min"] = min(fold_pe) if fold_pe else None
        row["fold_p_e_avg"] = (sum(fold_pe) / len(fold_pe)
                               if fold_pe else None)
        word_rows.append(row)
        if result.step == 3:
            for k in sorted({r.syllable for r in recs}):
                krecs = [r for r in recs if r.syllable == k]
                ksamples = [s for r in krecs for s in r.samples]
                syll_rows.append({
                    "word": wid, "label": label, "syllable": k,
                    "syllable_label": krecs[0].syllable_label,
                    **_metric_row(ksamples),
                    "non_separable_folds":
                        sum(1 for r in krecs if r.non_separable),
                })
    valid = [r["p_e"] for r in word_rows if r["p_e"] is not None]
    return {
        "step": result.step,
        "feature": result.feature,
        "words": word_rows,
        "syllables": syll_rows,
        "average_p_e": sum(valid) / len(valid) if valid else None,
    }


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def emit_report(result: LooResult, fmt: str, out_dir) -> list[Path]:
    """Write metric tables (csv/json) or raw distance rows (plot-data).

    Output is a pure function of the result's decisions and distances:
    stable ordering, no timestamps, no timing.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"step{result.step}_{result.feature}"
    metrics = compute_metrics(result)

    if fmt == "json":
        payload = {
            "schema_version": REPORT_VERSION,
            **metrics,
            "folds": [
                {"word": r.word, "label": r.label,
                 "fold_speaker": r.fold_speaker, "syllable": r.syllable,
                 "threshold": r.threshold,
                 "non_separable": r.non_separable,
                 "theoretical_error": r.theoretical_error}
                for r in result.records],
        }
        path = out_dir / f"report_{stem}.json"
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        return [path]

    if fmt == "csv":
        path = out_dir / f"report_{stem}.csv"
        if result.step == 3:
            header = ["word", "label", "syllable", "syllable_label",
                      "n1", "n2", "errors1", "errors2", "p_e", "fnr", "fpr",
                      "non_separable_folds"]
            rows = [[r[h] for h in header] for r in metrics["syllables"]]
        else:
            header = ["word", "label", "n1", "n2", "errors1", "errors2",
                      "p_e", "fnr", "fpr", "fold_p_e_max", "fold_p_e_min",
                      "fold_p_e_avg"]
            rows = [[r[h] for h in header] for r in metrics["words"]]
        _write_csv(path, header, rows)
        return [path]

    if fmt == "plot-data":
        path = out_dir / f"plot_{stem}.csv"
        header = ["word", "fold_speaker", "speaker", "class", "repetition",
                  "syllable", "distance", "fold_threshold"]
        rows = [
            [s.word, r.fold_speaker, s.speaker, s.true_class, s.repetition,
             s.syllable, s.distance, r.threshold]
            for r in result.records for s in r.samples]
        _write_csv(path, header, rows)
        return [path]

    raise DataError(f"unknown report format {fmt!r}")
