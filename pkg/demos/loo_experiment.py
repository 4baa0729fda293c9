"""Leave-one-speaker-out evaluation on the demo corpus.

Runs all three steps of the cascade with the evaluation harness and
prints the per-word error tables. Every fold retrains without one
speaker and tests on that speaker alone, so the numbers measure
generalization to an unseen voice, not memorization.
"""

import time

from demo_corpus import demo_spec, ensure
from prondet import DetectorConfig, FeatureProvider, compute_metrics, run_loo

manifest = ensure()
cfg = DetectorConfig(feature="mfcc13")

# one shared feature cache keeps the three runs from redoing the
# preprocessing twenty times over
provider = FeatureProvider(manifest, cfg)

for step, title in ((1, "word verification"),
                    (2, "native / non-native split"),
                    (3, "syllable judgement")):
    t0 = time.time()
    result = run_loo(manifest, cfg, step=step, jobs=2, provider=provider)
    metrics = compute_metrics(result)
    print(f"\nstep {step} ({title}), {time.time() - t0:.1f} s, "
          f"{result.fold_count} folds")
    print(f"  {'word':10s} {'n':>4s} {'errors':>7s} {'P_e':>8s}")
    for row in metrics["words"]:
        n = row["n1"] + row["n2"]
        errors = row["errors1"] + row["errors2"]
        print(f"  {row['label']:10s} {n:4d} {errors:7d} "
              f"{100.0 * row['p_e']:7.2f}%")
    print(f"  average P_e = {100.0 * metrics['average_p_e']:.2f}%")
    if step == 3:
        # the synthesizer perturbs exactly one syllable per word for
        # non-native speakers; everything else they say is fine, so a
        # low false-positive rate singles out the mispronounced one
        truth = {i: w.perturbed_index
                 for i, w in enumerate(demo_spec().words, start=1)}
        print(f"\n  {'word':10s} {'syllable':>9s} {'FPR':>8s}")
        for row in metrics["syllables"]:
            mark = " <- perturbed" if row["syllable"] == truth[row["word"]] else ""
            print(f"  {row['label']:10s} {row['syllable']:9d} "
                  f"{100.0 * row['fpr']:7.2f}%{mark}")
