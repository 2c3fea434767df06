#!/usr/bin/env python3
"""Lens trace fixtures and brute-force aggregates.

lens_50.jsonl        50 records over 8 groupings, dyadic probabilities so sums are exact
lens_50_expected.json  per grouping and layer: mean/median rank and mean prob
lens_strict.jsonl    subinj rank strictly below base at every layer of every grouping
lens_share.jsonl     one grouping, 40 layers, subinj below base on exactly 30

usage: make_lens.py --out tests/fixtures/lens
"""

import argparse
import json
import random
from fractions import Fraction
from pathlib import Path

TARGETS = ["eng_Latn", "fra_Latn", "spa_Latn", "zho_Hans", "jpn_Jpan", "kor_Kore"]
VOCAB = 32000


def header(n_layers, first_layer, **extra):
    h = {"schema": "lens-trace/1", "model": "fixture-lm", "n_layers": n_layers,
         "vocab_size": VOCAB, "targets": TARGETS, "first_layer": first_layer}
    h.update(extra)
    return h


def record(fact, lang, variant, target, points):
    return {"fact_id": fact, "input_language": lang, "variant": variant, "target_language": target,
            "target_token_id": 17, "target_token_text": "▁x",
            "per_layer": [{"layer": l, "rank": r, "prob": p} for l, r, p in points]}


def write(path, head, records):
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(head, ensure_ascii=False) + "\n")
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def median(xs):
    xs = sorted(xs)
    n = len(xs)
    return Fraction(xs[n // 2]) if n % 2 else Fraction(xs[n // 2 - 1] + xs[n // 2], 2)


def fifty(out):
    rng = random.Random(50)
    layers = list(range(1, 7))
    groups = [(lang, var, tgt) for lang in ("jpn_Jpan", "kor_Kore")
              for var in ("base", "subinj") for tgt in ("eng_Latn", "jpn_Jpan")]
    records = []
    for i in range(50):
        lang, var, tgt = groups[i % len(groups)] if i < 40 else rng.choice(groups)
        pts = [(l, rng.randint(1, 5000), Fraction(rng.randint(0, 1024), 1024)) for l in layers]
        records.append(record(f"f{i:02d}", lang, var, tgt, [(l, r, float(p)) for l, r, p in pts]))
    rng.shuffle(records)
    write(out / "lens_50.jsonl", header(6, 1, norm_before_unembed=True), records)

    expected = []
    for key in sorted(set(groups)):
        member = [r for r in records
                  if (r["input_language"], r["variant"], r["target_language"]) == key]
        row = {"input_language": key[0], "variant": key[1], "target_language": key[2],
               "n": len(member), "layers": layers, "mean_rank": [], "median_rank": [], "mean_prob": []}
        for j in range(len(layers)):
            ranks = [m["per_layer"][j]["rank"] for m in member]
            probs = [Fraction(m["per_layer"][j]["prob"]) for m in member]
            row["mean_rank"].append(float(Fraction(sum(ranks), len(ranks))))
            row["median_rank"].append(float(median(ranks)))
            row["mean_prob"].append(float(sum(probs) / len(probs)))
        expected.append(row)
    (out / "lens_50_expected.json").write_text(json.dumps(expected, indent=1) + "\n")


def strict(out):
    rng = random.Random(7)
    layers = list(range(0, 9))
    records = []
    for lang in ("jpn_Jpan", "ara_Arab"):
        for tgt in ("eng_Latn", "zho_Hans"):
            for k in range(3):
                base = [(l, rng.randint(200, 900), rng.randint(0, 64) / 1024) for l in layers]
                treated = [(l, rng.randint(1, 199), rng.randint(64, 512) / 1024) for l in layers]
                records.append(record(f"b{k}", lang, "base", tgt, base))
                records.append(record(f"t{k}", lang, "subinj", tgt, treated))
    h = header(8, 0)
    h["targets"] = TARGETS
    write(out / "lens_strict.jsonl", h, records)


def share(out):
    layers = list(range(1, 41))
    base, treated = [], []
    for l in layers:
        base.append((l, 100, 0.25))
        treated.append((l, 50 if l <= 30 else 100 + l, 0.5))
    write(out / "lens_share.jsonl", header(40, 1),
          [record("s0", "jpn_Jpan", "base", "eng_Latn", base),
           record("s0", "jpn_Jpan", "subinj", "eng_Latn", treated)])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True, type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    fifty(args.out)
    strict(args.out)
    share(args.out)


if __name__ == "__main__":
    main()
