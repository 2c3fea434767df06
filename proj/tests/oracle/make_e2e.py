#!/usr/bin/env python3
"""Builds the end-to-end fixture: dataset, outcome table, mock completions and
brute-force expected metrics.

The expected values are computed from the outcome table alone; the harness
only contributes prompt texts (via --emit-prompts) so the mock can be keyed.

usage: make_e2e.py --xprobe build/xprobe --out tests/fixtures/e2e
"""

import argparse
import itertools
import json
import random
import subprocess
import tempfile
import unicodedata
from pathlib import Path

LANGS = ["eng_Latn", "fra_Latn", "jpn_Jpan"]
SEED = 7
SHOTS = 3

TEMPLATES = {
    "capital": {
        "eng_Latn": "Where is {subject}'s capital located? The answer is:",
        "fra_Latn": "Où se trouve la capitale de {subject} ? La réponse est :",
        "jpn_Jpan": "{subject}の首都はどこにありますか？答えは：",
    },
    "developer": {
        "eng_Latn": "Who developed {subject}? The answer is:",
        "fra_Latn": "Qui a développé {subject} ? La réponse est :",
        "jpn_Jpan": "{subject}を開発したのは誰ですか？答えは：",
    },
}

# (relation, subject eng/fra/jpn, object eng/fra/jpn)
FACTS = [
    ("capital", ("France", "France", "フランス"), ("Paris", "Paris", "パリ")),
    ("capital", ("Italy", "Italie", "イタリア"), ("Rome", "Rome", "ローマ")),
    ("capital", ("Japan", "Japon", "日本"), ("Tokyo", "Tokyo", "東京")),
    ("capital", ("Spain", "Espagne", "スペイン"), ("Madrid", "Madrid", "マドリード")),
    ("capital", ("Egypt", "Égypte", "エジプト"), ("Cairo", "Le Caire", "カイロ")),
    ("capital", ("Peru", "Pérou", "ペルー"), ("Lima", "Lima", "リマ")),
    ("developer", ("Windows", "Windows", "ウィンドウズ"), ("Microsoft", "Microsoft", "マイクロソフト")),
    ("developer", ("iPhone", "iPhone", "アイフォーン"), ("Apple", "Apple", "アップル")),
    ("developer", ("PlayStation", "PlayStation", "プレイステーション"), ("Sony", "Sony", "ソニー")),
    ("developer", ("Android", "Android", "アンドロイド"), ("Google", "Google", "グーグル")),
    ("developer", ("Photoshop", "Photoshop", "フォトショップ"), ("Adobe", "Adobe", "アドビ")),
    ("developer", ("Firefox", "Firefox", "ファイアフォックス"), ("Mozilla", "Mozilla", "モジラ")),
]

WRONG = ["unknown", "I am not sure", "わかりません", "je ne sais pas"]


def build_dataset(root: Path):
    facts = []
    for i, (rel, subj, obj) in enumerate(FACTS):
        facts.append({
            "id": f"f{i:02d}",
            "relation": rel,
            "subject": dict(zip(LANGS, subj)),
            "object": dict(zip(LANGS, obj)),
        })
    root.mkdir(parents=True, exist_ok=True)
    dump(root / "languages.json", LANGS)
    dump(root / "facts.json", facts)
    dump(root / "templates.json", TEMPLATES)
    return facts


def build_outcomes(facts):
    rng = random.Random(20241015)
    translation = {}
    for a, b in itertools.permutations(LANGS, 2):
        for role in ("subject", "object"):
            for f in facts:
                translation[f"{f['id']}|{a}|{b}|{role}"] = rng.random() < 0.6
    recall = {f"{f['id']}|{lang}": rng.random() < 0.55 for lang in LANGS for f in facts}
    return {"translation": translation, "recall": recall}


def judge_key(text):
    return " ".join(unicodedata.normalize("NFC", text).casefold().split())


def completion_for(answer, correct, rng):
    if not correct:
        return rng.choice(WRONG)
    forms = [answer, f" {answer.upper()}.", f"  {answer}  and more", unicodedata.normalize("NFD", answer)]
    return rng.choice(forms)


def emit(xprobe, dataset, task, out):
    subprocess.run([xprobe, "run", "--dataset", str(dataset), "--task", task, "--seed", str(SEED),
                    "--shots", str(SHOTS), "--emit-prompts", str(out)], check=True,
                   stdout=subprocess.DEVNULL)
    return [json.loads(line) for line in out.read_text(encoding="utf-8").splitlines() if line]


def build_mock(prompts, outcomes):
    rng = random.Random(99)
    entries = {}
    for p in prompts:
        if p["task"] == "translation":
            key = f"{p['fact_id']}|{p['source_lang']}|{p['target_lang']}|{p['entity_role']}"
            ok = outcomes["translation"][key]
        else:
            ok = outcomes["recall"][f"{p['fact_id']}|{p['language']}"]
        text = completion_for(p["expected_answer"], ok, rng)
        assert (judge_key(p["expected_answer"]) in judge_key(text)) == ok, (p, text)
        assert p["text"] not in entries, "duplicate prompt text"
        entries[p["text"]] = text
    return {"fallback": "", "entries": entries}


def mean(xs):
    xs = list(xs)
    return sum(xs) / len(xs)


def expected_metrics(facts, outcomes):
    t = outcomes["translation"]
    r = outcomes["recall"]
    ids = [f["id"] for f in facts]
    out = {"recall_accuracy": {}, "pairs": []}
    for lang in LANGS:
        out["recall_accuracy"][lang] = mean(1.0 if r[f"{i}|{lang}"] else 0.0 for i in ids)
    for a, b in itertools.combinations(LANGS, 2):
        row = {"lang_a": a, "lang_b": b}
        for tag, (x, y) in (("ab", (a, b)), ("ba", (b, a))):
            sub = [t[f"{i}|{x}|{y}|subject"] for i in ids]
            obj = [t[f"{i}|{x}|{y}|object"] for i in ids]
            row[f"acc_sub_{tag}"] = mean(1.0 if v else 0.0 for v in sub)
            row[f"acc_obj_{tag}"] = mean(1.0 if v else 0.0 for v in obj)
            row[f"acc_both_{tag}"] = mean(1.0 if s and o else 0.0 for s, o in zip(sub, obj))
        for m in ("sub", "obj", "both"):
            row[f"align_{m}"] = (row[f"acc_{m}_ab"] + row[f"acc_{m}_ba"]) / 2
        ca = {i for i in ids if r[f"{i}|{a}"]}
        cb = {i for i in ids if r[f"{i}|{b}"]}
        row["co"] = len(ca & cb) / len(ca | cb) if ca | cb else None
        out["pairs"].append(row)
    return out


def dump(path, obj):
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--xprobe", required=True)
    ap.add_argument("--out", required=True, type=Path)
    args = ap.parse_args()

    dataset = args.out / "dataset"
    facts = build_dataset(dataset)
    outcomes = build_outcomes(facts)
    with tempfile.TemporaryDirectory() as tmp:
        prompts = emit(args.xprobe, dataset, "translation", Path(tmp) / "t.jsonl")
        prompts += emit(args.xprobe, dataset, "recall", Path(tmp) / "r.jsonl")
    assert len(prompts) == 3 * 4 * 12 + 3 * 12, len(prompts)
    dump(args.out / "outcomes.json", outcomes)
    dump(args.out / "mock.json", build_mock(prompts, outcomes))
    expected = expected_metrics(facts, outcomes)
    expected.update({"seed": SEED, "shots": SHOTS, "languages": LANGS})
    dump(args.out / "expected.json", expected)


if __name__ == "__main__":
    main()
