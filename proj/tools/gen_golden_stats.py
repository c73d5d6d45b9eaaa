#!/usr/bin/env python3
"""Reference dataset statistics computed straight from canonical JSONL.

Used to produce data/synthetic50_stats.json, which the acceptance test
compares against the C++ dataset_stats output.
"""
import argparse
import json
import sys
import unicodedata
from collections import Counter, defaultdict

SPLITS = ["train", "ind_valid", "ind_test", "ood_valid", "ood_test"]


def norm(word):
    return unicodedata.normalize("NFC", word.strip()).casefold()


def revision(prev, nxt):
    a = Counter(p["icon"] for p in prev["icons"])
    b = Counter(p["icon"] for p in nxt["icons"])
    if a == b:
        return 0
    if all(b[k] >= v for k, v in a.items()):
        return 1
    if all(a[k] >= v for k, v in b.items()):
        return 0
    return 2


def game_facts(rec):
    phrase = rec["phrase"]
    target = [norm(w["text"]) for w in phrase]
    hit = [w["stopword"] for w in phrase]
    exact = False
    for rnd in rec["rounds"]:
        for g in rnd["guesses"]:
            words = [norm(w) for w in g["words"]]
            if len(words) != len(target):
                continue
            for i, w in enumerate(words):
                if w == target[i]:
                    hit[i] = True
            exact = exact or words == target
    missed = sum(1 for i, w in enumerate(phrase) if not w["stopword"] and not hit[i])
    labels = [revision(rec["rounds"][i - 1]["drawing"], rec["rounds"][i]["drawing"])
              for i in range(1, len(rec["rounds"]))]
    return {
        "phrase": " ".join(target),
        "won": missed == 0,
        "obo": missed <= 1,
        "exact": exact,
        "recorded": rec["outcome"] == "won",
        "rounds": len(rec["rounds"]),
        "revision": max(labels) if labels else None,
    }


def pct(n, d):
    return None if d == 0 else 100.0 * n / d


def stats(records):
    by_split = defaultdict(list)
    for r in records:
        by_split[r["split"]].append(game_facts(r))
    out = []
    for split in SPLITS:
        games = by_split.get(split)
        if not games:
            continue
        n = len(games)
        multi = [g for g in games if g["rounds"] >= 2]
        out.append({
            "split": split,
            "games": n,
            "unique_phrases": len({g["phrase"] for g in games}),
            "win_pct": pct(sum(g["won"] for g in games), n),
            "off_by_one_pct": pct(sum(g["obo"] for g in games), n),
            "exact_phrase_win_pct": pct(sum(g["exact"] for g in games), n),
            "recorded_win_pct": pct(sum(g["recorded"] for g in games), n),
            "rounds_ge2_pct": pct(sum(g["rounds"] >= 2 for g in games), n),
            "rounds_ge3_pct": pct(sum(g["rounds"] >= 3 for g in games), n),
            "rounds_ge4_pct": pct(sum(g["rounds"] >= 4 for g in games), n),
            "multi_drawing_games": len(multi),
            "edit_pct": pct(sum(g["revision"] == 0 for g in multi), len(multi)),
            "add_pct": pct(sum(g["revision"] == 1 for g in multi), len(multi)),
            "redraw_pct": pct(sum(g["revision"] == 2 for g in multi), len(multi)),
        })
    return {"total_games": len(records), "splits": out}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("corpus")
    ap.add_argument("-o", "--out")
    args = ap.parse_args()
    with open(args.corpus, encoding="utf-8") as f:
        records = [json.loads(line) for line in f if line.strip()]
    text = json.dumps(stats(records), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
