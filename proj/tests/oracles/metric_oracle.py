"""Reference values for tests/fixtures/metric_corpus.json.

Writes tests/fixtures/metric_expected.json. Run from the repository root:
    python3 tests/oracles/metric_oracle.py
"""
import json
import math
import re
import string
from collections import Counter
from functools import lru_cache
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
BETA2 = 1.2
SETTINGS = [(5, 16), (2, 4), (1, 3), (1, 16)]


def tokens(text):
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return text.lower().split()


def lcs(a, b):
    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


def rouge(c, r):
    c, r = tokens(c), tokens(r)
    m = lcs(tuple(c), tuple(r))
    if m == 0:
        return 0.0
    p, rec = m / len(c), m / len(r)
    return (1 + BETA2) * p * rec / (rec + BETA2 * p)


def grams(toks, n):
    return Counter(tuple(toks[i:i + n]) for i in range(len(toks) - n + 1))


def cider(cands, refs):
    count = len(cands)
    df = Counter()
    for r in refs:
        df.update(set(g for n in range(1, 5) for g in grams(tokens(r), n)))

    def vec(c):
        return {g: v * (math.log(count) - math.log(max(1.0, df[g]))) for g, v in c.items()}

    def cos(a, b):
        na = math.sqrt(sum(v * v for v in a.values()))
        nb = math.sqrt(sum(v * v for v in b.values()))
        if na == 0 or nb == 0:
            return 0.0
        return sum(v * b.get(g, 0.0) for g, v in a.items()) / (na * nb)

    scores = []
    for c, r in zip(cands, refs):
        s = sum(cos(vec(grams(tokens(c), n)), vec(grams(tokens(r), n))) for n in range(1, 5))
        scores.append(10 * s / 4)
    return scores


def f1(a, b):
    a, b = tokens(a), tokens(b)
    if not a or not b:
        return 0.0
    overlap = sum((Counter(a) & Counter(b)).values())
    return 2 * overlap / (len(a) + len(b))


def recall_hits(preds, refs, k, n):
    hits = 0
    count = len(refs)
    width = min(n, count)
    for i, p in enumerate(preds):
        begin = min(max(i - n // 2, 0), count - width)
        window = list(range(begin, begin + width))
        # Sort by similarity descending, earlier reference first on ties.
        ranked = sorted(window, key=lambda j: (-f1(p, refs[j]), j))
        hits += ranked.index(i) < k
    return hits


def names(text, characters):
    words = set(w.lower() for w in re.findall(r"[A-Za-z0-9]+", text))
    return {c for c in characters if c.split()[0].lower() in words}


def critic(p, r, characters):
    a, b = names(p, characters), names(r, characters)
    if not a and not b:
        return None
    return len(a & b) / len(a | b)


def main():
    corpus = json.loads((ROOT / "tests/fixtures/metric_corpus.json").read_text())
    items = [(m, it) for m in corpus["movies"] for it in m["items"]]
    cands = [it["prediction"] for _, it in items]
    refs = [it["reference"] for _, it in items]
    ciders = cider(cands, refs)
    out = {"items": [], "recall": {}}
    for (m, it), c in zip(items, ciders):
        out["items"].append({
            "ad_id": it["ad_id"],
            "rouge_l": rouge(it["prediction"], it["reference"]),
            "cider": c,
            "token_f1": f1(it["prediction"], it["reference"]),
            "critic": critic(it["prediction"], it["reference"], m["characters"]),
        })
    for k, n in SETTINGS:
        hits = sum(recall_hits([i["prediction"] for i in m["items"]], [i["reference"] for i in m["items"]], k, n)
                   for m in corpus["movies"])
        out["recall"][f"{k}/{n}"] = 100.0 * hits / len(items)
    crit = [i["critic"] for i in out["items"] if i["critic"] is not None]
    out["corpus"] = {
        "rouge_l": sum(i["rouge_l"] for i in out["items"]) / len(items),
        "cider": sum(ciders) / len(items),
        "critic": sum(crit) / len(crit),
    }
    (ROOT / "tests/fixtures/metric_expected.json").write_text(json.dumps(out, indent=1) + "\n")


if __name__ == "__main__":
    main()
