#!/usr/bin/env python3
"""Reference implementations of the QA metrics, used to freeze test fixtures.

Writes crates/core/tests/fixtures/metric_pairs.json and toy_vectors.txt.
Kept deliberately naive (direct counting, textbook LCS table) and free of
any code shared with the Rust library.
"""
import json
import math
import os
import random
import string
from collections import Counter

EPS = 1e-9
ARTICLES = {"a", "an", "the"}
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "crates", "core", "tests", "fixtures")


def normalize(text):
    text = text.lower()
    text = "".join(ch for ch in text if ch not in string.punctuation)
    return [t for t in text.split() if t not in ARTICLES]


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(pred, refs, max_n):
    p = normalize(pred)
    rs = [normalize(r) for r in refs]
    if not p:
        return 0.0
    # orders longer than the prediction have no n-grams and are left out
    orders = min(max_n, len(p))
    logs = 0.0
    for n in range(1, orders + 1):
        pc = ngrams(p, n)
        best = Counter()
        for r in rs:
            for g, c in ngrams(r, n).items():
                best[g] = max(best[g], c)
        clipped = sum(min(c, best[g]) for g, c in pc.items())
        total = max(len(p) - n + 1, 0)
        prec = clipped / total if clipped > 0 else EPS
        logs += math.log(prec)
    c = len(p)
    r = min((abs(len(x) - c), len(x)) for x in rs)[1]
    bp = min(1.0, math.exp(1.0 - r / c))
    return bp * math.exp(logs / orders)


def lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def rouge_l(pred, refs):
    p = normalize(pred)
    best = 0.0
    for ref in refs:
        r = normalize(ref)
        if not p or not r:
            continue
        l = lcs(p, r)
        if l == 0:
            continue
        prec, rec = l / len(p), l / len(r)
        best = max(best, 2 * prec * rec / (prec + rec))
    return best


def token_prf(pred, refs):
    p = normalize(pred)
    best = (0.0, 0.0, 0.0)
    for ref in refs:
        r = normalize(ref)
        if not p or not r:
            continue
        pc, rc = Counter(p), Counter(r)
        matched = sum(min(c, rc[t]) for t, c in pc.items())
        if matched == 0:
            continue
        prec, rec = matched / len(p), matched / len(r)
        f1 = 2 * prec * rec / (prec + rec)
        if f1 > best[2]:
            best = (prec, rec, f1)
    return best


def word_tokens(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def mean_vec(tokens, table):
    vecs = [table[t] for t in tokens if t in table]
    if not vecs:
        return None
    dim = len(vecs[0])
    return [sum(v[i] for v in vecs) / len(vecs) for i in range(dim)]


def semantic(pred, ref, table):
    a = mean_vec(word_tokens(pred), table)
    b = mean_vec(word_tokens(ref), table)
    if a is None or b is None:
        return 0.0
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0 or nb == 0:
        return 0.0
    return dot / (na * nb)


VOCAB = ["the", "a", "an", "cat", "dog", "sat", "on", "mat", "ran", "red",
         "blue", "fast", "slow", "house", "tree", "is", "was", "quick",
         "brown", "fox", "virus", "cell", "19"]
OOV = ["zebra", "quokka", "xylem"]


def random_text(rng, lo, hi):
    words = []
    for _ in range(rng.randint(lo, hi)):
        w = rng.choice(VOCAB + OOV if rng.random() < 0.15 else VOCAB)
        if rng.random() < 0.15:
            w = w.capitalize()
        if rng.random() < 0.1:
            w += rng.choice([".", ",", "!", "?", ";"])
        words.append(w)
    return " ".join(words)


def main():
    rng = random.Random(20240607)
    table = {}
    for w in VOCAB:
        table[w] = [round(rng.uniform(-1, 1), 4) for _ in range(5)]
    with open(os.path.join(OUT, "toy_vectors.txt"), "w") as f:
        for w, v in table.items():
            f.write(w + " " + " ".join(repr(x) for x in v) + "\n")

    cases = []
    for i in range(64):
        pred = random_text(rng, 0 if i % 17 == 0 else 1, 12)
        nrefs = 2 if i % 5 == 0 else 1
        refs = [random_text(rng, 1, 12) for _ in range(nrefs)]
        if i % 9 == 0:
            refs[0] = pred
        if i % 7 == 3 and pred:
            # partial copy so higher-order n-grams actually match
            words = pred.split()
            refs[0] = " ".join(words[: max(1, len(words) - 2)] + ["tree", "house"])
        p, r, f = token_prf(pred, refs)
        cases.append({
            "prediction": pred,
            "references": refs,
            "bleu1": bleu(pred, refs, 1),
            "bleu2": bleu(pred, refs, 2),
            "bleu3": bleu(pred, refs, 3),
            "bleu4": bleu(pred, refs, 4),
            "rouge_l": rouge_l(pred, refs),
            "precision": p,
            "recall": r,
            "f1": f,
            "semantic_sim": semantic(pred, refs[0], table),
        })
    with open(os.path.join(OUT, "metric_pairs.json"), "w") as f:
        json.dump(cases, f, indent=1)
    print(f"wrote {len(cases)} cases")


if __name__ == "__main__":
    main()
