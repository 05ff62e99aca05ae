#!/usr/bin/env python3
"""Writes the toy end-to-end fixture and a frozen ranking-evaluation report.

fixtures/toy/        five-passage collection, queries, qrels, answers, and the
                     BM25 ordering of every matching passage per query.
fixtures/eval/       a TREC run plus qrels and the MRR@n / Recall@n values
                     computed here, independently of the library.
"""
import json
import math
import random
import re
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "fixtures"


def tok(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t]


def bm25_all(corpus, query, k1=1.2, b=0.75):
    docs = {k: tok(v) for k, v in corpus.items()}
    n = len(docs)
    avgdl = sum(len(d) for d in docs.values()) / n
    scores = {}
    for pid, d in docs.items():
        s, hit = 0.0, False
        for q in tok(query):
            tf = d.count(q)
            if tf == 0:
                continue
            hit = True
            df = sum(1 for x in docs.values() if q in x)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(d) / avgdl))
        if hit:
            scores[pid] = s
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


TOY = {
    "p1": "The cat sat on the mat. It was a warm afternoon.",
    "p2": "Dogs chase cats in the park. Cats escape up the trees.",
    "p3": "Quantum entanglement links particles across distance. Einstein called it spooky action.",
    "p4": "A cat and a dog became friends. They share the mat by the door.",
    "p5": "The park opens at dawn. Dogs are welcome on a leash.",
}
QUERIES = {
    "q1": "what is quantum entanglement",
    "q2": "cat on the mat",
    "q3": "zebra migration",
}
QRELS = {"q1": ["p3"], "q2": ["p1", "p4"]}
ANSWERS = {
    "q1": ["Quantum entanglement links particles across distance."],
    "q2": ["The cat sat on the mat."],
}


def write_toy():
    d = OUT / "toy"
    d.mkdir(parents=True, exist_ok=True)
    (d / "collection.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in TOY.items()))
    (d / "queries.tsv").write_text("".join(f"{k}\t{v}\n" for k, v in QUERIES.items()))
    (d / "qrels.tsv").write_text("".join(f"{q}\t0\t{p}\t1\n" for q, ps in QRELS.items() for p in ps))
    (d / "answers.tsv").write_text("".join(f"{q}\t{a}\n" for q, ans in ANSWERS.items() for a in ans))
    expected = {q: [[p, s] for p, s in bm25_all(TOY, text)] for q, text in QUERIES.items()}
    (d / "expected_search.json").write_text(json.dumps(expected, indent=1) + "\n")


def rr_at(ranking, rel, n):
    for i, p in enumerate(ranking[:n]):
        if p in rel:
            return 1.0 / (i + 1)
    return 0.0


def recall_at(ranking, rel, n):
    return sum(1 for p in ranking[:n] if p in rel) / len(rel)


def write_eval():
    rng = random.Random(20240611)
    d = OUT / "eval"
    d.mkdir(parents=True, exist_ok=True)
    pool = [f"d{i}" for i in range(40)]
    run, qrels = {}, {}
    for qi in range(12):
        q = f"q{qi}"
        run[q] = rng.sample(pool, rng.randint(0, 15))
        if qi != 11:
            rel = set(rng.sample(pool, rng.randint(1, 3)))
            if run[q] and rng.random() < 0.7:
                rel.add(rng.choice(run[q]))
            qrels[q] = sorted(rel)
    qrels["q_missing"] = ["d1"]
    lines = []
    for q, ranking in run.items():
        for i, p in enumerate(ranking):
            lines.append(f"{q} Q0 {p} {i + 1} {100 - i:.6f} oracle\n")
    (d / "run.txt").write_text("".join(lines))
    (d / "qrels.tsv").write_text("".join(f"{q}\t0\t{p}\t1\n" for q, ps in qrels.items() for p in ps))

    n_values = [1, 3, 10]
    # only queries present in the run file and judged are evaluated; a query
    # with an empty ranking has no lines and so is absent from the file
    in_file = {q: r for q, r in run.items() if r}
    per_query = {}
    for q, ranking in in_file.items():
        rel = set(qrels.get(q, []))
        if not rel:
            continue
        m = {}
        for n in n_values:
            m[f"mrr@{n}"] = rr_at(ranking, rel, n)
            m[f"recall@{n}"] = recall_at(ranking, rel, n)
        per_query[q] = m
    keys = sorted(next(iter(per_query.values())))
    aggregate = {k: sum(m[k] for m in per_query.values()) / len(per_query) for k in keys}
    report = {"n_values": n_values, "per_query": per_query, "aggregate": aggregate,
              "evaluated": len(per_query), "skipped": len(in_file) - len(per_query)}
    (d / "expected.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    write_toy()
    write_eval()
    print("wrote", OUT / "toy", "and", OUT / "eval")
