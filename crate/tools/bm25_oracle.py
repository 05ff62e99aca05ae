#!/usr/bin/env python3
"""Direct evaluation of the Okapi BM25 formula over small toy corpora.

Prints the frozen values asserted by the fullranker and lexical-scorer tests.
"""
import math
import re


def tok(text):
    return [t for t in re.split(r"[^0-9a-z]+", text.lower()) if t]


def bm25(corpus, query, doc, k1=1.2, b=0.75):
    docs = {k: tok(v) for k, v in corpus.items()}
    n = len(docs)
    avgdl = sum(len(d) for d in docs.values()) / n
    score = 0.0
    for q in query:
        df = sum(1 for d in docs.values() if q in d)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        tf = docs[doc].count(q)
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(docs[doc]) / avgdl))
    return score


def lexical(corpus, query, passage):
    docs = [tok(v) for v in corpus.values()]
    n = len(docs)
    toks = tok(passage)
    if not toks:
        return 0.0
    total = 0.0
    for q in set(tok(query)):
        if q in toks:
            df = sum(1 for d in docs if q in d)
            total += math.log(1 + (n - df + 0.5) / (df + 0.5))
    return total / math.sqrt(len(toks))


toy = {"d1": "the cat sat on the mat", "d2": "dogs chase cats"}
print("bm25 d1 cat      ", repr(bm25(toy, ["cat"], "d1")))
print("bm25 d2 cat      ", repr(bm25(toy, ["cat"], "d2")))
print("bm25 d1 the,cat  ", repr(bm25(toy, ["the", "cat"], "d1")))
print("bm25 d2 dogs,cats", repr(bm25(toy, ["dogs", "cats"], "d2")))
print("lexical d1 'the cat'", repr(lexical(toy, "the cat", toy["d1"])))
print("lexical d2 'cats and dogs'", repr(lexical(toy, "cats and dogs", toy["d2"])))
