"""Synthetic keyword corpora for training tests.

Each class owns two exclusive marker words; filler words are shared by
all classes. Every token is purely alphabetic and absent from the shipped
stopword list, so the texts pass preprocessing unchanged.
"""

import csv
import random

from sentigru import LabeledCorpus, LabeledRecord

CLASS_MARKS = [(f"kw{c}a", f"kw{c}b") for c in "abcdef"]
FILLER_POOL = [f"fill{a}{b}" for a in "abcdefgh" for b in "abcdefgh"]


def keyword_corpus(per_class: int = 10, seed: int = 0, fillers: int = 3,
                   marks: int = 2, pool_size: int = 16,
                   confusion: float = 0.0) -> LabeledCorpus:
    """Build 6*per_class records; text = shuffled fillers + class markers.

    ``marks`` of the class's two markers appear per record (1 samples one
    of the pair). ``confusion`` is the probability that a record's markers
    are swapped for another class's, capping achievable accuracy.
    """
    rng = random.Random(seed)
    pool = FILLER_POOL[:pool_size]
    records = []
    for label in range(6):
        for _ in range(per_class):
            source = label
            if confusion and rng.random() < confusion:
                source = rng.randrange(6)
            pair = CLASS_MARKS[source]
            chosen = list(pair) if marks >= 2 else [rng.choice(pair)]
            words = [rng.choice(pool) for _ in range(fillers)] + chosen
            rng.shuffle(words)
            records.append(LabeledRecord(" ".join(words), label))
    rng.shuffle(records)
    return LabeledCorpus(tuple(records))


def write_csv(corpus: LabeledCorpus, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["text", "label"])
        for rec in corpus.records:
            writer.writerow([rec.text, rec.label])
