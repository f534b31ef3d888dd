#!/usr/bin/env python3
"""Regenerates the fixture databases and rule files under tests/fixtures.

Output is deterministic; rerunning must leave the checked-in files unchanged.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

FILLER = [
    "meeting", "report", "weather", "garden", "recipe", "travel", "budget", "market",
    "coffee", "music", "river", "summer", "window", "paper", "letter", "office",
    "street", "movie", "school", "family", "holiday", "station", "camera", "forest",
]


def filler(rng, n):
    return rng.sample(FILLER, n)


def write_snapshot(path, docs):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for doc_id, tokens, label in docs:
            record = {"id": doc_id, "tokens": tokens}
            if label is not None:
                record["label"] = label
            f.write(json.dumps(record, separators=(",", ":")) + "\n")


def example2():
    """500 documents: mac 92, graphics+windows 288 (none with mac),
    no god+christian document, 2 baseball documents outside the other rules."""
    rng = random.Random(2)
    docs = []

    def add(prefix, tokens, label):
        tokens = sorted(set(tokens))
        docs.append((f"{prefix}{len(docs):03d}", tokens, label))

    for i in range(92):
        extra = ["graphics"] if i % 4 == 0 else (["windows"] if i % 4 == 1 else [])
        add("d", ["mac"] + extra + filler(rng, 3), "Computers")
    for _ in range(288):
        add("d", ["graphics", "windows"] + filler(rng, 3), "Computers")
    for _ in range(2):
        add("d", ["baseball"] + filler(rng, 3), "Hobbies")
    for _ in range(6):
        add("d", ["god"] + filler(rng, 3), "Religion")
    for _ in range(4):
        add("d", ["christian"] + filler(rng, 3), "Religion")
    for _ in range(9):
        add("d", ["graphics"] + filler(rng, 3), None)
    for _ in range(7):
        add("d", ["windows"] + filler(rng, 3), None)
    while len(docs) < 500:
        add("d", filler(rng, 4), None)
    rng.shuffle(docs)
    docs = [(f"doc{i:03d}", t, l) for i, (_, t, l) in enumerate(docs)]

    out = ROOT / "example2"
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "database.jsonl", docs)
    (out / "rules.txt").write_text(
        "Computers IF mac # correct=90 incorrect=10\n"
        "Computers IF graphics windows # correct=45 incorrect=5\n"
        "Religion IF god christian # correct=30 incorrect=0\n"
        "Hobbies IF baseball # correct=40 incorrect=2\n"
        "#mode ordered\n"
        "#recall Computers 0.67\n"
        "#recall Religion 0.8\n"
        "#recall Hobbies 0.75\n",
        encoding="utf-8",
    )


def cora():
    """Probe totals 1450, 151, 95, 215, 45 over Computers, Science, Hobbies,
    Society, Misc. Computers has two overlapping rules so its second probe
    needs a NOT clause."""
    rng = random.Random(5)
    docs = []

    def add(tokens, label):
        docs.append((None, sorted(set(tokens)), label))

    for i in range(1000):
        add(["software"] + (["linux"] if i < 200 else []) + filler(rng, 3), "Computers")
    for _ in range(450):
        add(["linux"] + filler(rng, 3), "Computers")
    for _ in range(151):
        add(["physics"] + filler(rng, 3), "Science")
    for _ in range(95):
        add(["hiking"] + filler(rng, 3), "Hobbies")
    for _ in range(215):
        add(["politics"] + filler(rng, 3), "Society")
    for _ in range(45):
        add(["forsale"] + filler(rng, 3), "Misc")
    while len(docs) < 2400:
        add(filler(rng, 4), None)
    rng.shuffle(docs)
    docs = [(f"cora{i:04d}", t, l) for i, (_, t, l) in enumerate(docs)]

    out = ROOT / "cora"
    out.mkdir(parents=True, exist_ok=True)
    write_snapshot(out / "database.jsonl", docs)
    (out / "rules.txt").write_text(
        "Computers IF software # correct=95 incorrect=5\n"
        "Computers IF linux # correct=48 incorrect=2\n"
        "Science IF physics # correct=40 incorrect=4\n"
        "Hobbies IF hiking # correct=30 incorrect=3\n"
        "Society IF politics # correct=50 incorrect=10\n"
        "Misc IF forsale # correct=20 incorrect=5\n"
        "#mode ordered\n"
        "#recall Computers 0.7\n"
        "#recall Science 0.6\n"
        "#recall Hobbies 0.5\n"
        "#recall Society 0.65\n"
        "#recall Misc 0.4\n",
        encoding="utf-8",
    )


if __name__ == "__main__":
    example2()
    cora()
