#!/usr/bin/env python3
"""Regenerate the shipped fixture corpus under data/.

The generator is fully seeded, so this script writes byte-identical
files every time; a test guards the committed copies against drift.
"""

import json
from pathlib import Path

from inferbench.corpus import save_dataset
from inferbench.synth import build_corpus, build_judgments

DATA = Path(__file__).parent.parent / "data"

train, valid, test = build_corpus()
save_dataset(train, DATA / "train.jsonl")
save_dataset(valid, DATA / "valid.jsonl")
save_dataset(test, DATA / "test.jsonl")

judgments = build_judgments([ex.id for ex in test])
with open(DATA / "judgments.jsonl", "w", encoding="utf-8") as fh:
    for j in judgments:
        fh.write(
            json.dumps({"item_id": j.item_id, "rater_id": j.rater_id, "choice": j.choice})
            + "\n"
        )

print(f"train={len(train)} valid={len(valid)} test={len(test)} judgments={len(judgments)}")
print(f"written under {DATA}")
