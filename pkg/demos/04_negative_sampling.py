#!/usr/bin/env python3
"""The four negative-sample routes on one example, with the provenance
each one records."""

import json

from inferbench.backend import ToyBackend
from inferbench.negatives import (
    ReplaceConfig,
    generate_nonoptimal,
    inbatch_negatives,
    pick_counterfactuals,
    token_replace,
)
from inferbench.synth import build_split
from inferbench.trainer import build_vocabulary

batch = build_split("demo", 4, seed=3)
ex = batch[0]
print(f"example {ex.id}")
print(f"gold: {ex.answer}\n")

ns = pick_counterfactuals(ex, m=2, seed=7)
print("counterfactual (dataset candidates):")
for neg, prov in zip(ns.negatives, ns.provenance):
    print(f"  {neg}   <- stored index {prov['source_index']}")

sampler = ToyBackend(build_vocabulary(batch), d=8, seed=5)
ns = generate_nonoptimal(sampler, ex, m=2, k=10, seed=7, max_len=10)
print("\nnon_optimal (top-k sampled from the model, gold collisions resampled):")
for neg, prov in zip(ns.negatives, ns.provenance):
    print(f"  {neg}   <- attempts={prov['attempts']}")

scorer = ToyBackend(build_vocabulary(batch), d=8, seed=5)
scorer.E *= 20.0
scorer.U *= 20.0  # wider logit range makes the 0.75 threshold meaningful
ns = token_replace(scorer, ex, ReplaceConfig(threshold=0.75, k=10, mode="zs", seed=7), m=2)
print("\nreplace_zs (context-sensitive tokens swapped):")
for neg, prov in zip(ns.negatives, ns.provenance):
    print(f"  {neg}   <- positions {prov['replaced_positions']} fallback={prov['fallback']}")

print("\nin_batch (gold answers of the other batch members):")
for neg in inbatch_negatives(batch, 0):
    print(f"  {neg}")

print("\nfull provenance of the last replace negative:")
print(json.dumps(ns.provenance[-1], indent=2))
