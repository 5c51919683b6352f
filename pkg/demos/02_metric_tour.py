#!/usr/bin/env python3
"""Metric engine tour: the tokenizer, each scorer on a worked pair, and
a stratified corpus report."""

from inferbench.metrics import bleu, cider, meteor_lite, rouge_l, score_corpus, tokenize
from inferbench.porter import stem

hyp = tokenize("The cat sat on the mat.")
ref = tokenize("The cat is on the mat.")
print(f"hyp tokens: {hyp}")
print(f"stems:      {[stem(t) for t in hyp]}")

print("\nbleu:", {n: round(v, 5) for n, v in bleu([hyp], [ref]).items()})
print("rouge_l:", round(rouge_l(hyp, ref), 5))
print("meteor_lite:", round(meteor_lite(hyp, ref), 5))

pairs = [
    ("the cat sat on the mat .", "the cat is on the mat ."),
    ("a dog barked loudly at night .", "the dog barked at the moon ."),
    ("she plays the guitar well .", "she is playing guitar nicely ."),
    ("rain fell all day long .", "heavy rain fell through the day ."),
]
corpus_cider, per_pair = cider(
    [tokenize(h) for h, _ in pairs], [tokenize(r) for _, r in pairs]
)
print("\ncider per pair:", [round(v, 3) for v in per_pair])
print("cider corpus:", round(corpus_cider, 3))

# a stratified report recomputes every metric inside each stratum
ids = [f"p{i}" for i in range(4)]
labels = {"p0": "easy", "p1": "easy", "p2": "hard", "p3": "hard"}
report = score_corpus(pairs, ids=ids, strata_labels=labels)
print("\ncorpus bleu_2:", round(report.bleu[2], 5))
for label, sub in report.strata.items():
    print(f"  {label}: n={sub.n_examples} bleu_2={sub.bleu[2]:.5f} rouge_l={sub.rouge_l:.5f}")
