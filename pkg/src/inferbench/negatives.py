"""Automatic negative-sample procedures with per-negative provenance.

Four strategies feed the per-sample contrastive loss:

* ``counterfactual`` -- dataset-provided wrong-but-plausible candidates;
* ``non_optimal``    -- top-k sampled generations from a model, with
  gold collisions resampled;
* ``replace_zs`` / ``replace_mcq`` -- gold answers with the most
  context-sensitive tokens swapped using a masked scorer (zero-shot or
  fine-tuned to separate gold from counterfactuals);
* in-batch gold answers of the other examples.

Every draw is seeded per (seed, example id, slot), so any emitted
negative can be replayed from its provenance alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import SPECIALS, TopKDecode, ToyBackend, Vocabulary, derive_seed
from .corpus import InferenceExample, normalize_answer, prepare_input_text
from .metrics import tokenize
from .objective import cl_sample_loss, _embed_backward

STRATEGIES = ("counterfactual", "non_optimal", "replace_zs", "replace_mcq", "in_batch")


@dataclass(frozen=True)
class ReplaceConfig:
    threshold: float = 0.75
    k: int = 10
    mode: str = "zs"  # "zs" | "mcq"; records which scorer produced the set
    seed: int = 0

    def __post_init__(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.mode not in ("zs", "mcq"):
            raise ValueError(f"unknown replace mode {self.mode!r}")


@dataclass
class NegativeSet:
    example_id: str
    strategy: str
    negatives: list[str]
    provenance: list[dict]

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "strategy": self.strategy,
            "negatives": self.negatives,
            "provenance": self.provenance,
        }


def pick_counterfactuals(example: InferenceExample, m: int, seed: int = 0) -> NegativeSet:
    """m dataset counterfactuals; the full set keeps stored order, a
    strict subset is a seeded uniform draw without replacement."""
    if not 1 <= m <= 4:
        raise ValueError("m must be in 1..4")
    if len(example.counterfactuals) < m:
        raise ValueError(
            f"example {example.id}: {m} counterfactuals requested, "
            f"{len(example.counterfactuals)} available"
        )
    if m == len(example.counterfactuals):
        chosen = list(range(m))
    else:
        rng = np.random.default_rng(derive_seed(seed, example.id, "counterfactual"))
        chosen = sorted(rng.choice(len(example.counterfactuals), size=m, replace=False))
    return NegativeSet(
        example_id=example.id,
        strategy="counterfactual",
        negatives=[example.counterfactuals[i] for i in chosen],
        provenance=[{"slot": s, "source_index": int(i), "seed": seed} for s, i in enumerate(chosen)],
    )


def generate_nonoptimal(
    backend: ToyBackend,
    example: InferenceExample,
    m: int = 4,
    k: int = 10,
    attempts: int = 5,
    seed: int = 0,
    max_len: int = 16,
    template_id: str = "default",
) -> NegativeSet:
    """Sample m negatives by top-k generation from the current model.

    A sample that normalizes to the gold answer (or to nothing) is
    rejected and redrawn up to ``attempts`` times; a slot whose draws
    all collide is dropped and recorded in provenance.
    """
    gold = normalize_answer(example.answer)
    input_tokens = tokenize(prepare_input_text(example, template_id))
    negatives: list[str] = []
    provenance: list[dict] = []
    for slot in range(m):
        accepted = None
        used_attempts = 0
        for attempt in range(attempts):
            used_attempts = attempt + 1
            slot_seed = derive_seed(seed, example.id, "non_optimal", slot, attempt)
            sample_tokens = backend.generate(
                input_tokens, TopKDecode(k=k, seed=slot_seed, max_len=max_len)
            )
            text = " ".join(sample_tokens)
            if text and normalize_answer(text) != gold:
                accepted = (text, slot_seed)
                break
        if accepted is None:
            provenance.append({"slot": slot, "dropped": True, "attempts": used_attempts})
        else:
            negatives.append(accepted[0])
            provenance.append(
                {
                    "slot": slot,
                    "dropped": False,
                    "attempts": used_attempts,
                    "sample_seed": accepted[1],
                    "k": k,
                }
            )
    return NegativeSet(
        example_id=example.id,
        strategy="non_optimal",
        negatives=negatives,
        provenance=provenance,
    )


def replacement_deltas(
    scorer: ToyBackend, example: InferenceExample, template_id: str = "default"
) -> np.ndarray:
    """|log p(a_j | context + answer\\j) - log p(a_j | answer\\j)| per
    gold-answer position, from the masked scorer."""
    answer_ids = scorer.vocab.encode(tokenize(example.answer))
    if not answer_ids:
        raise ValueError(f"example {example.id}: empty answer")
    context_ids = scorer.vocab.encode(tokenize(prepare_input_text(example, template_id)))
    deltas = np.empty(len(answer_ids))
    for j, gold_id in enumerate(answer_ids):
        with_ctx = scorer.masked_logits_ids(answer_ids, j, context_ids)[gold_id]
        answer_only = scorer.masked_logits_ids(answer_ids, j, None)[gold_id]
        deltas[j] = abs(with_ctx - answer_only)
    return deltas


def select_positions(deltas: np.ndarray, threshold: float) -> tuple[list[int], bool]:
    """Positions with delta above threshold; falls back to the argmax
    (lowest index on ties) when nothing clears it."""
    selected = [int(j) for j in np.flatnonzero(deltas > threshold)]
    if selected:
        return selected, False
    return [int(np.argmax(deltas))], True


def token_replace(
    scorer: ToyBackend,
    example: InferenceExample,
    cfg: ReplaceConfig,
    m: int = 1,
    template_id: str = "default",
) -> NegativeSet:
    """Swap the most context-sensitive gold tokens using the scorer's
    masked distributions.

    Replacements are seeded-uniform draws from the top-k tokens of the
    answer-only masked distribution at each selected position, excluding
    the gold token and the special tokens; when gold fills the whole
    top-k, the (k+1)-th ranked token steps in. Output token count always
    equals the gold token count.
    """
    if "masked_logits" not in getattr(scorer, "capabilities", ()):
        raise ValueError("scorer does not support masked_logits")
    answer_tokens = tokenize(example.answer)
    if not answer_tokens:
        raise ValueError(f"example {example.id}: empty answer")
    answer_ids = scorer.vocab.encode(answer_tokens)
    deltas = replacement_deltas(scorer, example, template_id)
    positions, fallback = select_positions(deltas, cfg.threshold)

    special_ids = {scorer.vocab.id_of(t) for t in SPECIALS}
    candidates_at: dict[int, list[int]] = {}
    for j in positions:
        dist = scorer.masked_logits_ids(answer_ids, j, None)
        order = np.lexsort((np.arange(len(dist)), -dist))
        ranked = [int(t) for t in order if int(t) not in special_ids]
        top = [t for t in ranked[: cfg.k] if t != answer_ids[j]]
        if not top:
            top = [t for t in ranked[cfg.k : cfg.k + 1] if t != answer_ids[j]]
        if not top:
            raise ValueError(f"example {example.id}: no replacement candidates at {j}")
        candidates_at[j] = top

    strategy = f"replace_{cfg.mode}"
    negatives: list[str] = []
    provenance: list[dict] = []
    for slot in range(m):
        slot_seed = derive_seed(cfg.seed, example.id, strategy, slot)
        rng = np.random.default_rng(slot_seed)
        out_tokens = list(answer_tokens)
        for j in positions:
            out_tokens[j] = scorer.vocab.tokens[int(rng.choice(candidates_at[j]))]
        negatives.append(" ".join(out_tokens))
        provenance.append(
            {
                "slot": slot,
                "seed": slot_seed,
                "replaced_positions": positions,
                "fallback": fallback,
                "mode": cfg.mode,
                "threshold": cfg.threshold,
                "k": cfg.k,
            }
        )
    return NegativeSet(
        example_id=example.id,
        strategy=strategy,
        negatives=negatives,
        provenance=provenance,
    )


def inbatch_negatives(batch: list[InferenceExample], i: int) -> list[str]:
    """Gold answers of the other batch members, batch order preserved.
    Duplicate golds are kept."""
    if len(batch) < 2:
        raise ValueError("in-batch negatives need batch size >= 2")
    if not 0 <= i < len(batch):
        raise IndexError(f"index {i} outside batch of {len(batch)}")
    return [ex.answer for j, ex in enumerate(batch) if j != i]


def train_mcq_scorer(
    examples: list[InferenceExample],
    vocab: Vocabulary | None = None,
    d: int = 16,
    seed: int = 0,
    epochs: int = 5,
    lr: float = 1.0,
    tau: float = 0.5,
    template_id: str = "default",
) -> ToyBackend:
    """Stand-in for a scorer fine-tuned on the multiple-choice task:
    contrastive updates pull input embeddings toward gold answers and
    away from the dataset counterfactuals."""
    usable = [ex for ex in examples if ex.counterfactuals]
    if not usable:
        raise ValueError("no examples with counterfactuals to train on")
    if vocab is None:
        texts = []
        for ex in usable:
            texts.append(prepare_input_text(ex, template_id))
            texts.append(ex.answer)
            texts.extend(ex.counterfactuals)
        vocab = Vocabulary.from_texts(texts)
    scorer = ToyBackend(vocab, d=d, seed=derive_seed(seed, "mcq_scorer"))
    for _ in range(epochs):
        grad_E = np.zeros_like(scorer.E)
        for ex in usable:
            x_ids = vocab.encode(tokenize(prepare_input_text(ex, template_id)))
            pos_ids = vocab.encode(tokenize(ex.answer))
            neg_id_lists = [vocab.encode(tokenize(c)) for c in ex.counterfactuals]
            h_x = scorer.embed_ids(x_ids)
            h_pos = scorer.embed_ids(pos_ids)
            h_negs = [scorer.embed_ids(ids) for ids in neg_id_lists]
            _, g = cl_sample_loss(h_x, h_pos, h_negs, tau)
            scale = 1.0 / len(usable)
            _embed_backward(scorer, x_ids, g["h_x"], grad_E, scale)
            _embed_backward(scorer, pos_ids, g["h_pos"], grad_E, scale)
            for ids, gn in zip(neg_id_lists, g["h_negs"]):
                _embed_backward(scorer, ids, gn, grad_E, scale)
        scorer.E -= lr * grad_E
    return scorer
