"""Deterministic synthetic fixture corpus.

Every gold answer carries one discriminative fact token that also
appears in the dialogue; the four counterfactuals are the gold answer
with that fact swapped for distractors. This makes the corpus a clean
testbed for the contrastive objective: an input embedding should sit
closer to its gold answer than to any fact-swapped negative.
"""

from __future__ import annotations

import numpy as np

from .analysis import Judgment
from .backend import derive_seed
from .corpus import Difficulty, InferenceExample, QuestionType, Utterance

FACTS = (
    "rain", "picnic", "guitar", "doctor", "train", "coffee", "meeting",
    "garden", "movie", "exam", "kitten", "bicycle", "soup", "library",
    "beach", "wedding",
)

_OPENERS = (
    ("did you hear about the {fact} ?", "yes the {fact} is set for friday ."),
    ("any news on the {fact} ?", "sure , the {fact} happens this weekend ."),
)

_CLOSERS = (
    ("that sounds exciting .", "we should get ready soon ."),
    ("good to know .", "let us tell the others today ."),
)

_ANSWERS = {
    QuestionType.CAUSE: "the {fact} was announced earlier .",
    QuestionType.SUBSEQUENT_EVENT: "they will plan for the {fact} together .",
    QuestionType.SUBSEQUENT_EVENT_CLIPPED: "they will talk more about the {fact} .",
    QuestionType.PREREQUISITE: "someone told the speaker about the {fact} .",
    QuestionType.MOTIVATION: "the speaker wants to share news about the {fact} .",
    QuestionType.REACTION: "the listener feels curious about the {fact} .",
}

_QUESTION_CYCLE = tuple(QuestionType)
_DIFFICULTY_CYCLE = (Difficulty.SUFFICIENT, Difficulty.LIKELY, Difficulty.CONCEIVABLE)


def _make_example(prefix: str, i: int, rng: np.random.Generator) -> InferenceExample:
    fact = FACTS[int(rng.integers(len(FACTS)))]
    question = _QUESTION_CYCLE[i % len(_QUESTION_CYCLE)]
    difficulty = _DIFFICULTY_CYCLE[i % len(_DIFFICULTY_CYCLE)]
    opener = _OPENERS[i % len(_OPENERS)]
    closer = _CLOSERS[(i // 2) % len(_CLOSERS)]
    turns = [
        ("A", opener[0].format(fact=fact)),
        ("B", opener[1].format(fact=fact)),
        ("A", closer[0]),
        ("B", closer[1]),
    ]
    dialogue = tuple(
        Utterance(speaker=s, text=t, index=k) for k, (s, t) in enumerate(turns, start=1)
    )
    answer = _ANSWERS[question].format(fact=fact)
    others = [f for f in FACTS if f != fact]
    distractors = rng.choice(len(others), size=4, replace=False)
    counterfactuals = tuple(
        _ANSWERS[question].format(fact=others[int(j)]) for j in distractors
    )
    example = InferenceExample(
        id=f"{prefix}-{i:04d}",
        dialogue=dialogue,
        target_index=2,
        question=question,
        answer=answer,
        counterfactuals=counterfactuals,
        difficulty=difficulty,
    )
    example.validate()
    return example


def build_split(prefix: str, n: int, seed: int) -> list[InferenceExample]:
    rng = np.random.default_rng(derive_seed(seed, "synth", prefix))
    return [_make_example(prefix, i, rng) for i in range(n)]


def build_corpus(
    n_train: int = 200, n_valid: int = 50, n_test: int = 50, seed: int = 13
) -> tuple[list[InferenceExample], list[InferenceExample], list[InferenceExample]]:
    """The shipped fixture corpus: 200 train / 50 valid / 50 test."""
    return (
        build_split("train", n_train, seed),
        build_split("valid", n_valid, seed),
        build_split("test", n_test, seed),
    )


def build_judgments(
    item_ids: list[str], n_raters: int = 3, seed: int = 17
) -> list[Judgment]:
    """Simulated A/B plausibility judgments with correlated raters,
    mildly favoring option_1."""
    rng = np.random.default_rng(derive_seed(seed, "judgments"))
    choices = ("option_1", "option_2", "both", "neither")
    judgments = []
    for item_id in item_ids:
        pref = choices[int(rng.choice(4, p=[0.45, 0.2, 0.25, 0.1]))]
        for r in range(n_raters):
            if rng.random() < 0.7:
                choice = pref
            else:
                choice = choices[int(rng.integers(4))]
            judgments.append(
                Judgment(item_id=item_id, rater_id=f"rater_{r + 1}", choice=choice)
            )
    return judgments
