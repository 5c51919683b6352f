"""Porter stemmer (the classic 1980 algorithm, no later revisions).

Within each step the longest matching suffix is selected first; its
condition is then tested, and if the condition fails the step ends
without trying shorter suffixes. Words of length <= 2 are returned
unchanged.
"""

from functools import lru_cache

_VOWELS = "aeiou"


def _is_cons(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        # y is a consonant at the start or after a vowel, else a vowel
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in the [C](VC)^m[V] decomposition."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        cons = _is_cons(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(stem: str) -> bool:
    return (
        len(stem) >= 2
        and stem[-1] == stem[-2]
        and _is_cons(stem, len(stem) - 1)
    )


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    if not _is_cons(stem, len(stem) - 3):
        return False
    if _is_cons(stem, len(stem) - 2):
        return False
    if not _is_cons(stem, len(stem) - 1):
        return False
    return stem[-1] not in "wxy"


def _rule_list(word: str, rules) -> str:
    """Apply the longest-matching (suffix, replacement, condition) rule."""
    best = None
    for suffix, repl, cond in rules:
        if word.endswith(suffix) and (best is None or len(suffix) > len(best[0])):
            best = (suffix, repl, cond)
    if best is None:
        return word
    suffix, repl, cond = best
    stem = word[: len(word) - len(suffix)]
    if cond is None or cond(stem):
        return stem + repl
    return word


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            return word[:-1]
        return word
    removed = None
    if word.endswith("ed") and _contains_vowel(word[:-2]):
        removed = word[:-2]
    elif word.endswith("ing") and _contains_vowel(word[:-3]):
        removed = word[:-3]
    if removed is None:
        return word
    if removed.endswith(("at", "bl", "iz")):
        return removed + "e"
    if _ends_double_cons(removed) and removed[-1] not in "lsz":
        return removed[:-1]
    if _measure(removed) == 1 and _ends_cvc(removed):
        return removed + "e"
    return removed


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


_M_GT_0 = lambda stem: _measure(stem) > 0
_M_GT_1 = lambda stem: _measure(stem) > 1

_STEP2_RULES = [
    ("ational", "ate", _M_GT_0),
    ("tional", "tion", _M_GT_0),
    ("enci", "ence", _M_GT_0),
    ("anci", "ance", _M_GT_0),
    ("izer", "ize", _M_GT_0),
    ("abli", "able", _M_GT_0),
    ("alli", "al", _M_GT_0),
    ("entli", "ent", _M_GT_0),
    ("eli", "e", _M_GT_0),
    ("ousli", "ous", _M_GT_0),
    ("ization", "ize", _M_GT_0),
    ("ation", "ate", _M_GT_0),
    ("ator", "ate", _M_GT_0),
    ("alism", "al", _M_GT_0),
    ("iveness", "ive", _M_GT_0),
    ("fulness", "ful", _M_GT_0),
    ("ousness", "ous", _M_GT_0),
    ("aliti", "al", _M_GT_0),
    ("iviti", "ive", _M_GT_0),
    ("biliti", "ble", _M_GT_0),
]

_STEP3_RULES = [
    ("icate", "ic", _M_GT_0),
    ("ative", "", _M_GT_0),
    ("alize", "al", _M_GT_0),
    ("iciti", "ic", _M_GT_0),
    ("ical", "ic", _M_GT_0),
    ("ful", "", _M_GT_0),
    ("ness", "", _M_GT_0),
]

_STEP4_RULES = [
    ("al", "", _M_GT_1),
    ("ance", "", _M_GT_1),
    ("ence", "", _M_GT_1),
    ("er", "", _M_GT_1),
    ("ic", "", _M_GT_1),
    ("able", "", _M_GT_1),
    ("ible", "", _M_GT_1),
    ("ant", "", _M_GT_1),
    ("ement", "", _M_GT_1),
    ("ment", "", _M_GT_1),
    ("ent", "", _M_GT_1),
    ("ion", "", lambda stem: _M_GT_1(stem) and stem.endswith(("s", "t"))),
    ("ou", "", _M_GT_1),
    ("ism", "", _M_GT_1),
    ("ate", "", _M_GT_1),
    ("iti", "", _M_GT_1),
    ("ous", "", _M_GT_1),
    ("ive", "", _M_GT_1),
    ("ize", "", _M_GT_1),
]


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1:
            return stem
        if m == 1 and not _ends_cvc(stem):
            return stem
    return word


def _step5b(word: str) -> str:
    if _measure(word) > 1 and _ends_double_cons(word) and word.endswith("l"):
        return word[:-1]
    return word


@lru_cache(maxsize=65536)
def stem(token: str) -> str:
    """Porter stem of a lowercase token; tokens of length <= 2 pass through."""
    if len(token) <= 2:
        return token
    word = _step1a(token)
    word = _step1b(word)
    word = _step1c(word)
    word = _rule_list(word, _STEP2_RULES)
    word = _rule_list(word, _STEP3_RULES)
    word = _rule_list(word, _STEP4_RULES)
    word = _step5a(word)
    word = _step5b(word)
    return word
