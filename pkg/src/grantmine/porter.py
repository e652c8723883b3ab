"""Porter suffix-stripping stemmer for lowercase English tokens.

Implements the classic five-step algorithm as realized in the reference
distribution: words of one or two letters are left unchanged, and step 2
uses the "bli" -> "ble" and "logi" -> "log" rules.
"""

from __future__ import annotations

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return True if i == 0 else not _is_consonant(word, i - 1)
    return True


def _measure(part: str) -> int:
    """Count VC sequences: [C](VC){m}[V] gives m."""
    m = 0
    prev_vowel = False
    for i in range(len(part)):
        cons = _is_consonant(part, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _has_vowel(part: str) -> bool:
    return any(not _is_consonant(part, i) for i in range(len(part)))


def _ends_double_consonant(word: str) -> bool:
    return (len(word) >= 2 and word[-1] == word[-2]
            and _is_consonant(word, len(word) - 1))


def _ends_cvc(word: str) -> bool:
    n = len(word)
    if n < 3:
        return False
    if (not _is_consonant(word, n - 3) or _is_consonant(word, n - 2)
            or not _is_consonant(word, n - 1)):
        return False
    return word[-1] not in "wxy"


def _apply_rule_list(word: str, rules) -> str:
    """Apply the first rule whose suffix matches; its m-condition decides.

    A matching suffix consumes the step even when the condition fails.
    """
    for suffix, replacement, min_measure in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if _measure(stem) > min_measure:
                return stem + replacement
            return word
    return word


def _step_1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step_1b(word: str) -> str:
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            return word[:-1]
        return word
    stripped = False
    if word.endswith("ed") and _has_vowel(word[:-2]):
        word = word[:-2]
        stripped = True
    elif word.endswith("ing") and _has_vowel(word[:-3]):
        word = word[:-3]
        stripped = True
    if not stripped:
        return word
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if _ends_double_consonant(word) and word[-1] not in "lsz":
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word


def _step_1c(word: str) -> str:
    if word.endswith("y") and _has_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


# (suffix, replacement, minimum measure of the stem); order within each
# shared-ending family follows the reference implementation.
_STEP2_RULES = (
    ("ational", "ate", 0), ("tional", "tion", 0),
    ("enci", "ence", 0), ("anci", "ance", 0),
    ("izer", "ize", 0),
    ("bli", "ble", 0),
    ("alli", "al", 0), ("entli", "ent", 0), ("eli", "e", 0),
    ("ousli", "ous", 0),
    ("ization", "ize", 0), ("ation", "ate", 0), ("ator", "ate", 0),
    ("alism", "al", 0), ("iveness", "ive", 0), ("fulness", "ful", 0),
    ("ousness", "ous", 0),
    ("aliti", "al", 0), ("iviti", "ive", 0), ("biliti", "ble", 0),
    ("logi", "log", 0),
)

_STEP3_RULES = (
    ("icate", "ic", 0), ("ative", "", 0), ("alize", "al", 0),
    ("iciti", "ic", 0), ("ical", "ic", 0),
    ("ful", "", 0), ("ness", "", 0),
)

_STEP4_RULES = (
    ("al", "", 1), ("ance", "", 1), ("ence", "", 1), ("er", "", 1),
    ("ic", "", 1), ("able", "", 1), ("ible", "", 1),
    ("ant", "", 1), ("ement", "", 1), ("ment", "", 1), ("ent", "", 1),
    ("ou", "", 1), ("ism", "", 1), ("ate", "", 1), ("iti", "", 1),
    ("ous", "", 1), ("ive", "", 1), ("ize", "", 1),
)


def _step_4(word: str) -> str:
    # "ion" only drops after s or t; it still consumes the step on match.
    if word.endswith("ion"):
        stem = word[:-3]
        if stem and stem[-1] in "st" and _measure(stem) > 1:
            return stem
        return word
    for suffix, replacement, min_measure in _STEP4_RULES:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if _measure(stem) > min_measure:
                return stem + replacement
            return word
    return word


def _step_5a(word: str) -> str:
    if word.endswith("e"):
        m = _measure(word[:-1])
        if m > 1 or (m == 1 and not _ends_cvc(word[:-1])):
            return word[:-1]
    return word


def _step_5b(word: str) -> str:
    if word.endswith("l") and _ends_double_consonant(word) and _measure(word) > 1:
        return word[:-1]
    return word


def stem(token: str) -> str:
    """Stem one token; non-lowercase-ASCII-alphabetic tokens pass through."""
    if len(token) <= 2:
        return token
    if not (token.isascii() and token.isalpha() and token.islower()):
        return token
    word = _step_1a(token)
    word = _step_1b(word)
    word = _step_1c(word)
    word = _apply_rule_list(word, _STEP2_RULES)
    word = _apply_rule_list(word, _STEP3_RULES)
    word = _step_4(word)
    word = _step_5a(word)
    word = _step_5b(word)
    return word
