"""Text normalization shared by scoring and alignment.

References and hypotheses go through the same routine before any comparison:
special Unicode symbols are dropped, text is case folded, English digit runs
are spelled out and punctuation is removed (apostrophes inside words survive).
Diacritics are kept on purpose.
"""

from __future__ import annotations

import re
import string
import unicodedata
from dataclasses import dataclass

SUPPORTED_LANGUAGES = frozenset({"en", "fr", "es", "it", "ru", "de"})
APOSTROPHES = frozenset({"'", "’"})

# ASCII symbols such as "+" or "$" are category S and count as special characters
_ASCII_PUNCT = frozenset(c for c in string.punctuation if unicodedata.category(c)[0] == "P")
_PUNCT = _ASCII_PUNCT | APOSTROPHES

_ONES = (
    "zero one two three four five six seven eight nine ten eleven twelve "
    "thirteen fourteen fifteen sixteen seventeen eighteen nineteen"
).split()
_TENS = "_ _ twenty thirty forty fifty sixty seventy eighty ninety".split()

# A plain digit run, or a comma-grouped number such as 12,345.
_NUMBER_RE = re.compile(r"(?<![0-9])[0-9]{1,3}(?:,[0-9]{3})+(?![0-9])|[0-9]+")
_MAX_SPELLED = 999_999


@dataclass(frozen=True)
class NormalizationRules:
    language: str = "en"
    strip_punctuation: bool = True
    number_conversion: bool = True

    def __post_init__(self):
        if self.language not in SUPPORTED_LANGUAGES and self.language != "other":
            raise ValueError(
                f"unsupported language {self.language!r}; use one of "
                f"{sorted(SUPPORTED_LANGUAGES)} or 'other'"
            )

    @classmethod
    def for_language(cls, language: str | None, **kwargs) -> "NormalizationRules":
        """Rules for an arbitrary ISO code; unknown codes map to ``"other"``."""
        code = (language or "").lower()
        if code not in SUPPORTED_LANGUAGES:
            code = "other"
        return cls(language=code, **kwargs)


def _keep_char(ch: str) -> bool:
    if ch.isspace() or ch in _PUNCT:
        return True
    cat = unicodedata.category(ch)
    return cat[0] == "L" or cat == "Nd"


def strip_special_unicode(text: str) -> str:
    """Drop emojis, symbols, control and format characters.

    Letters, decimal digits, ASCII punctuation, apostrophes and whitespace are
    kept, as are combining marks that sit on a letter. Whitespace runs are
    collapsed and the result is trimmed.
    """
    out = []
    on_letter = False
    for ch in text:
        cat = unicodedata.category(ch)
        if cat[0] == "M":
            if on_letter:
                out.append(ch)
            continue
        if _keep_char(ch):
            out.append(ch)
            on_letter = cat[0] == "L"
        else:
            on_letter = False
    return " ".join("".join(out).split())


def _fold_case(text: str) -> str:
    # fold the decomposed form and recompose, so precomposed and decomposed
    # spellings of a letter end up identical; lower() undoes casefold's
    # mapping of Cherokee to capitals
    folded = unicodedata.normalize("NFD", text).casefold().lower()
    return unicodedata.normalize("NFC", folded)


def _spell_english(n: int) -> str:
    if n < 20:
        return _ONES[n]
    if n < 100:
        tens, ones = divmod(n, 10)
        return _TENS[tens] if ones == 0 else f"{_TENS[tens]} {_ONES[ones]}"
    if n < 1000:
        hundreds, rest = divmod(n, 100)
        head = f"{_ONES[hundreds]} hundred"
        return head if rest == 0 else f"{head} {_spell_english(rest)}"
    thousands, rest = divmod(n, 1000)
    head = f"{_spell_english(thousands)} thousand"
    return head if rest == 0 else f"{head} {_spell_english(rest)}"


def number_to_words(token: str, language: str) -> str:
    """Spell out a digit run (0 to 999,999).

    Only English is converted; every other language gets the token back
    unchanged.

    >>> number_to_words("21", "en")
    'twenty one'
    >>> number_to_words("7", "fr")
    '7'
    """
    if not token or not all("0" <= c <= "9" for c in token):
        raise ValueError(f"number_to_words expects a run of ASCII digits, got {token!r}")
    value = int(token)
    if value > _MAX_SPELLED:
        raise ValueError(f"{token} is outside the supported range 0..{_MAX_SPELLED}")
    if language != "en":
        return token
    return _spell_english(value)


def _convert_numbers(text: str, language: str) -> str:
    if language != "en":
        return text

    def repl(m: re.Match) -> str:
        digits = m.group(0).replace(",", "")
        if int(digits) <= _MAX_SPELLED:
            words = number_to_words(digits, language)
        else:
            # too large to read as a cardinal: read digit by digit
            words = " ".join(_ONES[int(d)] for d in digits)
        before = text[m.start() - 1] if m.start() > 0 else " "
        after = text[m.end()] if m.end() < len(text) else " "
        if before.isalnum():
            words = " " + words
        if after.isalnum():
            words = words + " "
        return words

    return _NUMBER_RE.sub(repl, text)


def _strip_punctuation(text: str) -> str:
    out = []
    last = len(text) - 1
    for i, ch in enumerate(text):
        if ch not in _PUNCT:
            out.append(ch)
        elif (
            ch in APOSTROPHES
            and 0 < i < last
            and text[i - 1].isalnum()
            and text[i + 1].isalnum()
        ):
            out.append(ch)
        else:
            out.append(" ")
    return "".join(out)


def normalize_text(text: str, rules: NormalizationRules | None = None) -> str:
    """Normalize *text* for scoring or alignment.

    Steps run in a fixed order: special-character removal, case folding,
    number spelling, punctuation removal, whitespace collapse. Number spelling
    has to see the digit runs before punctuation removal splits or merges them.

    >>> normalize_text("Hello, WORLD! 2 \U0001F600")
    'hello world two'
    """
    rules = rules or NormalizationRules()
    text = strip_special_unicode(text)
    text = _fold_case(text)
    if rules.number_conversion:
        text = _convert_numbers(text, rules.language)
    if rules.strip_punctuation:
        text = _strip_punctuation(text)
    return " ".join(text.split())
