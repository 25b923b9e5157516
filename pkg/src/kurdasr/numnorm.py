"""Numeric token detection and Kurmanji verbalization.

Numbers written with digits are an open set; spelling them out as the words a
speaker would say ("85%" -> "heştê û pênc ji sed") turns them into a closed
vocabulary, which keeps transcripts consistent and avoids out-of-vocabulary
tokens downstream. Recognized shapes are integers (with thousand separators),
decimals, percentages, and currency amounts, each optionally negative.

Wordforms live in an external lexicon file (see ``data/lexicon_kmr.txt``),
keyed by numeric role, so deployments can swap or extend them without code
changes.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Literal

from . import textnorm
from .errors import KurdasrError

_SCALES = (10**9, 10**6, 10**3)
MAX_VALUE = 10**12


class LexiconError(KurdasrError):
    """The lexicon file is malformed or incomplete."""


class UnknownCurrencyError(KurdasrError):
    """A currency symbol has no wordform in the lexicon."""


class NumberRangeError(KurdasrError):
    """The value exceeds the largest verbalizable scale."""


@dataclass(frozen=True)
class NumberToken:
    """A recognized numeric surface form awaiting verbalization."""

    kind: Literal["integer", "decimal", "percent", "currency"]
    integer_digits: str
    fraction_digits: str = ""
    negative: bool = False
    currency_symbol: str | None = None
    source_span: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        if not self.integer_digits or not self.integer_digits.isascii() or not self.integer_digits.isdigit():
            raise ValueError(f"integer_digits must be a non-empty digit string: {self.integer_digits!r}")
        if self.fraction_digits and not (self.fraction_digits.isascii() and self.fraction_digits.isdigit()):
            raise ValueError(f"fraction_digits must be a digit string: {self.fraction_digits!r}")
        if self.kind == "decimal" and not self.fraction_digits:
            raise ValueError("decimal tokens require fraction digits")
        if self.kind == "currency" and self.currency_symbol is None:
            raise ValueError("currency tokens require a symbol")


@dataclass(frozen=True)
class NumeralLexicon:
    """Wordforms for every numeric role used by the verbalizer."""

    units: dict[int, str]       # 1..9
    teens: dict[int, str]       # 10..19
    tens: dict[int, str]        # tens digit 2..9
    scales: dict[int, str]      # 100, 1000, 10**6, 10**9
    conjunction: str
    decimal_point: str
    percent: str
    negative: str
    zero: str
    currencies: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        """Check all role slots are filled with canonical, digit-free wordforms."""
        slots: list[tuple[str, str]] = []
        for i in range(1, 10):
            slots.append((f"units.{i}", self.units.get(i, "")))
        for i in range(10, 20):
            slots.append((f"teens.{i}", self.teens.get(i, "")))
        for i in range(2, 10):
            slots.append((f"tens.{i}", self.tens.get(i, "")))
        for s in (100, 1000, 10**6, 10**9):
            slots.append((f"scales.{s}", self.scales.get(s, "")))
        slots += [
            ("conjunction", self.conjunction),
            ("decimal_point", self.decimal_point),
            ("percent", self.percent),
            ("negative", self.negative),
            ("zero", self.zero),
        ]
        slots += [(f"currency.{sym}", word) for sym, word in self.currencies.items()]
        for name, word in slots:
            if not word:
                raise LexiconError(f"lexicon slot {name} is missing or empty")
            if any("0" <= ch <= "9" for ch in word):
                raise LexiconError(f"lexicon slot {name} contains a digit: {word!r}")
            if textnorm.normalize_chars(word).text != word:
                raise LexiconError(
                    f"lexicon slot {name} is not in canonical form: {word!r}"
                )


def parse_lexicon(text: str, origin: str = "<string>") -> NumeralLexicon:
    """Parse the ``role = wordform`` / ``role.index = wordform`` format."""
    units: dict[int, str] = {}
    teens: dict[int, str] = {}
    tens: dict[int, str] = {}
    scales: dict[int, str] = {}
    currencies: dict[str, str] = {}
    singles: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LexiconError(f"{origin}:{lineno}: expected 'key = wordform'")
        key, _, word = line.partition("=")
        key, word = key.strip(), word.strip()
        if not key or not word:
            raise LexiconError(f"{origin}:{lineno}: empty key or wordform")
        role, _, index = key.partition(".")
        try:
            if role == "units":
                units[int(index)] = word
            elif role == "teens":
                teens[int(index)] = word
            elif role == "tens":
                tens[int(index)] = word
            elif role == "scales":
                scales[int(index)] = word
            elif role == "currency":
                if not index:
                    raise LexiconError(f"{origin}:{lineno}: currency entries need a symbol")
                currencies[index] = word
            elif role in ("conjunction", "decimal_point", "percent", "negative", "zero") and not index:
                singles[role] = word
            else:
                raise LexiconError(f"{origin}:{lineno}: unknown role {key!r}")
        except ValueError as exc:
            raise LexiconError(f"{origin}:{lineno}: bad index in {key!r}") from exc
    missing = [r for r in ("conjunction", "decimal_point", "percent", "negative", "zero") if r not in singles]
    if missing:
        raise LexiconError(f"{origin}: missing roles: {', '.join(missing)}")
    lexicon = NumeralLexicon(
        units=units, teens=teens, tens=tens, scales=scales,
        conjunction=singles["conjunction"], decimal_point=singles["decimal_point"],
        percent=singles["percent"], negative=singles["negative"], zero=singles["zero"],
        currencies=currencies,
    )
    lexicon.validate()
    return lexicon


def load_lexicon(path) -> NumeralLexicon:
    return parse_lexicon(textnorm.read_utf8(path), origin=str(path))


@lru_cache(maxsize=1)
def default_lexicon() -> NumeralLexicon:
    data = resources.files("kurdasr.data").joinpath("lexicon_kmr.txt").read_text("utf-8")
    return parse_lexicon(data, origin="lexicon_kmr.txt")


def _is_ascii_digit(ch: str) -> bool:
    return "0" <= ch <= "9"


def _is_currency_symbol(ch: str) -> bool:
    return unicodedata.category(ch) == "Sc"


def _is_word_char(ch: str) -> bool:
    return ch.isalpha() or _is_ascii_digit(ch)


def scan_numbers(text: str) -> list[NumberToken]:
    """Find maximal, non-overlapping numeric tokens in character-normalized text.

    Recognized at a token: optional leading '-', optional currency symbol
    (any Unicode Sc codepoint), digits with ',' thousand separators (groups
    after the first must be exactly 3 digits), an optional '.' fraction, and a
    trailing '%'. A digit run directly attached to a letter (ordinal suffixes,
    identifiers) is left verbatim, as is any run whose integer value is out of
    verbalization range. Only ASCII digits participate.
    """
    tokens: list[NumberToken] = []
    n = len(text)
    pos = 0
    while pos < n:
        j = pos
        while j < n and not _is_ascii_digit(text[j]):
            j += 1
        if j >= n:
            break

        # Optional prefix, scanned backwards from the first digit: currency
        # symbol, then minus. Prefix chars must not be claimed by a previous
        # token and the char before the token must not be alphanumeric.
        start = j
        symbol = None
        if start - 1 >= pos and _is_currency_symbol(text[start - 1]):
            symbol = text[start - 1]
            start -= 1
        negative = False
        if start - 1 >= pos and text[start - 1] == "-":
            negative = True
            start -= 1
        while start < j and start > 0 and _is_word_char(text[start - 1]):
            # Boundary violated: retry with a shorter prefix.
            if negative:
                negative = False
            else:
                symbol = None
            start += 1

        if start == j and j > 0 and _is_word_char(text[j - 1]):
            # Digit run glued to a word: skip it verbatim.
            while j < n and _is_ascii_digit(text[j]):
                j += 1
            pos = j
            continue

        # Integer part with optional ,ddd separator groups.
        k = j
        while k < n and _is_ascii_digit(text[k]):
            k += 1
        digits = [text[j:k]]
        while k < n and text[k] == ",":
            group = text[k + 1 : k + 4]
            if (
                len(group) == 3
                and all(_is_ascii_digit(c) for c in group)
                and (k + 4 >= n or not _is_ascii_digit(text[k + 4]))
            ):
                digits.append(group)
                k += 4
            else:
                break
        integer_digits = "".join(digits)

        fraction_digits = ""
        if k + 1 < n and text[k] == "." and _is_ascii_digit(text[k + 1]):
            k += 1
            fstart = k
            while k < n and _is_ascii_digit(text[k]):
                k += 1
            fraction_digits = text[fstart:k]

        percent = False
        if symbol is None and k < n and text[k] == "%":
            percent = True
            k += 1

        end = k
        trailing = text[end] if end < n else ""
        if (not percent and trailing and trailing.isalpha()) or int(integer_digits) >= MAX_VALUE:
            # Suffix-attached or out-of-range cluster: leave verbatim.
            pos = end
            continue

        if symbol is not None:
            kind = "currency"
        elif percent:
            kind = "percent"
        elif fraction_digits:
            kind = "decimal"
        else:
            kind = "integer"
        tokens.append(
            NumberToken(
                kind=kind,
                integer_digits=integer_digits,
                fraction_digits=fraction_digits,
                negative=negative,
                currency_symbol=symbol,
                source_span=(start, end),
            )
        )
        pos = end
    return tokens


def _two_digits(value: int, lexicon: NumeralLexicon) -> str:
    if value < 10:
        return lexicon.units[value]
    if value < 20:
        return lexicon.teens[value]
    tens_word = lexicon.tens[value // 10]
    if value % 10:
        return f"{tens_word} {lexicon.conjunction} {lexicon.units[value % 10]}"
    return tens_word


def _under_thousand(value: int, lexicon: NumeralLexicon) -> str:
    hundreds, rest = divmod(value, 100)
    parts = []
    if hundreds == 1:
        parts.append(lexicon.scales[100])
    elif hundreds:
        parts.append(f"{lexicon.units[hundreds]} {lexicon.scales[100]}")
    if rest:
        parts.append(_two_digits(rest, lexicon))
    return f" {lexicon.conjunction} ".join(parts)


def verbalize_integer(digits: str, lexicon: NumeralLexicon | None = None) -> str:
    """Spell out a digit string as Kurmanji words.

    Scale groups are joined by the conjunction; a multiplier of 1 is omitted
    before 'sed' and 'hezar' ("hezar", not "yek hezar") but spoken for the
    larger scales. Raises :class:`NumberRangeError` at 10**12 and beyond.
    """
    lexicon = lexicon or default_lexicon()
    value = int(digits)
    if value >= MAX_VALUE:
        raise NumberRangeError(f"{digits} is out of range (< 10^12 required)")
    if value == 0:
        return lexicon.zero
    parts = []
    for scale in _SCALES:
        count, value = divmod(value, scale)
        if not count:
            continue
        word = lexicon.scales[scale]
        if count == 1 and scale == 1000:
            parts.append(word)
        else:
            parts.append(f"{_under_thousand(count, lexicon)} {word}")
    if value:
        parts.append(_under_thousand(value, lexicon))
    return f" {lexicon.conjunction} ".join(parts)


def _verbalize_fraction(digits: str, lexicon: NumeralLexicon, digit_by_digit_on_leading_zero: bool) -> str:
    if digits.startswith("0") and digit_by_digit_on_leading_zero:
        words = [lexicon.zero if d == "0" else lexicon.units[int(d)] for d in digits]
        return " ".join(words)
    return verbalize_integer(digits, lexicon)


def verbalize_token(
    token: NumberToken,
    lexicon: NumeralLexicon | None = None,
    *,
    digit_by_digit_on_leading_zero: bool = True,
) -> str:
    """Spell out one scanned token, including sign, fraction, %, and currency.

    Fractions are read as an integer ("34" -> "sih û çar") unless they start
    with a zero, in which case they default to digit-by-digit reading so
    "12.04" keeps its zero. Unknown currency symbols raise
    :class:`UnknownCurrencyError`.
    """
    lexicon = lexicon or default_lexicon()
    words = []
    if token.negative:
        words.append(lexicon.negative)
    words.append(verbalize_integer(token.integer_digits, lexicon))
    if token.fraction_digits:
        words.append(lexicon.decimal_point)
        words.append(_verbalize_fraction(token.fraction_digits, lexicon, digit_by_digit_on_leading_zero))
    if token.kind == "percent":
        words.append(lexicon.percent)
    elif token.kind == "currency":
        word = lexicon.currencies.get(token.currency_symbol or "")
        if word is None:
            raise UnknownCurrencyError(
                f"no lexicon wordform for currency symbol {token.currency_symbol!r}"
            )
        words.append(word)
    return " ".join(words)


def normalize_text(text: str, lexicon: NumeralLexicon | None = None, rules=None) -> str:
    """Character-normalize ``text``, then verbalize every numeric token in place.

    Surrounding whitespace and punctuation are preserved byte for byte. The
    output of a tokenizable input contains no ASCII digits and is itself a
    fixed point of this function. Verbalization errors are re-raised with the
    offending source span in the message.
    """
    lexicon = lexicon or default_lexicon()
    normalized = textnorm.normalize_chars(text, rules).text
    out = []
    cursor = 0
    for token in scan_numbers(normalized):
        start, end = token.source_span
        out.append(normalized[cursor:start])
        try:
            out.append(verbalize_token(token, lexicon))
        except KurdasrError as exc:
            raise type(exc)(
                f"{exc} (token {normalized[start:end]!r} at span {token.source_span})"
            ) from exc
        cursor = end
    out.append(normalized[cursor:])
    return "".join(out)
