"""Character-level standardization of Kurmanji text.

Kurmanji written on non-standard keyboard layouts (most often Turkish ones)
carries variant forms of the accented letters ê, î, û, ç, ş and the two
Turkish-specific characters ğ and İ/ı. This module repairs those variants
codepoint by codepoint using a data-driven rule table, and records a trace of
every replacement so the transformation can be audited and replayed.

Inputs are NFC-composed before the table is applied, so decomposed accent
sequences (e.g. ``e`` + combining acute) are first composed into the
precomposed character the table knows about. The compose-and-map step is
iterated to a fixed point: a replacement can expose a new composable sequence
(``č`` + combining acute becomes ``ç`` + acute, which NFC recomposes to ``ḉ``,
itself a variant form), and iterating guarantees the output is stable under a
second call. Ordinary text converges in a single pass.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import KurdasrError


class RuleTableError(KurdasrError):
    """A rule table violates its structural invariants."""


class EncodingError(KurdasrError):
    """Input bytes are not valid UTF-8; the message names the byte offset."""


@dataclass(frozen=True)
class CharRule:
    """One replacement rule: every codepoint in ``sources`` becomes ``target``."""

    sources: tuple[str, ...]
    target: str


class RuleHit(NamedTuple):
    """One applied replacement: ``source`` at ``position`` became ``target``.

    Positions refer to the NFC-composed text of the pass that produced the
    hit. Within a pass positions are strictly increasing; a non-increasing
    position marks the start of a new pass (see :func:`replay_rule_hits`).
    """

    position: int
    source: str
    target: str


@dataclass(frozen=True)
class NormalizedText:
    text: str
    rule_hits: tuple[RuleHit, ...]


# Keyboard-variant repair table. Order matters: later entries win on conflict,
# so 'İ' (listed both under 'î' and under 'i') ends up at 'i', the
# Turkish-layout reading.
_DEFAULT_RULES: tuple[tuple[str, str], ...] = (
    ("éèëēĕėȇȅ", "ê"),
    ("ìíïīĭİ", "î"),
    ("ûùüūȕȗ", "û"),
    ("čćċĉḉ", "ç"),
    ("ŝšśṣṥṧṩ", "ş"),
    ("ğ", "g"),
    ("İı", "i"),
)


def build_default_rules() -> list[CharRule]:
    """Return the default rule table, including uppercase counterparts.

    Each lowercase rule is followed by the rule mapping the uppercase forms of
    its sources to the uppercase form of its target. Sources whose uppercase
    form is not a single codepoint, is unchanged, or equals the uppercase
    target are omitted (so plain ASCII 'I' is never remapped).
    """
    rules: list[CharRule] = []
    for sources, target in _DEFAULT_RULES:
        rules.append(CharRule(tuple(sources), target))
        upper_target = target.upper()
        if len(upper_target) != 1:
            continue
        upper_sources = tuple(
            s.upper()
            for s in sources
            if len(s.upper()) == 1 and s.upper() != s and s.upper() != upper_target
        )
        if upper_sources:
            rules.append(CharRule(upper_sources, upper_target))
    return rules


def flatten_rules(rules: Iterable[CharRule]) -> dict[str, str]:
    """Flatten an ordered rule list into a codepoint map.

    Later entries for the same source codepoint override earlier ones;
    identity entries are dropped after overriding. Raises
    :class:`RuleTableError` if a rule is not 1 codepoint -> 1 codepoint or if
    some target is itself remapped (targets must be fixed points).
    """
    table: dict[str, str] = {}
    for rule in rules:
        if len(rule.target) != 1:
            raise RuleTableError(f"rule target must be a single codepoint: {rule.target!r}")
        for source in rule.sources:
            if len(source) != 1:
                raise RuleTableError(f"rule source must be a single codepoint: {source!r}")
            table[source] = rule.target
    for source in [s for s, t in table.items() if s == t]:
        del table[source]
    for target in set(table.values()):
        if target in table:
            raise RuleTableError(
                f"target {target!r} is itself remapped to {table[target]!r}; "
                "targets must be fixed points of the table"
            )
    return table


@lru_cache(maxsize=1)
def default_table() -> Mapping[str, str]:
    return flatten_rules(build_default_rules())


def _as_table(rules: Sequence[CharRule] | Mapping[str, str] | None) -> Mapping[str, str]:
    if rules is None:
        return default_table()
    if isinstance(rules, Mapping):
        return rules
    return flatten_rules(rules)


def normalize_chars(
    text: str, rules: Sequence[CharRule] | Mapping[str, str] | None = None
) -> NormalizedText:
    """Replace every variant codepoint in ``text`` by its standard form.

    The input is NFC-composed, the table applied, and the two steps iterated
    until stable. All codepoints without a rule (whitespace, punctuation,
    digits) pass through unchanged. The returned text is NFC-composed and
    contains no source codepoint of the active table, and
    ``normalize_chars(result.text)`` returns ``result.text`` unchanged.
    """
    table = _as_table(rules)
    hits: list[RuleHit] = []
    current = text
    while True:
        composed = unicodedata.normalize("NFC", current)
        out: list[str] = []
        changed = False
        for pos, ch in enumerate(composed):
            mapped = table.get(ch)
            if mapped is None:
                out.append(ch)
            else:
                out.append(mapped)
                hits.append(RuleHit(pos, ch, mapped))
                changed = True
        if not changed:
            return NormalizedText(composed, tuple(hits))
        current = "".join(out)


def replay_rule_hits(text: str, hits: Sequence[RuleHit]) -> str:
    """Re-derive ``normalize_chars(text).text`` from its recorded hits.

    Hits are applied pass by pass: positions strictly increase within a pass,
    and a non-increasing position starts a new pass, after which the
    intermediate string is NFC-composed again.
    """
    current = text
    i = 0
    while i < len(hits):
        chars = list(unicodedata.normalize("NFC", current))
        last = -1
        while i < len(hits) and hits[i].position > last:
            hit = hits[i]
            if hit.position >= len(chars) or chars[hit.position] != hit.source:
                raise RuleTableError(
                    f"rule hit {hit} does not match the text it is replayed against"
                )
            chars[hit.position] = hit.target
            last = hit.position
            i += 1
        current = "".join(chars)
    return unicodedata.normalize("NFC", current)


def decode_utf8(data: bytes) -> str:
    """Decode UTF-8 bytes, raising :class:`EncodingError` with the byte offset."""
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(
            f"invalid UTF-8 at byte offset {exc.start}: {exc.reason}"
        ) from exc


def read_utf8(path) -> str:
    """Read a file as UTF-8 text (see :func:`decode_utf8` for error behavior)."""
    with open(path, "rb") as fh:
        return decode_utf8(fh.read())


def load_rules(path) -> list[CharRule]:
    """Load a rule table from a text file, one ``<sources><TAB><target>`` per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    rules: list[CharRule] = []
    for lineno, line in enumerate(read_utf8(path).splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or len(parts[1]) != 1:
            raise RuleTableError(
                f"{path}:{lineno}: expected '<source codepoints><TAB><single target>'"
            )
        rules.append(CharRule(tuple(parts[0]), parts[1]))
    return rules


def save_rules(rules: Iterable[CharRule], path) -> None:
    lines = [f"{''.join(rule.sources)}\t{rule.target}" for rule in rules]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
