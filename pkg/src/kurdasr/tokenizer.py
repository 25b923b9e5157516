"""Subword tokenizer training and hybrid vocabulary construction.

Byte-pair encoding over a character-level alphabet: training repeatedly
merges the most frequent adjacent symbol pair (ties broken by lexicographic
order of the pair) until the vocabulary target is reached. A trained
vocabulary can then be appended to a frozen base vocabulary: novel tokens get
contiguous ids starting at ``len(base)``, and base merge rules always outrank
the appended ones at encode time.

Whitespace handling: a space is absorbed into the following piece as the
word-boundary marker U+2581, so "du sed" tokenizes as ["du", "▁sed"] and
decoding restores spacing exactly. U+2581 is reserved: a literal one in input
text is treated as a space. The 256 ``<0xNN>`` byte-fallback tokens appended
after training keep encoding total for codepoints never seen in the corpus.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from . import textnorm
from .errors import KurdasrError

MARKER = "▁"
_PIECE_RE = re.compile(f"{MARKER}[^{MARKER}]*|[^{MARKER}]+")
_BYTE_TOKENS = tuple(f"<0x{i:02X}>" for i in range(256))
_BYTE_TOKEN_RE = re.compile(r"^<0x([0-9A-F]{2})>$")


class TrainingError(KurdasrError):
    """The corpus cannot be trained on (e.g. empty)."""


class VocabConfigError(KurdasrError):
    """Tokenizer configuration is inconsistent."""


class UnknownIdError(KurdasrError):
    """decode() was given an id outside the vocabulary."""


class EncodeError(KurdasrError):
    """encode() hit a symbol with no token and no byte fallback."""


@dataclass(frozen=True)
class MergeRule:
    left: str
    right: str
    rank: int


@dataclass(frozen=True)
class HybridVocab:
    """A frozen base vocabulary extended with appended language-specific tokens.

    ``merges`` are the retained rules for the appended tokens; ``base_merges``
    (possibly empty) come with the base vocabulary and outrank them.
    """

    base_tokens: tuple[str, ...]
    added_tokens: tuple[str, ...]
    merges: tuple[MergeRule, ...]
    id_offset: int
    base_merges: tuple[MergeRule, ...] = ()
    base_digest: str = ""

    @property
    def size(self) -> int:
        return len(self.base_tokens) + len(self.added_tokens)

    def token_for(self, token_id: int) -> str:
        if 0 <= token_id < self.id_offset:
            return self.base_tokens[token_id]
        if self.id_offset <= token_id < self.size:
            return self.added_tokens[token_id - self.id_offset]
        raise UnknownIdError(f"id {token_id} outside vocabulary of size {self.size}")


def self_vocab(tokens, merges) -> HybridVocab:
    """Wrap one trained vocabulary as a stand-alone (no-base) HybridVocab."""
    return HybridVocab(
        base_tokens=tuple(tokens),
        added_tokens=(),
        merges=(),
        id_offset=len(tuple(tokens)),
        base_merges=tuple(merges),
    )


def split_pieces(text: str) -> list[str]:
    """Split text into pieces, spaces absorbed as a marker on the next piece."""
    marked = text.replace(MARKER, " ").replace(" ", MARKER)
    return _PIECE_RE.findall(marked)


def train_bpe(
    corpus_path, target_vocab: int, min_frequency: int = 2
) -> tuple[list[str], list[MergeRule]]:
    """Train a BPE vocabulary of ``target_vocab`` tokens on a text corpus.

    The corpus is read line by line (newlines are piece separators, never
    alphabet symbols). Tokens are ordered: sorted alphabet first, then merged
    tokens in rank order; the 256 byte-fallback entries are appended beyond
    the target. Deterministic for identical corpus bytes and settings.
    """
    piece_freq: Counter[str] = Counter()
    for line in textnorm.read_utf8(corpus_path).splitlines():
        piece_freq.update(split_pieces(line))
    if not piece_freq:
        raise TrainingError(f"{corpus_path}: corpus contains no text")
    if min_frequency < 1:
        raise VocabConfigError("min_frequency must be >= 1")

    alphabet = sorted({ch for piece in piece_freq for ch in piece})
    if target_vocab < len(alphabet):
        raise VocabConfigError(
            f"target_vocab {target_vocab} is smaller than the corpus alphabet ({len(alphabet)})"
        )

    words: list[list[str]] = []
    freqs: list[int] = []
    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[int]] = {}
    for piece, freq in piece_freq.items():
        idx = len(words)
        symbols = list(piece)
        words.append(symbols)
        freqs.append(freq)
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freq
            pair_words.setdefault(pair, set()).add(idx)

    tokens = list(alphabet)
    merges: list[MergeRule] = []
    while len(tokens) < target_vocab and pair_counts:
        best_count = max(pair_counts.values())
        if best_count < min_frequency:
            break
        best = min(pair for pair, count in pair_counts.items() if count == best_count)
        merged = best[0] + best[1]
        merges.append(MergeRule(best[0], best[1], len(merges)))
        tokens.append(merged)

        for idx in sorted(pair_words.get(best, ())):
            symbols = words[idx]
            freq = freqs[idx]
            for pair in zip(symbols, symbols[1:]):
                pair_counts[pair] -= freq
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                witnesses = pair_words.get(pair)
                if witnesses is not None:
                    witnesses.discard(idx)
                    if not witnesses:
                        del pair_words[pair]
            merged_symbols = _merge_pair(symbols, best, merged)
            words[idx] = merged_symbols
            for pair in zip(merged_symbols, merged_symbols[1:]):
                pair_counts[pair] += freq
                pair_words.setdefault(pair, set()).add(idx)

    for byte_token in _BYTE_TOKENS:
        if byte_token not in tokens:
            tokens.append(byte_token)
    return tokens, merges


def _merge_pair(symbols: list[str], pair: tuple[str, str], merged: str) -> list[str]:
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def build_hybrid(
    base_tokens,
    trained_tokens,
    merges,
    base_merges=(),
    base_digest: str = "",
) -> HybridVocab:
    """Append novel trained tokens to a frozen base vocabulary.

    Trained tokens already present in the base are dropped (order otherwise
    preserved); the survivors get ids ``len(base)``, ``len(base)+1``, ...
    Merge rules are retained only where the merged string is a base or added
    token, and re-ranked densely.
    """
    if isinstance(base_tokens, dict):
        if sorted(base_tokens) != list(range(len(base_tokens))):
            raise VocabConfigError("base vocabulary ids must be dense 0..B-1")
        base_tokens = [base_tokens[i] for i in range(len(base_tokens))]
    base_tokens = tuple(base_tokens)
    base_set = set(base_tokens)
    added = tuple(t for t in trained_tokens if t not in base_set)
    known = base_set | set(added)
    kept = tuple(
        MergeRule(m.left, m.right, rank)
        for rank, m in enumerate(m for m in merges if m.left + m.right in known)
    )
    return HybridVocab(
        base_tokens=base_tokens,
        added_tokens=added,
        merges=kept,
        id_offset=len(base_tokens),
        base_merges=tuple(base_merges),
        base_digest=base_digest,
    )


def _rank_table(vocab: HybridVocab) -> dict[tuple[str, str], int]:
    ranks: dict[tuple[str, str], int] = {}
    for rule in vocab.base_merges:
        ranks.setdefault((rule.left, rule.right), len(ranks))
    for rule in vocab.merges:
        ranks.setdefault((rule.left, rule.right), len(ranks))
    return ranks


def _encode_piece(
    piece: str,
    ranks: dict[tuple[str, str], int],
    token_ids: dict[str, int],
) -> list[int]:
    symbols = list(piece)
    while len(symbols) > 1:
        pairs = set(zip(symbols, symbols[1:]))
        ranked = [(ranks[p], p) for p in pairs if p in ranks]
        if not ranked:
            break
        _, best = min(ranked)
        symbols = _merge_pair(symbols, best, best[0] + best[1])
    ids: list[int] = []
    for symbol in symbols:
        token_id = token_ids.get(symbol)
        if token_id is not None:
            ids.append(token_id)
            continue
        for byte in symbol.encode("utf-8"):
            byte_id = token_ids.get(_BYTE_TOKENS[byte])
            if byte_id is None:
                raise EncodeError(
                    f"symbol {symbol!r} has no token and the vocabulary has no byte fallback"
                )
            ids.append(byte_id)
    return ids


def encode(text: str, vocab: HybridVocab) -> list[int]:
    """Tokenize text to ids: greedy lowest-rank-first pairwise merging per piece."""
    ranks = _rank_table(vocab)
    token_ids = {token: i for i, token in enumerate(vocab.base_tokens)}
    for i, token in enumerate(vocab.added_tokens):
        token_ids.setdefault(token, vocab.id_offset + i)
    ids: list[int] = []
    cache: dict[str, list[int]] = {}
    for piece in split_pieces(text):
        cached = cache.get(piece)
        if cached is None:
            cached = cache[piece] = _encode_piece(piece, ranks, token_ids)
        ids.extend(cached)
    return ids


def decode(ids, vocab: HybridVocab) -> str:
    """Invert :func:`encode`; raises :class:`UnknownIdError` on out-of-range ids."""
    parts: list[str] = []
    pending_bytes = bytearray()
    for token_id in ids:
        token = vocab.token_for(int(token_id))
        m = _BYTE_TOKEN_RE.match(token)
        if m:
            pending_bytes.append(int(m.group(1), 16))
            continue
        if pending_bytes:
            parts.append(pending_bytes.decode("utf-8", errors="replace"))
            pending_bytes.clear()
        parts.append(token)
    if pending_bytes:
        parts.append(pending_bytes.decode("utf-8", errors="replace"))
    return "".join(parts).replace(MARKER, " ")


# -- serialization --


def save_vocab(tokens, merges, out_dir) -> None:
    """Write vocab.txt (one token per line, id order) and merges.txt (rank order)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "vocab.txt").write_text("\n".join(tokens) + "\n", encoding="utf-8")
    merge_lines = [f"{m.left} {m.right}" for m in merges]
    (out_dir / "merges.txt").write_text(
        ("\n".join(merge_lines) + "\n") if merge_lines else "", encoding="utf-8"
    )


def load_vocab(vocab_dir) -> tuple[list[str], list[MergeRule]]:
    vocab_dir = Path(vocab_dir)
    tokens = textnorm.read_utf8(vocab_dir / "vocab.txt").splitlines()
    merges = []
    merges_path = vocab_dir / "merges.txt"
    if merges_path.is_file():
        for rank, line in enumerate(textnorm.read_utf8(merges_path).splitlines()):
            if not line:
                continue
            left, sep, right = line.partition(" ")
            if not sep or not left or not right:
                raise VocabConfigError(f"{merges_path}:{rank + 1}: expected 'left right'")
            merges.append(MergeRule(left, right, rank))
    return tokens, merges


def load_token_file(path) -> list[str]:
    """Read a plain one-token-per-line vocabulary file."""
    return textnorm.read_utf8(path).splitlines()


def vocab_file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_hybrid(vocab: HybridVocab, path) -> None:
    """Single-file hybrid format: header, counted sections for tokens and merges."""
    lines = [
        "kurdasr-hybrid-v1",
        f"base_digest {vocab.base_digest}",
        f"id_offset {vocab.id_offset}",
        f"added {len(vocab.added_tokens)}",
        *vocab.added_tokens,
        f"merges {len(vocab.merges)}",
        *(f"{m.left} {m.right}" for m in vocab.merges),
        f"base_merges {len(vocab.base_merges)}",
        *(f"{m.left} {m.right}" for m in vocab.base_merges),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_hybrid(path, base_path) -> HybridVocab:
    """Load a hybrid file together with its base vocabulary file.

    The base file's digest must match the one recorded in the hybrid file.
    """
    lines = textnorm.read_utf8(path).splitlines()
    if not lines or lines[0] != "kurdasr-hybrid-v1":
        raise VocabConfigError(f"{path}: not a kurdasr hybrid vocabulary file")

    def take_kv(index: int, key: str) -> str:
        name, _, value = lines[index].partition(" ")
        if name != key:
            raise VocabConfigError(f"{path}: expected {key!r} on line {index + 1}")
        return value

    digest = take_kv(1, "base_digest")
    id_offset = int(take_kv(2, "id_offset"))
    n_added = int(take_kv(3, "added"))
    cursor = 4
    added = tuple(lines[cursor : cursor + n_added])
    cursor += n_added

    def take_merges(index: int, key: str) -> tuple[tuple[MergeRule, ...], int]:
        count = int(take_kv(index, key))
        rules = []
        for rank in range(count):
            left, _, right = lines[index + 1 + rank].partition(" ")
            rules.append(MergeRule(left, right, rank))
        return tuple(rules), index + 1 + count

    merges, cursor = take_merges(cursor, "merges")
    base_merges, _ = take_merges(cursor, "base_merges")

    base_tokens = load_token_file(base_path)
    actual_digest = vocab_file_digest(base_path)
    if digest and digest != actual_digest:
        raise VocabConfigError(
            f"{path}: base vocabulary digest mismatch (expected {digest[:12]}…, "
            f"found {actual_digest[:12]}…)"
        )
    if id_offset != len(base_tokens):
        raise VocabConfigError(
            f"{path}: id_offset {id_offset} != base vocabulary size {len(base_tokens)}"
        )
    return HybridVocab(
        base_tokens=tuple(base_tokens),
        added_tokens=added,
        merges=merges,
        id_offset=id_offset,
        base_merges=base_merges,
        base_digest=digest,
    )
