"""Readers for the primary toolkit's published file formats.

The harness consumes the toolkit through its external interfaces only: the
one-token-per-line vocabulary file, the ``left right`` merges file, the
single-file hybrid vocabulary format, the line-delimited JSON manifest, and
the little-endian feature dump. This module parses those formats and provides
the matching greedy BPE encode/decode so transcripts can be turned into
training targets.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import KurdftError

MARKER = "▁"
_PIECE_RE = re.compile(f"{MARKER}[^{MARKER}]*|[^{MARKER}]+")
_BYTE_TOKEN_RE = re.compile(r"^<0x([0-9A-F]{2})>$")

BOS_TOKEN = "<0x02>"  # STX/ETX byte-fallback entries double as sequence delimiters
EOS_TOKEN = "<0x03>"


@dataclass(frozen=True)
class Vocab:
    """Tokens in id order plus ranked merge pairs (base rules first)."""

    tokens: tuple[str, ...]
    merges: tuple[tuple[str, str], ...]
    id_offset: int = 0  # first appended id; 0 means no base/added distinction

    @property
    def bos_id(self) -> int:
        return self.token_id(BOS_TOKEN)

    @property
    def eos_id(self) -> int:
        return self.token_id(EOS_TOKEN)

    def token_id(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            raise KurdftError(
                f"vocabulary lacks {token!r}; the harness needs byte-fallback entries"
            ) from None


def load_trained_vocab(vocab_dir) -> Vocab:
    vocab_dir = Path(vocab_dir)
    tokens = tuple((vocab_dir / "vocab.txt").read_text(encoding="utf-8").splitlines())
    merges: list[tuple[str, str]] = []
    merges_path = vocab_dir / "merges.txt"
    if merges_path.is_file():
        for line in merges_path.read_text(encoding="utf-8").splitlines():
            if line:
                left, _, right = line.partition(" ")
                merges.append((left, right))
    return Vocab(tokens=tokens, merges=tuple(merges))


def load_hybrid_vocab(hybrid_path, base_vocab_path) -> Vocab:
    """Parse the single-file hybrid format plus its base vocabulary file."""
    lines = Path(hybrid_path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "kurdasr-hybrid-v1":
        raise KurdftError(f"{hybrid_path}: not a hybrid vocabulary file")

    def value_of(index: int, key: str) -> str:
        name, _, value = lines[index].partition(" ")
        if name != key:
            raise KurdftError(f"{hybrid_path}: expected {key!r} on line {index + 1}")
        return value

    id_offset = int(value_of(2, "id_offset"))
    n_added = int(value_of(3, "added"))
    cursor = 4
    added = tuple(lines[cursor : cursor + n_added])
    cursor += n_added

    def read_merges(index: int, key: str):
        count = int(value_of(index, key))
        pairs = []
        for i in range(count):
            left, _, right = lines[index + 1 + i].partition(" ")
            pairs.append((left, right))
        return tuple(pairs), index + 1 + count

    added_merges, cursor = read_merges(cursor, "merges")
    base_merges, _ = read_merges(cursor, "base_merges")

    base_tokens = tuple(Path(base_vocab_path).read_text(encoding="utf-8").splitlines())
    if len(base_tokens) != id_offset:
        raise KurdftError(
            f"{hybrid_path}: id_offset {id_offset} != base size {len(base_tokens)}"
        )
    return Vocab(
        tokens=base_tokens + added,
        merges=base_merges + added_merges,
        id_offset=id_offset,
    )


def _pieces(text: str) -> list[str]:
    marked = text.replace(MARKER, " ").replace(" ", MARKER)
    return _PIECE_RE.findall(marked)


def encode(text: str, vocab: Vocab) -> list[int]:
    """Greedy lowest-rank-first BPE encode over the vocabulary's merge table."""
    ranks = {pair: rank for rank, pair in enumerate(vocab.merges)}
    ids_of = {token: i for i, token in enumerate(vocab.tokens)}
    out: list[int] = []
    for piece in _pieces(text):
        symbols = list(piece)
        while len(symbols) > 1:
            candidates = [
                (ranks[p], p) for p in set(zip(symbols, symbols[1:])) if p in ranks
            ]
            if not candidates:
                break
            _, best = min(candidates)
            merged, i = [], 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == best:
                    merged.append(best[0] + best[1])
                    i += 2
                else:
                    merged.append(symbols[i])
                    i += 1
            symbols = merged
        for symbol in symbols:
            token_id = ids_of.get(symbol)
            if token_id is not None:
                out.append(token_id)
                continue
            for byte in symbol.encode("utf-8"):
                fallback = ids_of.get(f"<0x{byte:02X}>")
                if fallback is None:
                    raise KurdftError(f"no token or byte fallback for symbol {symbol!r}")
                out.append(fallback)
    return out


def decode(ids, vocab: Vocab) -> str:
    parts: list[str] = []
    pending = bytearray()
    for token_id in ids:
        token_id = int(token_id)
        if not 0 <= token_id < len(vocab.tokens):
            raise KurdftError(f"id {token_id} outside vocabulary of size {len(vocab.tokens)}")
        token = vocab.tokens[token_id]
        matched = _BYTE_TOKEN_RE.match(token)
        if matched:
            pending.append(int(matched.group(1), 16))
            continue
        if pending:
            parts.append(pending.decode("utf-8", errors="replace"))
            pending.clear()
        parts.append(token)
    if pending:
        parts.append(pending.decode("utf-8", errors="replace"))
    return "".join(parts).replace(MARKER, " ")


_CONTROL_RE = re.compile(r"[\x00-\x1f\x7f]")


def clean_decoded(text: str) -> str:
    """Sanitize decoded text for the id<TAB>text interface.

    Byte-fallback decoding can produce any byte, including the delimiter
    bytes and newlines that would break a TSV line; control characters are
    mapped to spaces and the ends trimmed.
    """
    return _CONTROL_RE.sub(" ", text).strip()


def load_manifest_records(path) -> list[dict]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise KurdftError(f"{path}: empty manifest")
    head = json.loads(lines[0])
    if head.get("format") != "kurdasr-manifest-v1":
        raise KurdftError(f"{path}: not a kurdasr manifest")
    return [json.loads(line) for line in lines[1:] if line]


_DUMP_HEADER = struct.Struct("<4sIIIII")


def read_feature_dump(path) -> np.ndarray:
    """Feature dump -> float32 array [num_frames, num_mels]."""
    data = Path(path).read_bytes()
    if len(data) < _DUMP_HEADER.size:
        raise KurdftError(f"{path}: truncated feature dump")
    magic, version, num_frames, num_mels, _, _ = _DUMP_HEADER.unpack_from(data)
    if magic != b"KMEL" or version != 1:
        raise KurdftError(f"{path}: bad feature dump magic or version")
    body = data[_DUMP_HEADER.size :]
    if len(body) != num_frames * num_mels * 4:
        raise KurdftError(f"{path}: feature dump payload size mismatch")
    return np.frombuffer(body, dtype="<f4").reshape(num_frames, num_mels).copy()
