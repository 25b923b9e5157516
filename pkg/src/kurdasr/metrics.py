"""Word and character error rates with full alignment.

Both rates are (S+D+I)/N * 100 over a minimum-cost alignment of hypothesis
against reference under unit costs, where S, D, I count substituted, deleted,
and inserted tokens and N is the reference length. The alignment keeps the
full edit-operation sequence so errors can be inspected, and corpus-level
rates pool the integer counts across utterances rather than averaging
per-utterance percentages.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Literal, NamedTuple, Sequence

from .errors import KurdasrError


class EmptyCorpusError(KurdasrError):
    """corpus_report was called with no utterance pairs."""


class EditOp(NamedTuple):
    """One alignment step; indices are None on the side without a token."""

    kind: Literal["match", "substitute", "delete", "insert"]
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class AlignmentResult:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int
    hypothesis_length: int
    ops: tuple[EditOp, ...] = ()

    @property
    def matches(self) -> int:
        return self.reference_length - self.substitutions - self.deletions

    @property
    def edit_distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def empty_reference(self) -> bool:
        """Distinguished condition: nothing to score against (N == 0, hyp not empty)."""
        return self.reference_length == 0 and self.hypothesis_length > 0

    @property
    def error_rate(self) -> float | None:
        """(S+D+I)/N * 100, 0.0 for two empty sides, None when undefined."""
        if self.reference_length > 0:
            return self.edit_distance / self.reference_length * 100.0
        return None if self.empty_reference else 0.0


def align(reference: Sequence, hypothesis: Sequence) -> AlignmentResult:
    """Minimum-edit-distance alignment of two token sequences.

    Unit costs for substitute/delete/insert; ties in the backtrace are broken
    deterministically preferring match > substitute > delete > insert, so the
    ops trace is reproducible. Replaying ops on the reference yields the
    hypothesis.
    """
    n, m = len(reference), len(hypothesis)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        ref_tok = reference[i - 1]
        row = dist[i]
        prev = dist[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ref_tok == hypothesis[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        here = dist[i][j]
        if i > 0 and j > 0 and reference[i - 1] == hypothesis[j - 1] and here == dist[i - 1][j - 1]:
            ops.append(EditOp("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and here == dist[i - 1][j - 1] + 1:
            ops.append(EditOp("substitute", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and here == dist[i - 1][j] + 1:
            ops.append(EditOp("delete", i - 1, None))
            i -= 1
        else:
            ops.append(EditOp("insert", None, j - 1))
            j -= 1
    ops.reverse()

    subs = sum(1 for op in ops if op.kind == "substitute")
    dels = sum(1 for op in ops if op.kind == "delete")
    ins = sum(1 for op in ops if op.kind == "insert")
    return AlignmentResult(subs, dels, ins, n, m, tuple(ops))


@dataclass(frozen=True)
class ScoreOptions:
    """Text conditioning applied identically to reference and hypothesis.

    Defaults: case-fold, strip terminal punctuation (. , ; : ! ?) at token
    boundaries, collapse whitespace runs to single spaces.
    """

    case_fold: bool = True
    strip_punct: bool = True
    collapse_whitespace: bool = True


_PUNCT_TRAILING = re.compile(r"[.,;:!?]+(?=\s|$)")
_PUNCT_LEADING = re.compile(r"(?:(?<=\s)|^)[.,;:!?]+")


def condition_text(text: str, options: ScoreOptions | None = None) -> str:
    options = options or ScoreOptions()
    if options.case_fold:
        text = text.casefold()
    if options.strip_punct:
        text = _PUNCT_TRAILING.sub("", text)
        text = _PUNCT_LEADING.sub("", text)
    if options.collapse_whitespace:
        text = " ".join(text.split())
    return text


def wer(reference: str, hypothesis: str, options: ScoreOptions | None = None) -> AlignmentResult:
    """Word error rate: condition both sides, split on Unicode whitespace, align."""
    ref_tokens = condition_text(reference, options).split()
    hyp_tokens = condition_text(hypothesis, options).split()
    return align(ref_tokens, hyp_tokens)


def cer(reference: str, hypothesis: str, options: ScoreOptions | None = None) -> AlignmentResult:
    """Character error rate: condition both sides, align codepoint sequences.

    Whitespace that survives conditioning counts as characters.
    """
    ref_chars = list(condition_text(reference, options))
    hyp_chars = list(condition_text(hypothesis, options))
    return align(ref_chars, hyp_chars)


@dataclass(frozen=True)
class CorpusReport:
    """Per-utterance alignments plus pooled counts for a whole corpus."""

    unit: Literal["word", "char"]
    ids: tuple[str, ...]
    rows: tuple[AlignmentResult, ...]

    @property
    def substitutions(self) -> int:
        return sum(r.substitutions for r in self.rows)

    @property
    def deletions(self) -> int:
        return sum(r.deletions for r in self.rows)

    @property
    def insertions(self) -> int:
        return sum(r.insertions for r in self.rows)

    @property
    def reference_length(self) -> int:
        return sum(r.reference_length for r in self.rows)

    @property
    def error_rate(self) -> float | None:
        """Pooled (ΣS+ΣD+ΣI)/ΣN * 100; None when ΣN == 0 with errors present."""
        total_errors = self.substitutions + self.deletions + self.insertions
        if self.reference_length > 0:
            return total_errors / self.reference_length * 100.0
        return None if total_errors else 0.0

    def to_tsv(self) -> str:
        """Report as TSV: one row per utterance plus a pooled TOTAL row."""
        lines = ["id\tS\tD\tI\tN\terror_rate"]
        for utt_id, row in zip(self.ids, self.rows):
            lines.append(
                f"{utt_id}\t{row.substitutions}\t{row.deletions}\t{row.insertions}"
                f"\t{row.reference_length}\t{_format_rate(row.error_rate)}"
            )
        lines.append(
            f"TOTAL\t{self.substitutions}\t{self.deletions}\t{self.insertions}"
            f"\t{self.reference_length}\t{_format_rate(self.error_rate)}"
        )
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        """Human-readable summary table."""
        label = "WER" if self.unit == "word" else "CER"
        widths = max([5] + [len(i) for i in self.ids])
        lines = [
            f"{'id':<{widths}}  {'S':>5} {'D':>5} {'I':>5} {'N':>6}  {label:>7}",
        ]
        for utt_id, row in zip(self.ids, self.rows):
            lines.append(
                f"{utt_id:<{widths}}  {row.substitutions:>5} {row.deletions:>5}"
                f" {row.insertions:>5} {row.reference_length:>6}  {_format_rate(row.error_rate):>7}"
            )
        lines.append("-" * len(lines[0]))
        lines.append(
            f"{'TOTAL':<{widths}}  {self.substitutions:>5} {self.deletions:>5}"
            f" {self.insertions:>5} {self.reference_length:>6}  {_format_rate(self.error_rate):>7}"
        )
        return "\n".join(lines) + "\n"


def _format_rate(rate: float | None) -> str:
    # Full precision is kept internally; display rounds to one decimal.
    return "undefined" if rate is None else f"{rate:.1f}"


def corpus_report(
    pairs: Iterable[tuple[str, str]],
    options: ScoreOptions | None = None,
    unit: Literal["word", "char"] = "word",
    ids: Sequence[str] | None = None,
) -> CorpusReport:
    """Score a list of (reference, hypothesis) pairs with pooled aggregation."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpusError("no utterance pairs to score")
    score = wer if unit == "word" else cer
    rows = tuple(score(ref, hyp, options) for ref, hyp in pairs)
    if ids is None:
        ids = tuple(str(i) for i in range(len(rows)))
    return CorpusReport(unit=unit, ids=tuple(ids), rows=rows)
