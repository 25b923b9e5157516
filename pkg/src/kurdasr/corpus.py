"""Corpus ingestion, train/dev splitting, and test-set validation.

Takes Common-Voice-style TSVs (``path``, ``sentence``, ``client_id`` columns)
plus a clip directory, normalizes every transcript, probes clip durations from
audio headers, and emits a deterministic manifest. The held-out test set has
its own contract: a fixed sentence and speaker budget, speakers and sentences
disjoint from training, and clips in 22.05 kHz 16-bit mono WAV.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import audiofeat, numnorm, textnorm
from .errors import KurdasrError

REQUIRED_COLUMNS = ("path", "sentence", "client_id")

# Held-out test-set contract: sentence/speaker budget and audio format.
TEST_SENTENCES = 200
TEST_SPEAKERS = 50
TEST_SAMPLE_RATE = 22050
TEST_BITS = 16
TEST_CHANNELS = 1


class IngestError(KurdasrError):
    """The corpus TSV is missing columns or otherwise unreadable."""


class SplitConfigError(KurdasrError):
    """Split ratios are inconsistent."""


@dataclass(frozen=True)
class UtteranceRecord:
    """One corpus row; ``split`` is 'unassigned' until :func:`split` runs."""

    id: str
    clip_path: str
    transcript_raw: str
    transcript_normalized: str
    speaker_id: str
    duration: float
    split: str = "unassigned"
    exclude_reason: str | None = None


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    ratios: tuple[float, float]
    records: tuple[UtteranceRecord, ...]
    provenance: dict[str, str] = field(default_factory=dict)


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def ingest(
    tsv_path,
    clips_dir,
    lexicon: numnorm.NumeralLexicon | None = None,
    rules=None,
) -> list[UtteranceRecord]:
    """Read a corpus TSV into records, in row order.

    Transcripts are character- and number-normalized. Rows whose clip file is
    missing or whose duration cannot be read are marked excluded with a
    reason; everything else is left unassigned for :func:`split`.
    """
    clips_dir = Path(clips_dir)
    text = textnorm.read_utf8(tsv_path)
    reader = csv.DictReader(io.StringIO(text), delimiter="\t")
    if reader.fieldnames is None:
        raise IngestError(f"{tsv_path}: empty file, expected a header row")
    for column in REQUIRED_COLUMNS:
        if column not in reader.fieldnames:
            raise IngestError(f"{tsv_path}: missing required column {column!r}")

    records: list[UtteranceRecord] = []
    seen_ids: set[str] = set()
    for row in reader:
        clip_name = (row.get("path") or "").strip()
        if not clip_name:
            raise IngestError(f"{tsv_path}: row {len(records) + 2} has an empty 'path'")
        utt_id = Path(clip_name).stem
        if utt_id in seen_ids:
            raise IngestError(f"{tsv_path}: duplicate utterance id {utt_id!r}")
        seen_ids.add(utt_id)
        sentence = row.get("sentence") or ""
        normalized = numnorm.normalize_text(sentence, lexicon, rules)
        clip_path = clips_dir / clip_name

        duration = 0.0
        exclude_reason = None
        if not clip_path.is_file():
            exclude_reason = "missing clip file"
        else:
            try:
                duration = round(audiofeat.probe_duration(clip_path), 3)
            except (KurdasrError, OSError) as exc:
                exclude_reason = f"unreadable audio: {exc}"
            else:
                if duration <= 0:
                    exclude_reason = "empty audio"

        records.append(
            UtteranceRecord(
                id=utt_id,
                clip_path=str(clip_path),
                transcript_raw=sentence,
                transcript_normalized=normalized,
                speaker_id=(row.get("client_id") or "").strip(),
                duration=duration,
                split="excluded" if exclude_reason else "unassigned",
                exclude_reason=exclude_reason,
            )
        )
    return records


def split(
    records,
    seed: int,
    ratios: tuple[float, float] = (0.9, 0.1),
    provenance: dict[str, str] | None = None,
    speaker_disjoint: bool = False,
) -> SplitManifest:
    """Assign non-excluded records to train/dev by seeded shuffle.

    Bucket sizes are the floors of ratio*total, with the remainder going to
    train. Deterministic for identical (records, seed). With
    ``speaker_disjoint`` the shuffle is over speakers and whole speakers go
    to one bucket, so counts only approximate the ratios at speaker
    granularity (held-out test sets are always speaker-disjoint; train/dev
    disjointness is this opt-in).
    """
    records = list(records)
    if not records:
        raise IngestError("no records to split")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitConfigError(f"ratios must sum to 1: {ratios}")

    eligible = [r for r in records if r.split != "excluded"]
    rng = random.Random(seed)
    if speaker_disjoint:
        speakers = list(dict.fromkeys(r.speaker_id for r in eligible))
        rng.shuffle(speakers)
        per_speaker = {s: sum(1 for r in eligible if r.speaker_id == s) for s in speakers}
        target_train = ratios[0] * len(eligible)
        train_speakers = set()
        assigned_count = 0
        for speaker in speakers:
            if assigned_count >= target_train:
                break
            train_speakers.add(speaker)
            assigned_count += per_speaker[speaker]
        train_ids = {r.id for r in eligible if r.speaker_id in train_speakers}
    else:
        shuffled = [r.id for r in eligible]
        rng.shuffle(shuffled)
        n = len(shuffled)
        n_train = int(ratios[0] * n)
        n_dev = int(ratios[1] * n)
        n_train += n - n_train - n_dev
        train_ids = set(shuffled[:n_train])

    assigned = tuple(
        r if r.split == "excluded" else replace(r, split="train" if r.id in train_ids else "dev")
        for r in records
    )
    return SplitManifest(
        seed=seed, ratios=tuple(ratios), records=assigned, provenance=provenance or {}
    )


_RECORD_FIELDS = (
    "id",
    "clip_path",
    "transcript_raw",
    "transcript_normalized",
    "speaker_id",
    "duration",
    "split",
    "exclude_reason",
)


def manifest_to_text(manifest: SplitManifest) -> str:
    """Serialize as line-delimited JSON: a metadata header line, then records.

    Field order is fixed, so identical manifests serialize byte-identically.
    """
    lines = [
        json.dumps(
            {
                "format": "kurdasr-manifest-v1",
                "seed": manifest.seed,
                "ratios": list(manifest.ratios),
                "provenance": dict(sorted(manifest.provenance.items())),
            },
            ensure_ascii=False,
        )
    ]
    for record in manifest.records:
        row = {name: getattr(record, name) for name in _RECORD_FIELDS}
        lines.append(json.dumps(row, ensure_ascii=False))
    return "\n".join(lines) + "\n"


def save_manifest(manifest: SplitManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest_to_text(manifest))


def load_manifest(path) -> SplitManifest:
    lines = textnorm.read_utf8(path).splitlines()
    if not lines:
        raise IngestError(f"{path}: empty manifest")
    head = json.loads(lines[0])
    if head.get("format") != "kurdasr-manifest-v1":
        raise IngestError(f"{path}: not a kurdasr manifest")
    records = tuple(UtteranceRecord(**json.loads(line)) for line in lines[1:] if line)
    return SplitManifest(
        seed=head["seed"],
        ratios=tuple(head["ratios"]),
        records=records,
        provenance=dict(head.get("provenance", {})),
    )


def hours_summary(records) -> tuple[float, float]:
    """(total recorded hours, hours surviving exclusion)."""
    total = sum(r.duration for r in records) / 3600.0
    kept = sum(r.duration for r in records if r.split != "excluded") / 3600.0
    return total, kept


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format_table(self) -> str:
        lines = []
        for check in self.checks:
            status = "PASS" if check.passed else "FAIL"
            lines.append(f"{status}  {check.name}: {check.detail}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"{verdict}  test-set validation")
        return "\n".join(lines) + "\n"


def validate_test_set(
    manifest: SplitManifest,
    test_records,
    expected_sentences: int = TEST_SENTENCES,
    expected_speakers: int = TEST_SPEAKERS,
) -> ValidationReport:
    """Check the held-out test set against its contract.

    Validates sentence and speaker budgets, speaker disjointness from
    train+dev, sentence disjointness from train (compared on normalized
    transcripts), and per-clip audio format (WAV, 22.05 kHz, 16-bit, mono).
    Violations are reported, never raised.
    """
    test_records = list(test_records)
    checks: list[CheckResult] = []

    n_sentences = len(test_records)
    checks.append(
        CheckResult(
            "sentence count",
            n_sentences == expected_sentences,
            f"found {n_sentences}, expected {expected_sentences}",
        )
    )
    speakers = {r.speaker_id for r in test_records}
    checks.append(
        CheckResult(
            "unique speaker count",
            len(speakers) == expected_speakers,
            f"found {len(speakers)}, expected {expected_speakers}",
        )
    )

    train_dev = [r for r in manifest.records if r.split in ("train", "dev")]
    train_only = [r for r in manifest.records if r.split == "train"]
    shared_speakers = sorted(speakers & {r.speaker_id for r in train_dev})
    checks.append(
        CheckResult(
            "speaker disjointness",
            not shared_speakers,
            "no test speaker appears in train/dev"
            if not shared_speakers
            else f"shared speakers: {', '.join(shared_speakers)}",
        )
    )
    train_sentences = {r.transcript_normalized for r in train_only}
    shared_sentences = sorted(
        {r.transcript_normalized for r in test_records} & train_sentences
    )
    checks.append(
        CheckResult(
            "sentence disjointness",
            not shared_sentences,
            "no test sentence appears in train"
            if not shared_sentences
            else f"shared sentences: {shared_sentences[:3]!r}",
        )
    )

    format_violations: list[str] = []
    for record in test_records:
        clip = Path(record.clip_path)
        if not clip.is_file():
            format_violations.append(f"{record.id}: clip missing")
            continue
        try:
            info = audiofeat.wav_info(clip)
        except KurdasrError as exc:
            format_violations.append(f"{record.id}: not a WAV container ({exc})")
            continue
        if info.sample_rate != TEST_SAMPLE_RATE:
            format_violations.append(
                f"{record.id}: sample rate {info.sample_rate} Hz, expected 22.05 kHz"
            )
        if info.bits_per_sample != TEST_BITS:
            format_violations.append(
                f"{record.id}: {info.bits_per_sample}-bit, expected {TEST_BITS}-bit"
            )
        if info.channels != TEST_CHANNELS:
            format_violations.append(f"{record.id}: {info.channels} channels, expected mono")
    checks.append(
        CheckResult(
            "audio format",
            not format_violations,
            "all clips are 22.05 kHz 16-bit mono WAV"
            if not format_violations
            else "; ".join(format_violations[:5]),
        )
    )
    return ValidationReport(tuple(checks))
