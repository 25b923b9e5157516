"""Checkpoint evaluation against a test manifest, scored by the primary CLI.

Hypotheses are greedy-decoded from per-utterance feature dumps, written as an
``id<TAB>text`` TSV next to the references, and handed to ``kurdasr score``
in a subprocess; the pooled WER/CER come from its TSV report. A decode
failure is recorded and that utterance scores against an empty hypothesis.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path

import torch

from . import KurdftError
from .model import ToySpeechModel
from .vocabio import Vocab, clean_decoded, decode, load_manifest_records, read_feature_dump


def primary_command() -> list[str]:
    """Locate the primary toolkit CLI (console script, else module form)."""
    executable = shutil.which("kurdasr")
    if executable:
        return [executable]
    return [sys.executable, "-m", "kurdasr.cli"]


def score_with_primary(ref_tsv, hyp_tsv, cer: bool = False, command=None) -> float:
    """Run the primary ``score`` subcommand and return the pooled rate."""
    argv = list(command or primary_command())
    report_path = Path(hyp_tsv).with_suffix(".report.tsv")
    argv += ["score", "--ref", str(ref_tsv), "--hyp", str(hyp_tsv), "--tsv-out", str(report_path)]
    if cer:
        argv.append("--cer")
    completed = subprocess.run(argv, capture_output=True, text=True)
    if completed.returncode != 0:
        raise KurdftError(
            f"primary score command failed ({completed.returncode}): {completed.stderr.strip()}"
        )
    for line in report_path.read_text(encoding="utf-8").splitlines():
        if line.startswith("TOTAL\t"):
            rate = line.split("\t")[5]
            if rate == "undefined":
                raise KurdftError("pooled rate undefined (empty references)")
            return float(rate)
    raise KurdftError(f"no TOTAL row in {report_path}")


@dataclass(frozen=True)
class EvalResult:
    wer: float
    cer: float
    utterances: int
    decode_failures: tuple[str, ...]
    ref_tsv: str
    hyp_tsv: str


def write_tsv(rows: dict[str, str], path) -> None:
    text = "".join(f"{utt_id}\t{text}\n" for utt_id, text in rows.items())
    Path(path).write_text(text, encoding="utf-8")


def evaluate(
    model: ToySpeechModel,
    manifest_path,
    features_dir,
    vocab: Vocab,
    out_dir,
    splits: tuple[str, ...] = ("dev", "test", "train", "unassigned"),
    command=None,
) -> EvalResult:
    """Decode every manifest utterance with features present and score it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features_dir = Path(features_dir)

    refs: dict[str, str] = {}
    hyps: dict[str, str] = {}
    failures: list[str] = []
    for record in load_manifest_records(manifest_path):
        if record["split"] == "excluded" or record["split"] not in splits:
            continue
        utt_id = record["id"]
        refs[utt_id] = record["transcript_normalized"]
        try:
            frames = read_feature_dump(features_dir / f"{utt_id}.kmel")
            features = torch.from_numpy(frames[:, : model.config.num_mels]).float()
            ids = model.greedy_decode(features, vocab.bos_id, vocab.eos_id)
            hyps[utt_id] = clean_decoded(decode(ids, vocab))
        except (KurdftError, OSError) as exc:
            failures.append(f"{utt_id}: {exc}")
            hyps[utt_id] = ""
    if not refs:
        raise KurdftError(f"{manifest_path}: no scoreable utterances in splits {splits}")

    ref_tsv = out_dir / "refs.tsv"
    hyp_tsv = out_dir / "hyps.tsv"
    write_tsv(refs, ref_tsv)
    write_tsv(hyps, hyp_tsv)
    return EvalResult(
        wer=score_with_primary(ref_tsv, hyp_tsv, cer=False, command=command),
        cer=score_with_primary(ref_tsv, hyp_tsv, cer=True, command=command),
        utterances=len(refs),
        decode_failures=tuple(failures),
        ref_tsv=str(ref_tsv),
        hyp_tsv=str(hyp_tsv),
    )
