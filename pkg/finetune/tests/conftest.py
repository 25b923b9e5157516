"""Fixtures: toy models and a full artifact set built via the primary CLI."""

from __future__ import annotations

import random
import subprocess
import wave
from pathlib import Path

import numpy as np
import pytest
import torch

from kurdft.evaluate import primary_command
from kurdft.model import ToyModelConfig, ToySpeechModel

WORDS = (
    "yek", "du", "sê", "çar", "pênc", "şeş", "heft", "heşt", "neh", "deh",
    "sed", "hezar", "û", "ji", "li", "ez", "tu", "ew", "roj", "dem",
)


def toy_model(vocab_size: int = 60, adapter_size: int = 0, seed: int = 0) -> ToySpeechModel:
    torch.manual_seed(seed)
    config = ToyModelConfig(
        vocab_size=vocab_size,
        num_mels=16,
        d_model=32,
        heads=2,
        ff_size=64,
        encoder_layers=2,
        decoder_layers=2,
        max_len=64,
        adapter_size=adapter_size,
    )
    return ToySpeechModel(config)


def _write_tone_wav(path: Path, seconds: float, rate: int = 22050, freq: float = 330.0):
    t = np.arange(int(seconds * rate)) / rate
    samples = (np.sin(2 * np.pi * freq * t) * 0.4 * 32767).astype("<i2")
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(rate)
        out.writeframes(samples.tobytes())


def run_primary(*argv) -> None:
    completed = subprocess.run(
        [*primary_command(), *[str(a) for a in argv]], capture_output=True, text=True
    )
    if completed.returncode != 0:
        raise RuntimeError(f"primary CLI failed: {completed.stderr}")


@pytest.fixture(scope="session")
def artifacts(tmp_path_factory):
    """Manifest, feature dumps, trained vocab, and hybrid file from the primary CLI."""
    root = tmp_path_factory.mktemp("artifacts")
    clips = root / "clips"
    clips.mkdir()
    rng = random.Random(11)
    rows = ["path\tsentence\tclient_id"]
    for i in range(10):
        name = f"utt_{i:03d}.wav"
        _write_tone_wav(clips / name, seconds=0.3 + 0.05 * (i % 3), freq=300 + 20 * i)
        sentence = " ".join(rng.choice(WORDS) for _ in range(rng.randint(3, 6)))
        rows.append(f"{name}\t{sentence}\tspk_{i % 4}")
    tsv = root / "corpus.tsv"
    tsv.write_text("\n".join(rows) + "\n", encoding="utf-8")

    manifest = root / "manifest.jsonl"
    run_primary("prepare", "--tsv", tsv, "--clips", clips, "--seed", 5, "--out", manifest)

    features = root / "features"
    run_primary("features", "--manifest", manifest, "--out", features, "--mels", 80)

    text_corpus = root / "text_corpus.txt"
    lines = [" ".join(rng.choice(WORDS) for _ in range(rng.randint(4, 9))) for _ in range(400)]
    text_corpus.write_text("\n".join(lines) + "\n", encoding="utf-8")

    base_dir = root / "vocab_base"
    run_primary("train-tokenizer", "--corpus", text_corpus, "--size", 60, "--out", base_dir)
    bigger_dir = root / "vocab_big"
    run_primary("train-tokenizer", "--corpus", text_corpus, "--size", 120, "--out", bigger_dir)
    hybrid = root / "hybrid.txt"
    run_primary(
        "build-hybrid", "--base", base_dir / "vocab.txt", "--trained", bigger_dir, "--out", hybrid
    )
    return {
        "root": root,
        "manifest": manifest,
        "features": features,
        "vocab_dir": base_dir,
        "hybrid": hybrid,
    }
