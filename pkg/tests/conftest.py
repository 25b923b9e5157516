"""Shared fixtures: WAV writers, corpus builders, fixture text."""

from __future__ import annotations

import random
import wave
from pathlib import Path

import numpy as np
import pytest

from kurdasr import numnorm

# Golden number expansions used across modules (inputs -> spoken forms).
NUMBER_GOLDENS = {
    "1,234": "hezar û du sed û sih û çar",
    "12.34": "duwazdeh poynt sih û çar",
    "$45.67": "çil û pênc poynt şêst û heft dolaran",
    "85%": "heştê û pênc ji sed",
    "-123": "naqis sed û bîst û sê",
}

_EXTRA_WORDS = (
    "ez", "tu", "ew", "em", "hûn", "li", "ji", "bi", "ku", "car",
    "sal", "dem", "deng", "ziman", "welat", "xwe", "mezin", "piçûk",
    "baş", "nû", "kevn", "roj", "şev", "av", "agir", "çiya", "gund",
)


def kurmanji_wordlist() -> list[str]:
    lexicon = numnorm.default_lexicon()
    words: list[str] = list(_EXTRA_WORDS)
    words += list(lexicon.units.values())
    words += list(lexicon.teens.values())
    words += list(lexicon.tens.values())
    words += list(lexicon.scales.values())
    words += [lexicon.conjunction, lexicon.decimal_point, lexicon.negative, lexicon.zero]
    words += lexicon.percent.split()
    return sorted(set(words))


def build_fixture_corpus(path: Path, size_bytes: int, seed: int = 20240618) -> None:
    """Deterministically synthesize Kurmanji-like text of roughly size_bytes."""
    rng = random.Random(seed)
    words = kurmanji_wordlist()
    lines = []
    written = 0
    while written < size_bytes:
        line = " ".join(rng.choice(words) for _ in range(rng.randint(3, 12)))
        lines.append(line)
        written += len(line.encode("utf-8")) + 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_wav(path, samples: np.ndarray, rate: int = 22050, channels: int = 1, sampwidth: int = 2):
    """Write int PCM WAV; ``samples`` is int16 (interleaved when multichannel)."""
    with wave.open(str(path), "wb") as out:
        out.setnchannels(channels)
        out.setsampwidth(sampwidth)
        out.setframerate(rate)
        out.writeframes(np.asarray(samples).astype("<i2").tobytes())


def tone_i16(duration: float, rate: int, freq: float = 440.0, amp: float = 0.5) -> np.ndarray:
    t = np.arange(int(duration * rate)) / rate
    return (np.sin(2 * np.pi * freq * t) * amp * 32767).astype("<i2")


@pytest.fixture()
def small_corpus(tmp_path):
    """Three-row corpus TSV with matching WAV clips; returns (tsv, clips_dir)."""
    clips = tmp_path / "clips"
    clips.mkdir()
    rows = [
        ("clip_a.wav", "wéné baş e", "spk1"),
        ("clip_b.wav", "85% ji wan", "spk2"),
        ("clip_c.wav", "tu car", "spk1"),
    ]
    for name, _, _ in rows:
        write_wav(clips / name, tone_i16(0.25, 22050))
    tsv = tmp_path / "corpus.tsv"
    lines = ["path\tsentence\tclient_id"]
    lines += [f"{name}\t{sentence}\t{speaker}" for name, sentence, speaker in rows]
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return tsv, clips


def make_corpus(tmp_path: Path, n: int, speakers: int, prefix: str = "utt", rate: int = 22050):
    """Synth corpus with n rows over the given speaker count; returns (tsv, clips)."""
    clips = tmp_path / f"{prefix}_clips"
    clips.mkdir(exist_ok=True)
    words = kurmanji_wordlist()
    rng = random.Random(len(prefix) * 1000 + n)
    lines = ["path\tsentence\tclient_id"]
    for i in range(n):
        name = f"{prefix}_{i:04d}.wav"
        write_wav(clips / name, tone_i16(0.1, rate), rate=rate)
        sentence = " ".join(rng.choice(words) for _ in range(rng.randint(3, 8)))
        lines.append(f"{name}\t{sentence}\t{prefix}_speaker_{i % speakers}")
    tsv = tmp_path / f"{prefix}.tsv"
    tsv.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return tsv, clips
