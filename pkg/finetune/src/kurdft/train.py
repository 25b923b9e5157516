"""Minimal training loop honoring a freeze mask and the shared schedule.

Linear warmup to the base learning rate, then constant; cross-entropy over
next-token targets; AdamW over the trainable parameters only. Each step is
logged to a TSV metrics file and checkpoints are written at the configured
cadence.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence

import torch

from . import KurdftError
from .config import TrainConfig
from .masks import FreezeMask, apply_freeze_mask
from .model import ToyModelConfig, ToySpeechModel, loss_for_batch


def lr_at(step: int, config: TrainConfig) -> float:
    """Learning rate for a 1-based step: linear warmup, then constant."""
    if config.warmup_steps and step <= config.warmup_steps:
        return config.learning_rate * step / config.warmup_steps
    return config.learning_rate


def save_checkpoint(model: ToySpeechModel, path) -> None:
    payload = {
        "model_config": asdict(model.config),
        "state_dict": model.state_dict(),
        "added_rows": 0 if model.embed.added_weight is None else model.embed.added_weight.shape[0],
    }
    torch.save(payload, path)


def load_checkpoint(path) -> ToySpeechModel:
    payload = torch.load(path, weights_only=True)
    model = ToySpeechModel(ToyModelConfig(**payload["model_config"]))
    added = payload["added_rows"]
    if added:
        model.embed.append_rows(added, noise_std=0.0, generator=None)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def train(
    model: ToySpeechModel,
    batches: Sequence[tuple[torch.Tensor, torch.Tensor]],
    config: TrainConfig,
    mask: FreezeMask | None = None,
    out_dir=None,
    max_steps: int | None = None,
) -> list[float]:
    """Run up to ``max_steps`` (default: config.max_steps) over cycled batches.

    Returns the per-step losses. When ``out_dir`` is given, writes
    ``metrics.tsv`` (step, lr, loss) and ``checkpoint.pt`` at the cadence and
    at the end.
    """
    if not batches:
        raise KurdftError("no training batches")
    config.validate()
    if mask is not None:
        apply_freeze_mask(model, mask)
    trainable = [p for p in model.parameters() if p.requires_grad]
    if not trainable:
        raise KurdftError("freeze mask leaves no trainable parameters")
    optimizer = torch.optim.AdamW(trainable, lr=config.learning_rate)
    steps = min(max_steps or config.max_steps, config.max_steps)

    losses: list[float] = []
    metrics_lines = ["step\tlr\tloss"]
    model.train()
    for step in range(1, steps + 1):
        features, tokens = batches[(step - 1) % len(batches)]
        rate = lr_at(step, config)
        for group in optimizer.param_groups:
            group["lr"] = rate
        optimizer.zero_grad()
        loss = loss_for_batch(model, features, tokens)
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
        metrics_lines.append(f"{step}\t{rate:.3e}\t{losses[-1]:.6f}")
        if out_dir is not None and step % config.checkpoint_every == 0:
            save_checkpoint(model, Path(out_dir) / "checkpoint.pt")
    model.eval()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.tsv").write_text("\n".join(metrics_lines) + "\n", encoding="utf-8")
        save_checkpoint(model, out_dir / "checkpoint.pt")
    return losses


def batches_from_dataset(
    examples: Iterable[tuple[torch.Tensor, list[int]]],
    bos_id: int,
    eos_id: int,
    batch_size: int = 4,
    max_len: int = 128,
) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Pad (features, token ids) examples into fixed batches.

    Token rows become [bos, ids..., eos] padded with -100 (ignored by the
    loss); feature rows are zero-padded to the longest in the batch.
    """
    examples = list(examples)
    if not examples:
        raise KurdftError("no examples to batch")
    batches = []
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        max_frames = max(f.shape[0] for f, _ in chunk)
        longest = min(max(len(ids) + 2 for _, ids in chunk), max_len)
        features = torch.zeros(len(chunk), max_frames, chunk[0][0].shape[1])
        tokens = torch.full((len(chunk), longest), -100, dtype=torch.long)
        for row, (feats, ids) in enumerate(chunk):
            features[row, : feats.shape[0]] = feats
            seq = [bos_id, *ids, eos_id][:longest]
            tokens[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        batches.append((features, tokens))
    return batches
