"""Toy encoder-decoder speech model for exercising the fine-tuning strategies.

Small enough to train on CPU in seconds, but shaped like the real thing:
log-Mel frames enter a self-attention encoder, a decoder with self- and
cross-attention predicts token ids, and the token embedding is tied to the
output projection.

Two structural choices exist to make the strategies checkable:

* attention projections are individual Linear modules named ``q_proj``,
  ``k_proj``, ``v_proj``, ``out_proj``, so freeze-mask globs can target them;
* the tied embedding stores appended vocabulary rows in a separate
  ``added_weight`` tensor and computes base and added logits by separate
  matmuls, so freezing the base rows and preserving base-token logits after a
  resize hold exactly, not approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from . import ShapeError


@dataclass(frozen=True)
class ToyModelConfig:
    vocab_size: int
    num_mels: int = 16
    d_model: int = 32
    heads: int = 2
    ff_size: int = 64
    encoder_layers: int = 2
    decoder_layers: int = 2
    max_len: int = 128
    adapter_size: int = 0  # 0 disables adapters; 64 is the documented default when on


def sinusoidal_positions(length: int, d_model: int) -> torch.Tensor:
    position = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float32) * (-math.log(10000.0) / d_model))
    table = torch.zeros(length, d_model)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int):
        super().__init__()
        if d_model % heads:
            raise ShapeError(f"d_model {d_model} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, t, _ = x.shape
        return x.view(b, t, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, query, memory, causal: bool = False) -> torch.Tensor:
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(memory))
        v = self._split(self.v_proj(memory))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if causal:
            t_q, t_k = scores.shape[-2], scores.shape[-1]
            mask = torch.triu(torch.ones(t_q, t_k, dtype=torch.bool, device=scores.device), 1)
            scores = scores.masked_fill(mask, float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(query.shape)
        return self.out_proj(out)


class Adapter(nn.Module):
    """Bottleneck adapter; up-projection starts at zero so it begins as identity."""

    def __init__(self, d_model: int, bottleneck: int):
        super().__init__()
        self.down = nn.Linear(d_model, bottleneck)
        self.up = nn.Linear(bottleneck, d_model)
        nn.init.zeros_(self.up.weight)
        nn.init.zeros_(self.up.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.up(F.gelu(self.down(x)))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ff_size: int):
        super().__init__()
        self.fc1 = nn.Linear(d_model, ff_size)
        self.fc2 = nn.Linear(ff_size, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(F.gelu(self.fc1(x)))


class EncoderBlock(nn.Module):
    def __init__(self, config: ToyModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.heads)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.ff = FeedForward(config.d_model, config.ff_size)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.adapter = Adapter(config.d_model, config.adapter_size) if config.adapter_size else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.self_attn(x, x))
        x = self.norm2(x + self.ff(x))
        if self.adapter is not None:
            x = self.adapter(x)
        return x


class DecoderBlock(nn.Module):
    def __init__(self, config: ToyModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.heads)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.cross_attn = MultiHeadAttention(config.d_model, config.heads)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.ff = FeedForward(config.d_model, config.ff_size)
        self.norm3 = nn.LayerNorm(config.d_model)
        self.adapter = Adapter(config.d_model, config.adapter_size) if config.adapter_size else None

    def forward(self, x: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        x = self.norm1(x + self.self_attn(x, x, causal=True))
        x = self.norm2(x + self.cross_attn(x, memory))
        x = self.norm3(x + self.ff(x))
        if self.adapter is not None:
            x = self.adapter(x)
        return x


class TiedEmbedding(nn.Module):
    """Token embedding tied to the output projection.

    Appended vocabulary rows live in ``added_weight``, a separate tensor from
    the frozen-able ``base_weight``. Lookup concatenates the two; projection
    computes base and added logits with separate matmuls and concatenates, so
    logits for base ids are bitwise independent of the appended rows.
    """

    def __init__(self, vocab_size: int, d_model: int):
        super().__init__()
        self.base_weight = nn.Parameter(torch.empty(vocab_size, d_model))
        nn.init.normal_(self.base_weight, mean=0.0, std=0.02)
        self.register_parameter("added_weight", None)

    @property
    def num_rows(self) -> int:
        added = 0 if self.added_weight is None else self.added_weight.shape[0]
        return self.base_weight.shape[0] + added

    def full_weight(self) -> torch.Tensor:
        if self.added_weight is None:
            return self.base_weight
        return torch.cat([self.base_weight, self.added_weight], dim=0)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return F.embedding(ids, self.full_weight())

    def project(self, x: torch.Tensor) -> torch.Tensor:
        base_logits = x @ self.base_weight.transpose(0, 1)
        if self.added_weight is None:
            return base_logits
        added_logits = x @ self.added_weight.transpose(0, 1)
        return torch.cat([base_logits, added_logits], dim=-1)

    def append_rows(self, count: int, noise_std: float, generator: torch.Generator | None) -> None:
        if count <= 0:
            return
        mean_row = self.full_weight().detach().mean(dim=0, keepdim=True)
        noise = torch.randn(
            count, mean_row.shape[1], generator=generator, dtype=mean_row.dtype
        ) * noise_std
        new_rows = (mean_row + noise).detach()
        if self.added_weight is None:
            self.added_weight = nn.Parameter(new_rows)
        else:
            combined = torch.cat([self.added_weight.detach(), new_rows], dim=0)
            self.added_weight = nn.Parameter(combined)


class ToySpeechModel(nn.Module):
    def __init__(self, config: ToyModelConfig):
        super().__init__()
        self.config = config
        self.input_proj = nn.Linear(config.num_mels, config.d_model)
        self.encoder_layers = nn.ModuleList(
            EncoderBlock(config) for _ in range(config.encoder_layers)
        )
        self.embed = TiedEmbedding(config.vocab_size, config.d_model)
        self.decoder_layers = nn.ModuleList(
            DecoderBlock(config) for _ in range(config.decoder_layers)
        )
        self.final_norm = nn.LayerNorm(config.d_model)
        self.register_buffer(
            "positions", sinusoidal_positions(config.max_len, config.d_model), persistent=False
        )

    def encode(self, features: torch.Tensor) -> torch.Tensor:
        x = self.input_proj(features)
        x = x + self.positions[: x.shape[1]].to(x.dtype)
        for layer in self.encoder_layers:
            x = layer(x)
        return x

    def decode_logits(self, token_ids: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        x = self.embed.embed(token_ids)
        x = x + self.positions[: x.shape[1]].to(x.dtype)
        for layer in self.decoder_layers:
            x = layer(x, memory)
        return self.embed.project(self.final_norm(x))

    def forward(self, features: torch.Tensor, token_ids: torch.Tensor) -> torch.Tensor:
        """Teacher-forced logits: [batch, len(token_ids), vocab]."""
        return self.decode_logits(token_ids, self.encode(features))

    @torch.no_grad()
    def greedy_decode(self, features: torch.Tensor, bos_id: int, eos_id: int, max_len: int | None = None) -> list[int]:
        """Greedy autoregressive decode of a single utterance [T, num_mels]."""
        max_len = min(max_len or self.config.max_len, self.config.max_len)
        memory = self.encode(features.unsqueeze(0))
        ids = [bos_id]
        for _ in range(max_len - 1):
            tokens = torch.tensor([ids], dtype=torch.long, device=features.device)
            logits = self.decode_logits(tokens, memory)
            next_id = int(logits[0, -1].argmax())
            ids.append(next_id)
            if next_id == eos_id:
                break
        return ids[1:-1] if ids and ids[-1] == eos_id else ids[1:]


def loss_for_batch(model: ToySpeechModel, features: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Next-token cross entropy; target positions with id -100 are ignored."""
    inputs = tokens[:, :-1].clamp_min(0)
    targets = tokens[:, 1:]
    logits = model(features, inputs)
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=-100
    )
