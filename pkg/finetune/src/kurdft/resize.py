"""Embedding growth for the hybrid vocabulary.

Appending tokens to the vocabulary requires matching rows in the token
embedding and (because the output projection is tied) in the logits layer.
New rows start at the mean of the existing rows plus small gaussian noise
(NOISE_STD below), a documented constant; existing rows are left bit-for-bit
untouched.
"""

from __future__ import annotations

import torch

from . import ShapeError
from .model import ToySpeechModel
from .vocabio import Vocab

NOISE_STD = 1e-3


def resize_for_hybrid(
    model: ToySpeechModel, hybrid: Vocab, seed: int = 0
) -> ToySpeechModel:
    """Grow the tied embedding to cover a hybrid vocabulary's appended tokens.

    Requires the hybrid's id_offset to equal the model's current embedding
    row count (the appended ids must land exactly after the existing rows).
    Returns the same model object.
    """
    current_rows = model.embed.num_rows
    if hybrid.id_offset != current_rows:
        raise ShapeError(
            f"hybrid id_offset {hybrid.id_offset} != embedding rows {current_rows}"
        )
    added = len(hybrid.tokens) - hybrid.id_offset
    if added < 0:
        raise ShapeError("hybrid vocabulary smaller than its own id_offset")
    generator = torch.Generator().manual_seed(seed)
    model.embed.append_rows(added, NOISE_STD, generator)
    return model
