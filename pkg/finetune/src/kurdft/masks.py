"""Per-parameter freeze masks realizing the three fine-tuning strategies.

A mask is an ordered list of (glob pattern, trainable flag) pairs; the last
matching pattern decides each parameter, and every parameter must match at
least one pattern. The three built-in strategies:

* ``vanilla``: everything trainable;
* ``specific_parameter``: only the attention projections (query/key/value/
  output, both self- and cross-attention) train, everything else freezes;
* ``additional_module``: only appended embedding rows (which are also the
  appended tied output-projection rows) and adapter parameters train.

The pattern lists are data, so variants (say, attention + layer norms) are a
one-line configuration change.
"""

from __future__ import annotations

from dataclasses import dataclass
from fnmatch import fnmatchcase
from typing import Iterable, Sequence

from . import StrategyError
from .config import canonical_strategy

_ATTENTION_PROJECTIONS = (
    "*attn.q_proj.*",
    "*attn.k_proj.*",
    "*attn.v_proj.*",
    "*attn.out_proj.*",
)

STRATEGY_PATTERNS: dict[str, tuple[tuple[str, bool], ...]] = {
    "vanilla": (("*", True),),
    "specific_parameter": (
        ("*", False),
        *((pattern, True) for pattern in _ATTENTION_PROJECTIONS),
    ),
    "additional_module": (
        ("*", False),
        ("*.added_weight", True),
        ("*adapter.*", True),
    ),
}


@dataclass(frozen=True)
class FreezeMask:
    strategy: str
    patterns: tuple[tuple[str, bool], ...]
    trainable: tuple[str, ...]
    frozen: tuple[str, ...]

    @property
    def summary(self) -> tuple[int, int]:
        return len(self.trainable), len(self.frozen)

    def is_trainable(self, name: str) -> bool:
        decision = None
        for pattern, flag in self.patterns:
            if fnmatchcase(name, pattern):
                decision = flag
        if decision is None:
            raise StrategyError(f"parameter {name!r} matches no mask pattern")
        return decision


def build_freeze_mask(
    strategy: str,
    parameter_names: Iterable[str],
    patterns: Sequence[tuple[str, bool]] | None = None,
) -> FreezeMask:
    """Classify every named parameter as trainable or frozen.

    ``patterns`` overrides the strategy's built-in list (it must still cover
    every parameter). Raises :class:`StrategyError` on unknown strategies or
    empty parameter lists.
    """
    names = list(parameter_names)
    if not names:
        raise StrategyError("parameter name list is empty")
    canonical = canonical_strategy(strategy)
    chosen = tuple(patterns) if patterns is not None else STRATEGY_PATTERNS[canonical]
    mask = FreezeMask(strategy=canonical, patterns=chosen, trainable=(), frozen=())
    trainable = tuple(n for n in names if mask.is_trainable(n))
    frozen = tuple(n for n in names if n not in set(trainable))
    return FreezeMask(strategy=canonical, patterns=chosen, trainable=trainable, frozen=frozen)


def apply_freeze_mask(model, mask: FreezeMask) -> None:
    """Set ``requires_grad`` on every model parameter per the mask."""
    trainable = set(mask.trainable)
    known = trainable | set(mask.frozen)
    for name, parameter in model.named_parameters():
        if name not in known:
            raise StrategyError(f"model parameter {name!r} was not classified by the mask")
        parameter.requires_grad_(name in trainable)
