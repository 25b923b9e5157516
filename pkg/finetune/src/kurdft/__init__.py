"""Fine-tuning harness: freeze masks, embedding resizing, training configs."""

__version__ = "0.1.0"


class KurdftError(Exception):
    pass


class StrategyError(KurdftError):
    """Unknown fine-tuning strategy name."""


class ShapeError(KurdftError):
    """Vocabulary/embedding geometry mismatch."""
