"""Training hyperparameter bundles for the three fine-tuning strategies.

All strategies share the same schedule: 1e-5 base learning rate, 500 warmup
steps, at most 500,000 steps, cross-entropy objective, language and task tags
for Kurmanji transcription. A desk-scale override profile shrinks the step
budget so the whole loop runs in tests.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from pathlib import Path

from . import KurdftError, StrategyError

STRATEGIES = ("vanilla", "specific_parameter", "additional_module")

# CLI shorthand accepted everywhere strategy names are read.
STRATEGY_ALIASES = {
    "vanilla": "vanilla",
    "specific": "specific_parameter",
    "specific_parameter": "specific_parameter",
    "additional": "additional_module",
    "additional_module": "additional_module",
}


def canonical_strategy(name: str) -> str:
    try:
        return STRATEGY_ALIASES[name]
    except KeyError:
        raise StrategyError(
            f"unknown strategy {name!r}; expected one of {sorted(set(STRATEGY_ALIASES))}"
        ) from None


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    warmup_steps: int = 500
    max_steps: int = 500_000
    objective: str = "cross_entropy"
    language: str = "kmr"
    task: str = "transcribe"
    gradient_accumulation: int = 1
    mixed_precision: bool = False
    checkpoint_every: int = 10_000

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise KurdftError(f"learning_rate must be positive: {self.learning_rate}")
        if self.warmup_steps > self.max_steps:
            raise KurdftError(
                f"warmup_steps {self.warmup_steps} exceeds max_steps {self.max_steps}"
            )
        if self.gradient_accumulation < 1 or self.checkpoint_every < 1:
            raise KurdftError("gradient_accumulation and checkpoint_every must be >= 1")


def make_train_config(strategy: str, desk_scale: bool = False) -> TrainConfig:
    """Hyperparameters for a strategy; identical schedule for all three.

    ``desk_scale`` swaps in the test profile: 50 steps, 5 warmup, checkpoint
    at the end, same learning rate.
    """
    canonical_strategy(strategy)
    config = TrainConfig()
    if desk_scale:
        config = replace(config, max_steps=50, warmup_steps=5, checkpoint_every=50)
    config.validate()
    return config


def save_config(config: TrainConfig, path) -> None:
    lines = [f"{key} = {value}" for key, value in asdict(config).items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path) -> TrainConfig:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise KurdftError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    defaults = TrainConfig()
    kwargs = {}
    for key, value in values.items():
        if not hasattr(defaults, key):
            raise KurdftError(f"{path}: unknown config key {key!r}")
        current = getattr(defaults, key)
        if isinstance(current, bool):
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            kwargs[key] = int(value)
        elif isinstance(current, float):
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    config = TrainConfig(**kwargs)
    config.validate()
    return config
