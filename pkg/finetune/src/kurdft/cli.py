"""Command-line entry point: ``kurdft finetune`` and ``kurdft evaluate``.

The finetune command reads a flat key=value harness config naming the
artifacts produced by the primary toolkit (manifest, feature dump directory,
trained vocabulary directory, optional hybrid file), builds the toy model,
applies the strategy's freeze mask, trains, and writes checkpoint, metrics
TSV, and the training config as key-value text.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import torch

from . import KurdftError
from .config import canonical_strategy, make_train_config, save_config
from .evaluate import evaluate
from .masks import build_freeze_mask
from .model import ToyModelConfig, ToySpeechModel
from .resize import resize_for_hybrid
from .train import batches_from_dataset, load_checkpoint, train
from .vocabio import (
    encode,
    load_hybrid_vocab,
    load_manifest_records,
    load_trained_vocab,
    read_feature_dump,
)

_HARNESS_KEYS = {
    "manifest": str,
    "features": str,
    "vocab": str,
    "hybrid": str,
    "out": str,
    "eval_out": str,
    "d_model": int,
    "heads": int,
    "encoder_layers": int,
    "decoder_layers": int,
    "adapter_size": int,
    "batch_size": int,
    "max_target_len": int,
    "seed": int,
}

_DEFAULTS = {
    "d_model": 32,
    "heads": 2,
    "encoder_layers": 2,
    "decoder_layers": 2,
    "adapter_size": 0,
    "batch_size": 4,
    "max_target_len": 128,
    "seed": 0,
}


def read_harness_config(path) -> dict:
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise KurdftError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _HARNESS_KEYS:
            raise KurdftError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _HARNESS_KEYS[key](value)
    for required in ("manifest", "features", "vocab", "out"):
        if required not in values:
            raise KurdftError(f"{path}: missing required key {required!r}")
    return values


def _training_examples(values: dict, vocab, num_mels_limit: int):
    features_dir = Path(values["features"])
    examples = []
    for record in load_manifest_records(values["manifest"]):
        if record["split"] not in ("train", "unassigned"):
            continue
        dump = features_dir / f"{record['id']}.kmel"
        if not dump.is_file():
            continue
        frames = read_feature_dump(dump)[:, :num_mels_limit]
        ids = encode(record["transcript_normalized"], vocab)
        examples.append((torch.from_numpy(frames).float(), ids))
    if not examples:
        raise KurdftError("no trainable utterances with feature dumps found")
    return examples


def cmd_finetune(args) -> int:
    strategy = canonical_strategy(args.strategy)
    train_config = make_train_config(strategy, desk_scale=args.desk_scale)
    values = read_harness_config(args.config)
    out_dir = Path(values["out"])
    out_dir.mkdir(parents=True, exist_ok=True)

    base = load_trained_vocab(values["vocab"])
    vocab = base
    if strategy == "additional_module":
        if "hybrid" not in values:
            raise KurdftError("additional_module requires a 'hybrid' config entry")
        vocab = load_hybrid_vocab(values["hybrid"], Path(values["vocab"]) / "vocab.txt")

    sample_dump = next(Path(values["features"]).glob("*.kmel"), None)
    if sample_dump is None:
        raise KurdftError(f"no feature dumps in {values['features']}")
    num_mels = read_feature_dump(sample_dump).shape[1]

    torch.manual_seed(values["seed"])
    model = ToySpeechModel(
        ToyModelConfig(
            vocab_size=len(base.tokens),
            num_mels=num_mels,
            d_model=values["d_model"],
            heads=values["heads"],
            ff_size=2 * values["d_model"],
            encoder_layers=values["encoder_layers"],
            decoder_layers=values["decoder_layers"],
            max_len=values["max_target_len"],
            adapter_size=values["adapter_size"],
        )
    )
    if strategy == "additional_module":
        resize_for_hybrid(model, vocab, seed=values["seed"])

    mask = build_freeze_mask(strategy, [name for name, _ in model.named_parameters()])
    if strategy == "additional_module" and mask.summary[0] == 0:
        raise KurdftError(
            "the hybrid vocabulary adds no tokens and adapters are disabled; "
            "nothing to train (set adapter_size, or rebuild the hybrid so it "
            "actually appends tokens)"
        )
    print(
        f"strategy {strategy}: {mask.summary[0]} trainable / {mask.summary[1]} frozen tensors",
        file=sys.stderr,
    )

    examples = _training_examples(values, vocab, num_mels)
    batches = batches_from_dataset(
        examples,
        vocab.bos_id,
        vocab.eos_id,
        batch_size=values["batch_size"],
        max_len=values["max_target_len"],
    )
    losses = train(model, batches, train_config, mask, out_dir=out_dir)
    save_config(train_config, out_dir / "train_config.txt")
    print(
        f"trained {len(losses)} steps; loss {losses[0]:.4f} -> {losses[-1]:.4f}; "
        f"artifacts in {out_dir}",
        file=sys.stderr,
    )

    if "eval_out" in values:
        result = evaluate(model, values["manifest"], values["features"], vocab, values["eval_out"])
        print(
            f"eval: WER {result.wer:.1f} CER {result.cer:.1f} over {result.utterances} utterances",
            file=sys.stderr,
        )
    return 0


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    if args.hybrid:
        vocab = load_hybrid_vocab(args.hybrid, Path(args.vocab) / "vocab.txt")
    else:
        vocab = load_trained_vocab(args.vocab)
    result = evaluate(model, args.manifest, args.features, vocab, args.out)
    print(f"WER\t{result.wer:.1f}")
    print(f"CER\t{result.cer:.1f}")
    print(f"utterances\t{result.utterances}")
    for failure in result.decode_failures:
        print(f"decode-failure\t{failure}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kurdft", description="Fine-tuning harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="train the toy model under a strategy's freeze mask")
    p.add_argument("--strategy", required=True, choices=("vanilla", "specific", "additional"))
    p.add_argument("--config", required=True, help="harness key=value config file")
    p.add_argument("--desk-scale", action="store_true", dest="desk_scale",
                   help="test profile: 50 steps instead of 500,000")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("evaluate", help="decode a checkpoint over a manifest and score it")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--vocab", required=True, help="trained vocabulary directory")
    p.add_argument("--hybrid", help="hybrid vocabulary file (optional)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KurdftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
