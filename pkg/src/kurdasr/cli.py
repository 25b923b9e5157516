"""Command-line entry point for the preparation and evaluation pipeline.

Subcommands: normalize, prepare, features, train-tokenizer, build-hybrid,
score, validate-test. Flags override values from a flat key=value config file
(``--config`` or the KURDASR_CONFIG environment variable), which override
built-in defaults. Artifacts are written atomically (temp file + rename), so
a failing run never leaves a partial output. Exit codes: 0 success, 1 module
error, 2 usage error.

Log lines go to stderr as ``level<TAB>module<TAB>message``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import audiofeat, corpus, metrics, numnorm, textnorm, tokenizer
from .errors import KurdasrError

log = logging.getLogger("kurdasr.cli")

CONFIG_ENV = "KURDASR_CONFIG"


class ConfigError(KurdasrError):
    """The pipeline configuration is malformed or references missing paths."""


@dataclass
class PipelineConfig:
    """Pipeline settings: paths, seed, split ratios, feature and tokenizer knobs.

    Serialized as flat ``key = value`` text; round-trips losslessly.
    """

    tsv: str | None = None
    clips: str | None = None
    lexicon: str | None = None
    rules: str | None = None
    out: str | None = None
    seed: int = 0
    train_ratio: float = 0.9
    dev_ratio: float = 0.1
    mels: int = 128
    vocab_size: int = 4000
    min_frequency: int = 2
    _path_keys = ("tsv", "clips", "lexicon", "rules")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(textnorm.read_utf8(path).splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        config = cls()
        for key, value in values.items():
            if not hasattr(config, key) or key.startswith("_"):
                raise ConfigError(f"{path}: unknown config key {key!r}")
            current = getattr(config, key)
            if isinstance(current, int) and not isinstance(current, bool):
                setattr(config, key, int(value))
            elif isinstance(current, float):
                setattr(config, key, float(value))
            else:
                setattr(config, key, value)
        return config

    def to_file(self, path) -> None:
        lines = []
        for key in (
            "tsv", "clips", "lexicon", "rules", "out", "seed",
            "train_ratio", "dev_ratio", "mels", "vocab_size", "min_frequency",
        ):
            value = getattr(self, key)
            if value is not None:
                lines.append(f"{key} = {value}")
        atomic_write_text(path, "\n".join(lines) + "\n")

    def validate_paths(self) -> None:
        for key in self._path_keys:
            value = getattr(self, key)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"config path {key} = {value} does not exist")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def _load_config(args) -> PipelineConfig:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path:
        config = PipelineConfig.from_file(path)
        config.validate_paths()
        return config
    return PipelineConfig()


def _pick(flag_value, config_value):
    return flag_value if flag_value is not None else config_value


def _lexicon_and_rules(args, config: PipelineConfig):
    lexicon_path = _pick(getattr(args, "lexicon", None), config.lexicon)
    rules_path = _pick(getattr(args, "rules", None), config.rules)
    lexicon = numnorm.load_lexicon(lexicon_path) if lexicon_path else None
    rules = textnorm.load_rules(rules_path) if rules_path else None
    return lexicon, rules


# -- subcommands --


def cmd_normalize(args) -> int:
    config = _load_config(args)
    lexicon, rules = _lexicon_and_rules(args, config)
    text = textnorm.read_utf8(args.infile) if args.infile else textnorm.decode_utf8(sys.stdin.buffer.read())
    result = numnorm.normalize_text(text, lexicon, rules)
    if args.out:
        atomic_write_text(args.out, result)
        log.info("normalized %s -> %s", args.infile or "<stdin>", args.out)
    else:
        sys.stdout.write(result)
    return 0


def cmd_prepare(args) -> int:
    config = _load_config(args)
    lexicon, rules = _lexicon_and_rules(args, config)
    tsv = _pick(args.tsv, config.tsv)
    clips = _pick(args.clips, config.clips)
    out = _pick(args.out, config.out)
    if not tsv or not clips or not out:
        raise ConfigError("prepare requires --tsv, --clips, and --out (flags or config)")
    seed = args.seed if args.seed is not None else config.seed
    train_ratio = _pick(args.train_ratio, config.train_ratio)
    records = corpus.ingest(tsv, clips, lexicon, rules)
    manifest = corpus.split(
        records,
        seed=seed,
        ratios=(train_ratio, round(1.0 - train_ratio, 12)),
        provenance={Path(tsv).name: corpus.file_digest(tsv)},
        speaker_disjoint=args.speaker_disjoint,
    )
    atomic_write_text(out, corpus.manifest_to_text(manifest))
    total, kept = corpus.hours_summary(manifest.records)
    excluded = sum(1 for r in manifest.records if r.split == "excluded")
    log.info(
        "prepared %d records (%d excluded); %.3f h recorded, %.3f h kept; manifest %s",
        len(manifest.records), excluded, total, kept, out,
    )
    return 0


def cmd_features(args) -> int:
    config = _load_config(args)
    manifest = corpus.load_manifest(args.manifest)
    out_dir = Path(_pick(args.out, config.out) or "features")
    out_dir.mkdir(parents=True, exist_ok=True)
    mels = args.mels if args.mels is not None else config.mels
    feature_config = audiofeat.FeatureConfig(num_mels=mels)
    written = 0
    for record in manifest.records:
        if record.split == "excluded":
            continue
        buffer = audiofeat.load_audio(record.clip_path)
        buffer = audiofeat.resample(buffer, feature_config.sample_rate)
        spec = audiofeat.log_mel(buffer, feature_config)
        target = out_dir / f"{record.id}.kmel"
        tmp = target.with_name(f".{target.name}.tmp")
        audiofeat.write_features(spec, tmp)
        os.replace(tmp, target)
        written += 1
    log.info("wrote %d feature files to %s (%d mels)", written, out_dir, mels)
    return 0


def cmd_train_tokenizer(args) -> int:
    config = _load_config(args)
    size = args.size if args.size is not None else config.vocab_size
    min_frequency = args.min_frequency if args.min_frequency is not None else config.min_frequency
    tokens, merges = tokenizer.train_bpe(args.corpus, size, min_frequency)
    tokenizer.save_vocab(tokens, merges, args.out)
    log.info("trained %d tokens (%d merges) -> %s", len(tokens), len(merges), args.out)
    return 0


def cmd_build_hybrid(args) -> int:
    base_tokens = tokenizer.load_token_file(args.base)
    trained_tokens, merges = tokenizer.load_vocab(args.trained)
    # A base that is itself a trained vocabulary brings its merges along.
    base_path = Path(args.base)
    base_merges = []
    if base_path.name == "vocab.txt" and base_path.with_name("merges.txt").is_file():
        _, base_merges = tokenizer.load_vocab(base_path.parent)
    hybrid = tokenizer.build_hybrid(
        base_tokens,
        trained_tokens,
        merges,
        base_merges=base_merges,
        base_digest=tokenizer.vocab_file_digest(args.base),
    )
    tokenizer.save_hybrid(hybrid, args.out)
    log.info(
        "hybrid vocabulary: %d base + %d added -> %s",
        hybrid.id_offset, len(hybrid.added_tokens), args.out,
    )
    return 0


def _read_scored_tsv(path) -> dict[str, str]:
    table: dict[str, str] = {}
    for lineno, line in enumerate(textnorm.read_utf8(path).splitlines(), start=1):
        if not line:
            continue
        utt_id, sep, text = line.partition("\t")
        if not sep:
            raise KurdasrError(f"{path}:{lineno}: expected 'utterance_id<TAB>text'")
        table[utt_id] = text
    return table


def cmd_score(args) -> int:
    refs = _read_scored_tsv(args.ref)
    hyps = _read_scored_tsv(args.hyp)
    for extra in sorted(set(hyps) - set(refs)):
        log.warning("hypothesis id %s has no reference; ignored", extra)
    for missing in sorted(set(refs) - set(hyps)):
        log.warning("no hypothesis for %s; scoring against empty text", missing)
    ids = list(refs)
    pairs = [(refs[i], hyps.get(i, "")) for i in ids]
    options = metrics.ScoreOptions(
        case_fold=not args.keep_case,
        strip_punct=not args.keep_punct,
    )
    report = metrics.corpus_report(pairs, options, unit="char" if args.cer else "word", ids=ids)
    sys.stdout.write(report.format_table())
    if args.tsv_out:
        atomic_write_text(args.tsv_out, report.to_tsv())
    return 0


def cmd_validate_test(args) -> int:
    config = _load_config(args)
    lexicon, rules = _lexicon_and_rules(args, config)
    manifest = corpus.load_manifest(args.manifest)
    test_records = corpus.ingest(args.tsv, args.clips, lexicon, rules)
    report = corpus.validate_test_set(manifest, test_records)
    sys.stdout.write(report.format_table())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kurdasr",
        description="Kurmanji speech-recognition data preparation and evaluation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help=f"key=value config file (default ${CONFIG_ENV})")
        p.add_argument("--lexicon", help="numeral lexicon file")
        p.add_argument("--rules", help="character rule table file")

    p = sub.add_parser("normalize", help="character- and number-normalize a text file")
    add_common(p)
    p.add_argument("--in", dest="infile", help="input file (default stdin)")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("prepare", help="ingest a corpus TSV and emit a split manifest")
    add_common(p)
    p.add_argument("--tsv", help="corpus TSV (path/sentence/client_id columns)")
    p.add_argument("--clips", help="clip directory")
    p.add_argument("--seed", type=int, help="shuffle seed")
    p.add_argument("--train-ratio", type=float, dest="train_ratio")
    p.add_argument(
        "--speaker-disjoint",
        action="store_true",
        dest="speaker_disjoint",
        help="keep each speaker entirely in train or dev",
    )
    p.add_argument("--out", help="manifest output path")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("features", help="extract log-Mel features for a manifest")
    p.add_argument("--config", help=f"key=value config file (default ${CONFIG_ENV})")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory")
    p.add_argument("--mels", type=int, choices=(80, 128))
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-tokenizer", help="train a BPE vocabulary on a text corpus")
    p.add_argument("--config", help=f"key=value config file (default ${CONFIG_ENV})")
    p.add_argument("--corpus", required=True)
    p.add_argument("--size", type=int, help="target vocabulary size")
    p.add_argument("--min-frequency", type=int, dest="min_frequency")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_tokenizer)

    p = sub.add_parser("build-hybrid", help="append a trained vocabulary to a base one")
    p.add_argument("--base", required=True, help="base vocabulary file (one token per line)")
    p.add_argument("--trained", required=True, help="trained vocabulary directory")
    p.add_argument("--out", required=True, help="hybrid vocabulary file")
    p.set_defaults(func=cmd_build_hybrid)

    p = sub.add_parser("score", help="score hypothesis TSV against reference TSV")
    p.add_argument("--ref", required=True, help="reference TSV (id<TAB>text)")
    p.add_argument("--hyp", required=True, help="hypothesis TSV (id<TAB>text)")
    p.add_argument("--cer", action="store_true", help="character level instead of word level")
    p.add_argument("--keep-case", action="store_true", dest="keep_case")
    p.add_argument("--keep-punct", action="store_true", dest="keep_punct")
    p.add_argument("--tsv-out", dest="tsv_out", help="also write the report as TSV")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("validate-test", help="validate a held-out test set against a manifest")
    add_common(p)
    p.add_argument("--manifest", required=True, help="training manifest")
    p.add_argument("--tsv", required=True, help="test-set TSV")
    p.add_argument("--clips", required=True, help="test clip directory")
    p.set_defaults(func=cmd_validate_test)
    return parser


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s\t%(name)s\t%(message)s"))
    root = logging.getLogger("kurdasr")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KurdasrError as exc:
        module = type(exc).__module__.rsplit(".", 1)[-1]
        log.error("%s: %s", module, exc)
        return 1
    except OSError as exc:
        log.error("io: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
